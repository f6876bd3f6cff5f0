// Command-line front end: `fit` on a CSV, `simulate` for the coverage
// studies, `selftest` for the exact-arithmetic smoke checks.
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "robreg/cli.hpp"

namespace {

int int_exit(robreg::ExitCode code) { return static_cast<int>(code); }

void add_mcmc_options(CLI::App* cmd, robreg::McmcConfig& mcmc, int& knots) {
    cmd->add_option("--mcmc-iters", mcmc.iterations, "Total MCMC iterations");
    cmd->add_option("--mcmc-burnin", mcmc.burnin, "Burn-in iterations");
    cmd->add_option("--mcmc-thin", mcmc.thin, "Thinning interval");
    cmd->add_option("--knots", knots, "Spline knot count (0 = plain linear model)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model-robust linear trend estimation (classical, sandwich, and "
                 "Bayesian-robust under random or fixed designs)"};
    app.require_subcommand(1);

    robreg::cli::FitConfig fit_config;
    std::vector<std::string> fit_methods;
    int fit_round = -1;
    auto* fit = app.add_subcommand("fit", "Fit the linear trend of a CSV dataset");
    fit->add_option("--input", fit_config.input, "Input CSV path")->required();
    fit->add_option("--outcome", fit_config.outcome, "Outcome column name")->required();
    fit->add_option("--covariates", fit_config.covariates, "Covariate column name(s)")
        ->required()
        ->delimiter(',');
    fit->add_option("--methods", fit_methods,
                    "Methods: model-based, sandwich, bayes-random-x, bayes-fixed-x, "
                    "bayes-fixed-x-mc")
        ->delimiter(',');
    fit->add_option("--kind", fit_config.kind, "Covariate kind: discrete or continuous");
    fit->add_option("--seed", fit_config.seed, "Master seed");
    fit->add_option("--draws", fit_config.draws, "Posterior draw count (discrete Monte Carlo)");
    fit->add_option("--min-group", fit_config.min_group,
                    "Policy for groups with fewer than 4 rows: error or drop");
    fit->add_option("--round-x", fit_round,
                    "Round covariates to this many decimals before grouping");
    fit->add_option("--chain-out", fit_config.chain_out,
                    "Export retained MCMC draws to this CSV (continuous kind)");
    int fit_knots = 20;
    add_mcmc_options(fit, fit_config.mcmc, fit_knots);
    std::string fit_format = "table";
    fit->add_option("--format", fit_format, "Output format: table or json");

    robreg::cli::SimulateConfig sim_config;
    auto* sim = app.add_subcommand("simulate", "Run a frequentist coverage study");
    sim->add_option("--preset", sim_config.preset,
                    "table1-desk, table2-desk, table1-full, table2-full");
    sim->add_option("--scenarios", sim_config.scenarios,
                    "linear-equal, linear-unequal, nonlinear-equal, nonlinear-unequal")
        ->delimiter(',');
    sim->add_option("--methods", sim_config.methods, "model-based, sandwich, bayes-robust")
        ->delimiter(',');
    sim->add_option("--x-mode", sim_config.x_mode, "Scoring/estimator mode: random or fixed");
    sim->add_option("--n", sim_config.n, "Sample size per replicate");
    long sim_replicates = -1;
    sim->add_option("--replicates", sim_replicates, "Replicates for every method");
    sim->add_option("--seed", sim_config.seed, "Master seed");
    sim->add_option("--threads", sim_config.threads, "Worker threads (0 = hardware)");
    sim->add_flag("--detail", sim_config.detail, "Include per-replicate detail in JSON output");
    add_mcmc_options(sim, sim_config.mcmc, sim_config.knots);
    std::string sim_format = "table";
    sim->add_option("--format", sim_format, "Output format: table or json");

    auto* selftest = app.add_subcommand("selftest", "Run the exact-arithmetic smoke checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e); // --help
        }
        app.exit(e);
        return int_exit(robreg::ExitCode::config_error);
    }

    try {
        if (fit->parsed()) {
            fit_config.knots = fit_knots;
            if (fit_round >= 0) {
                fit_config.round_decimals = fit_round;
            }
            if (!fit_methods.empty()) {
                fit_config.methods.clear();
                for (const auto& token : fit_methods) {
                    fit_config.methods.push_back(robreg::cli::parse_fit_method(token));
                }
            }
            if (fit_format != "table" && fit_format != "json") {
                throw robreg::ConfigError("--format must be 'table' or 'json'");
            }
            const robreg::FitReport report = robreg::cli::run_fit(fit_config);
            for (const auto& w : report.warnings) {
                std::fprintf(stderr, "warning: %s\n", w.c_str());
            }
            std::fputs(fit_format == "json" ? robreg::render_fit_json(report).c_str()
                                            : robreg::render_fit_text(report).c_str(),
                       stdout);
        } else if (sim->parsed()) {
            if (sim_replicates >= 0) {
                sim_config.replicates = sim_replicates;
            }
            if (sim_config.threads <= 0) {
                sim_config.threads =
                    static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
            }
            if (sim_format != "table" && sim_format != "json") {
                throw robreg::ConfigError("--format must be 'table' or 'json'");
            }
            const auto report = robreg::cli::run_simulate(sim_config);
            std::fputs(sim_format == "json"
                           ? robreg::render_sim_json(report, sim_config.detail).c_str()
                           : robreg::render_sim_text(report).c_str(),
                       stdout);
        } else if (selftest->parsed()) {
            const auto result = robreg::cli::run_selftest();
            for (const auto& [name, ok] : result.checks) {
                std::printf("%s  %s\n", ok ? "PASS" : "FAIL", name.c_str());
            }
            if (!result.all_passed()) {
                return int_exit(robreg::ExitCode::numerical_failure);
            }
        }
    } catch (const robreg::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return int_exit(e.exit_code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return int_exit(robreg::ExitCode::numerical_failure);
    }
    return int_exit(robreg::ExitCode::ok);
}
