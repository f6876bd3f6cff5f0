#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "robreg/bayes_continuous.hpp"
#include "robreg/bayes_discrete.hpp"
#include "robreg/csv.hpp"
#include "robreg/errors.hpp"
#include "robreg/estimators.hpp"
#include "robreg/report.hpp"
#include "robreg/simulate.hpp"

namespace robreg::cli {

enum class FitMethod {
    model_based,
    sandwich,
    bayes_random_x,
    bayes_fixed_x,
    bayes_fixed_x_mc,
};

inline FitMethod parse_fit_method(const std::string& token) {
    if (token == "model-based") return FitMethod::model_based;
    if (token == "sandwich") return FitMethod::sandwich;
    if (token == "bayes-random-x" || token == "bayes-random") return FitMethod::bayes_random_x;
    if (token == "bayes-fixed-x" || token == "bayes-fixed") return FitMethod::bayes_fixed_x;
    if (token == "bayes-fixed-x-mc") return FitMethod::bayes_fixed_x_mc;
    throw ConfigError("unknown method '" + token +
                      "' (expected model-based, sandwich, bayes-random-x, bayes-fixed-x, "
                      "bayes-fixed-x-mc)");
}

struct FitConfig {
    std::string input;
    std::string outcome;
    std::vector<std::string> covariates;
    std::vector<FitMethod> methods{FitMethod::model_based, FitMethod::sandwich,
                                   FitMethod::bayes_random_x, FitMethod::bayes_fixed_x};
    std::string kind = "continuous"; // or "discrete"
    std::uint64_t seed = 1;
    long draws = 4000;
    McmcConfig mcmc;
    int knots = 20;
    std::string min_group = "error"; // or "drop"
    std::optional<int> round_decimals;
    std::string chain_out; // optional CSV path for retained draws
};

namespace detail {

inline Dataset keep_groups(const Dataset& data, const GroupedData& grouping,
                           const std::vector<int>& dropped) {
    std::vector<bool> is_dropped(grouping.counts.size(), false);
    for (int g : dropped) is_dropped[static_cast<std::size_t>(g)] = true;
    std::vector<Eigen::Index> keep_rows;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        if (!is_dropped[static_cast<std::size_t>(grouping.row_index[static_cast<std::size_t>(i)])]) {
            keep_rows.push_back(i);
        }
    }
    Dataset out;
    out.column_names = data.column_names;
    out.X.resize(static_cast<Eigen::Index>(keep_rows.size()), data.m());
    out.y.resize(static_cast<Eigen::Index>(keep_rows.size()));
    for (std::size_t i = 0; i < keep_rows.size(); ++i) {
        out.X.row(static_cast<Eigen::Index>(i)) = data.X.row(keep_rows[i]);
        out.y[static_cast<Eigen::Index>(i)] = data.y[keep_rows[i]];
    }
    return out;
}

} // namespace detail

// The `fit` command: load the CSV, fit every requested estimator, and
// return a Table-3-shaped report (rows = methods, columns = covariates).
inline FitReport run_fit(const FitConfig& config) {
    if (config.kind != "discrete" && config.kind != "continuous") {
        throw ConfigError("--kind must be 'discrete' or 'continuous'");
    }
    if (config.min_group != "error" && config.min_group != "drop") {
        throw ConfigError("--min-group must be 'error' or 'drop'");
    }
    LoadResult loaded = load_csv(config.input, config.outcome, config.covariates);
    FitReport report;
    report.warnings = loaded.warnings;
    report.kind = config.kind;
    report.seed = config.seed;
    report.dropped_rows = loaded.dropped_rows;

    Dataset data = loaded.data;
    if (config.round_decimals.has_value()) {
        data = round_covariates(data, *config.round_decimals);
        report.warnings.push_back("covariates rounded to " +
                                  std::to_string(*config.round_decimals) + " decimal place(s)");
    }

    const bool wants_bayes =
        std::any_of(config.methods.begin(), config.methods.end(), [](FitMethod m) {
            return m != FitMethod::model_based && m != FitMethod::sandwich;
        });

    std::optional<GroupedData> grouped;
    if (config.kind == "discrete") {
        GroupedData g = group_by_covariate(data);
        const bool under_replicated =
            std::any_of(g.counts.begin(), g.counts.end(), [](long long c) { return c < 4; });
        if (under_replicated) {
            if (config.min_group == "drop") {
                std::vector<int> dropped;
                GroupedData reduced = drop_small_groups(g, 4, &dropped);
                data = detail::keep_groups(data, g, dropped);
                report.warnings.push_back(
                    "dropped " + std::to_string(dropped.size()) +
                    " covariate group(s) with fewer than 4 rows; the estimand now refers to the "
                    "reduced covariate distribution");
                grouped = group_by_covariate(data);
            } else {
                long long worst = 4;
                std::size_t worst_k = 0;
                for (std::size_t k = 0; k < g.counts.size(); ++k) {
                    if (g.counts[k] < worst) {
                        worst = g.counts[k];
                        worst_k = k;
                    }
                }
                throw InsufficientReplicationError(
                    "covariate group " + std::to_string(worst_k) + " has " +
                    std::to_string(worst) +
                    " row(s); discrete-mode inference needs at least 4 (use --min-group drop to "
                    "drop such groups)");
            }
        } else {
            grouped = std::move(g);
        }
    }
    report.n = data.n();

    // Continuous-kind spline machinery, shared across the bayes methods.
    std::optional<BasisSpec> basis;
    std::optional<SplineChain> chain;
    if (config.kind == "continuous" && wants_bayes) {
        if (data.m() != 2) {
            throw ConfigError("continuous-kind bayes methods support exactly one covariate");
        }
        basis = build_basis(data.X.col(1), config.knots);
        RngStream mcmc_rng(config.seed, 1);
        chain = mcmc_fit(data, *basis, config.mcmc, mcmc_rng);
        if (!config.chain_out.empty()) {
            std::ofstream out(config.chain_out);
            if (!out) {
                throw DataError("cannot write chain export '" + config.chain_out + "'");
            }
            out << render_chain_csv(*chain);
            report.warnings.push_back("chain draws exported to " + config.chain_out);
        }
    }

    std::optional<Eigen::VectorXd> beta_ols;
    auto ols = [&]() -> const Eigen::VectorXd& {
        if (!beta_ols.has_value()) {
            beta_ols = fit_ols(data);
        }
        return *beta_ols;
    };

    for (FitMethod m : config.methods) {
        switch (m) {
            case FitMethod::model_based:
                report.rows.push_back(fit_row_from_result(
                    make_fit_result(ols(), cov_model_based(data, ols()), "model-based"),
                    data.column_names));
                break;
            case FitMethod::sandwich:
                report.rows.push_back(fit_row_from_result(
                    make_fit_result(ols(), cov_sandwich_hc0(data, ols()), "sandwich"),
                    data.column_names));
                break;
            case FitMethod::bayes_random_x: {
                RngStream rng(config.seed, 2);
                PosteriorSummary s;
                if (config.kind == "discrete") {
                    s = posterior_beta_random_x(*grouped, config.draws, rng);
                } else {
                    s = posterior_beta_continuous(data, *basis, *chain, XMode::random_x, rng);
                }
                report.rows.push_back(fit_row_from_posterior(s, data.column_names));
                break;
            }
            case FitMethod::bayes_fixed_x: {
                PosteriorSummary s;
                if (config.kind == "discrete") {
                    s = posterior_beta_fixed_x_closed(*grouped);
                } else {
                    RngStream rng(config.seed, 3);
                    s = posterior_beta_continuous(data, *basis, *chain, XMode::fixed_x, rng);
                }
                report.rows.push_back(fit_row_from_posterior(s, data.column_names));
                break;
            }
            case FitMethod::bayes_fixed_x_mc: {
                PosteriorSummary s;
                if (config.kind == "discrete") {
                    RngStream rng(config.seed, 4);
                    s = posterior_beta_fixed_x_mc(*grouped, config.draws, rng);
                } else {
                    RngStream rng(config.seed, 3);
                    s = posterior_beta_continuous(data, *basis, *chain, XMode::fixed_x, rng);
                }
                report.rows.push_back(fit_row_from_posterior(s, data.column_names));
                break;
            }
        }
    }
    return report;
}

struct SimulateConfig {
    std::string preset;
    std::vector<std::string> scenarios;
    std::vector<std::string> methods;
    std::string x_mode = "random";
    long n = 400;
    std::optional<long> replicates;
    std::uint64_t seed = 1;
    int knots = 20;
    McmcConfig mcmc;
    int threads = 1;
    bool detail = false;
};

inline sim::StudyConfig build_study_config(const SimulateConfig& config) {
    sim::StudyConfig study;
    if (!config.preset.empty()) {
        study = sim::study_preset(config.preset);
    } else {
        if (config.x_mode != "random" && config.x_mode != "fixed") {
            throw ConfigError("--x-mode must be 'random' or 'fixed'");
        }
        study.x_mode = config.x_mode == "random" ? XMode::random_x : XMode::fixed_x;
        const std::vector<std::string> names = config.scenarios.empty()
                                                   ? std::vector<std::string>{"linear-equal",
                                                                              "linear-unequal",
                                                                              "nonlinear-equal",
                                                                              "nonlinear-unequal"}
                                                   : config.scenarios;
        for (const auto& name : names) {
            sim::ScenarioSpec spec;
            spec.n = config.n;
            if (name == "linear-equal") {
                spec.mean = sim::MeanKind::linear;
                spec.variance = sim::VarKind::equal;
            } else if (name == "linear-unequal") {
                spec.mean = sim::MeanKind::linear;
                spec.variance = sim::VarKind::unequal;
            } else if (name == "nonlinear-equal") {
                spec.mean = sim::MeanKind::nonlinear;
                spec.variance = sim::VarKind::equal;
            } else if (name == "nonlinear-unequal") {
                spec.mean = sim::MeanKind::nonlinear;
                spec.variance = sim::VarKind::unequal;
            } else {
                throw ConfigError("unknown scenario '" + name + "'");
            }
            study.scenarios.push_back(spec);
        }
    }
    if (!config.methods.empty()) {
        study.methods.clear();
        for (const auto& name : config.methods) {
            if (name == "model-based") {
                study.methods.push_back(sim::Method::model_based);
            } else if (name == "sandwich") {
                study.methods.push_back(sim::Method::sandwich);
            } else if (name == "bayes-robust") {
                study.methods.push_back(sim::Method::bayes_robust);
            } else {
                throw ConfigError("unknown simulate method '" + name +
                                  "' (expected model-based, sandwich, bayes-robust)");
            }
        }
    }
    if (config.replicates.has_value()) {
        study.r_closed = *config.replicates;
        study.r_mcmc = *config.replicates;
    }
    study.master_seed = config.seed;
    study.knots = config.knots;
    study.mcmc = config.mcmc;
    study.threads = config.threads;
    study.keep_detail = config.detail;
    return study;
}

inline sim::SimulationReport run_simulate(const SimulateConfig& config) {
    return sim::run_study(build_study_config(config));
}

// The user-runnable smoke test: exact-arithmetic checks on the saturated
// two-group dataset, covering the least-squares fit, the three covariance
// estimators, the closed-form fixed-design posterior, and the functional.
struct SelftestResult {
    std::vector<std::pair<std::string, bool>> checks;
    bool all_passed() const {
        for (const auto& c : checks) {
            if (!c.second) return false;
        }
        return true;
    }
};

inline SelftestResult run_selftest() {
    SelftestResult result;
    auto check = [&](const std::string& name, bool ok) { result.checks.emplace_back(name, ok); };
    const double tol = 1e-10;

    Eigen::VectorXd x(8), y(8);
    x << 0, 0, 0, 0, 1, 1, 1, 1;
    y << 1, 2, 3, 4, 3, 5, 7, 9;
    const Dataset data = make_dataset(x, y);

    const Eigen::VectorXd beta = fit_ols(data);
    check("ols point estimate (2.5, 3.5)",
          std::abs(beta[0] - 2.5) < tol && std::abs(beta[1] - 3.5) < tol);

    const Eigen::MatrixXd mb = cov_model_based(data, beta);
    check("model-based se(slope) = sqrt(25/12)",
          std::abs(std::sqrt(mb(1, 1)) - std::sqrt(25.0 / 12.0)) < tol);

    const Eigen::MatrixXd sw = cov_sandwich_hc0(data, beta);
    Eigen::MatrixXd sw_want(2, 2);
    sw_want << 0.3125, -0.3125, -0.3125, 1.5625;
    check("hc0 sandwich covariance matrix",
          (sw - sw_want).cwiseAbs().maxCoeff() < tol);

    const GroupedData grouped = group_by_covariate(data);
    const Eigen::MatrixXd fixed_cov = cov_sandwich_fixed_groups(grouped);
    check("fixed-design sd(slope) = 2.5", std::abs(std::sqrt(fixed_cov(1, 1)) - 2.5) < tol);
    check("fixed-design sd(intercept) = sqrt(1.25)",
          std::abs(std::sqrt(fixed_cov(0, 0)) - std::sqrt(1.25)) < tol);

    const PosteriorSummary closed = posterior_beta_fixed_x_closed(grouped);
    check("closed-form fixed-x posterior equals the grouped sandwich",
          std::abs(closed.sd[1] - std::sqrt(fixed_cov(1, 1))) < tol &&
              std::abs(closed.sd[0] - std::sqrt(fixed_cov(0, 0))) < tol &&
              std::abs(closed.beta_hat[1] - 3.5) < tol);

    Eigen::MatrixXd xi(2, 2);
    xi << 1, 0, 1, 1;
    Eigen::VectorXd phi(2);
    phi << 2.5, 6.0;
    const Eigen::VectorXd bf = beta_functional(phi, {0.5, 0.5}, xi);
    check("beta functional saturated fit", std::abs(bf[0] - 2.5) < tol && std::abs(bf[1] - 3.5) < tol);

    auto [lo, hi] = ci95(beta, sw);
    check("sandwich slope interval (1.05, 5.95)",
          std::abs(lo[1] - 1.05) < 1e-9 && std::abs(hi[1] - 5.95) < 1e-9);
    return result;
}

} // namespace robreg::cli
