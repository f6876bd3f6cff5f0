#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "robreg/bayes_continuous.hpp"
#include "robreg/dataset.hpp"
#include "robreg/errors.hpp"
#include "robreg/estimators.hpp"
#include "robreg/integrate.hpp"
#include "robreg/rng.hpp"
#include "robreg/spline_basis.hpp"
#include "robreg/spline_mcmc.hpp"
#include "robreg/thread_pool.hpp"

namespace robreg::sim {

enum class MeanKind { linear, nonlinear };
enum class VarKind { equal, unequal };
enum class XDesign { random_uniform, fixed_reuse };
enum class Method { model_based, sandwich, bayes_robust };

inline const char* to_string(MeanKind k) { return k == MeanKind::linear ? "linear" : "nonlinear"; }
inline const char* to_string(VarKind k) { return k == VarKind::equal ? "equal" : "unequal"; }
inline const char* to_string(Method m) {
    switch (m) {
        case Method::model_based: return "model-based";
        case Method::sandwich: return "sandwich";
        default: return "bayes-robust";
    }
}

inline double mean_value(MeanKind kind, double x) {
    if (kind == MeanKind::linear) {
        return 2.0 + 3.5 * x;
    }
    return 2.0 + 3.5 * x * (1.0 + std::abs(std::cos(0.5 * x - 2.0)));
}

// Spread of the noise at x: constant 5 in the equal-variance scenario,
// 5 + x^2/5 in the unequal one (so 5 at the center, 25 at the edges).
inline double noise_sd(VarKind kind, double x) {
    if (kind == VarKind::equal) {
        return 5.0;
    }
    return 5.0 + x * x / 5.0;
}

struct ScenarioSpec {
    MeanKind mean = MeanKind::linear;
    VarKind variance = VarKind::equal;
    long n = 400;
    XDesign x_design = XDesign::random_uniform;
    double x_lo = -10.0;
    double x_hi = 10.0;
    double noise_scale = 1.0; // tests may zero the noise channel

    std::string label() const {
        return std::string(to_string(mean)) + "/" + to_string(variance);
    }
};

inline void validate_scenario(const ScenarioSpec& spec) {
    if (spec.n < 50) {
        throw ConfigError("scenario sample size must be at least 50");
    }
    if (!(spec.x_hi > spec.x_lo)) {
        throw ConfigError("scenario covariate range is degenerate");
    }
}

inline Eigen::VectorXd scenario_x(RngStream& rng, const ScenarioSpec& spec) {
    validate_scenario(spec);
    Eigen::VectorXd x(spec.n);
    for (long i = 0; i < spec.n; ++i) {
        x[i] = rng.uniform(spec.x_lo, spec.x_hi);
    }
    return x;
}

inline Dataset scenario_dataset_from_x(const Eigen::VectorXd& x, RngStream& noise_rng,
                                       const ScenarioSpec& spec) {
    Eigen::VectorXd y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double sd = spec.noise_scale * noise_sd(spec.variance, x[i]);
        y[i] = mean_value(spec.mean, x[i]) + sd * sample_standard_normal(noise_rng);
    }
    return make_dataset(x, y);
}

inline Dataset gen_dataset(RngStream& rng, const ScenarioSpec& spec) {
    const Eigen::VectorXd x = scenario_x(rng, spec);
    return scenario_dataset_from_x(x, rng, spec);
}

namespace detail {

// Kinks of |cos(x/2 - 2)| inside (lo, hi): x = 4 + pi + 2 pi k.
inline std::vector<double> nonlinear_kinks(double lo, double hi) {
    std::vector<double> out;
    const double pi = 3.14159265358979323846;
    const double base = 4.0 + pi;
    const double k0 = std::ceil((lo - base) / (2.0 * pi));
    for (double k = k0;; k += 1.0) {
        const double x = base + 2.0 * pi * k;
        if (x >= hi) break;
        if (x > lo) out.push_back(x);
    }
    return out;
}

} // namespace detail

// Population least-squares line against the uniform covariate density:
// slope = Cov(x, f(x)) / Var(x), intercept = E f - slope E x, both computed
// by adaptive quadrature on the smooth pieces.
inline Eigen::Vector2d population_beta(MeanKind kind, double lo = -10.0, double hi = 10.0) {
    if (kind == MeanKind::linear) {
        return {2.0, 3.5};
    }
    const double len = hi - lo;
    const double mu_x = 0.5 * (lo + hi);
    const double var_x = len * len / 12.0;
    const auto kinks = detail::nonlinear_kinks(lo, hi);
    const auto f = [&](double x) { return mean_value(kind, x); };
    const auto xf = [&](double x) { return x * mean_value(kind, x); };
    const double mean_f = integrate(f, lo, hi, 1e-10, kinks) / len;
    const double mean_xf = integrate(xf, lo, hi, 1e-10, kinks) / len;
    const double slope = (mean_xf - mu_x * mean_f) / var_x;
    return {mean_f - slope * mu_x, slope};
}

// Least-squares line through (x_i, f(x_i)) with uniform weights: the
// fixed-design target for one realized covariate vector.
inline Eigen::Vector2d fixed_design_beta(const Eigen::VectorXd& x, MeanKind kind) {
    const Eigen::Index n = x.size();
    const double xbar = x.mean();
    double fbar = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) fbar += mean_value(kind, x[i]);
    fbar /= static_cast<double>(n);
    double sxx = 0.0, sxf = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dx = x[i] - xbar;
        sxx += dx * dx;
        sxf += dx * (mean_value(kind, x[i]) - fbar);
    }
    if (!(sxx > 0.0)) {
        throw SingularDesignError("realized design has no covariate spread");
    }
    const double slope = sxf / sxx;
    return {fbar - slope * xbar, slope};
}

// Slope target of a scenario. Random-x scoring uses the population value; the
// fixed-x target depends on the realized design, which the caller passes in.
inline double true_beta(const ScenarioSpec& spec, const Eigen::VectorXd* realized_x = nullptr) {
    if (realized_x != nullptr) {
        return fixed_design_beta(*realized_x, spec.mean)[1];
    }
    return population_beta(spec.mean, spec.x_lo, spec.x_hi)[1];
}

struct StudyConfig {
    std::vector<ScenarioSpec> scenarios;
    std::vector<Method> methods{Method::model_based, Method::sandwich, Method::bayes_robust};
    XMode x_mode = XMode::random_x;
    long r_closed = 500; // replicates for the closed-form methods
    long r_mcmc = 200;   // replicates for the spline-MCMC method
    std::uint64_t master_seed = 1;
    int knots = 20;
    McmcConfig mcmc;
    int threads = 1;
    bool keep_detail = false;
    double max_failure_rate = 0.01;

    long replicates_for(Method m) const {
        return m == Method::bayes_robust ? r_mcmc : r_closed;
    }
};

struct ReportRow {
    std::string scenario;
    std::string method;
    long n = 0;
    long replicates = 0; // requested
    long used = 0;       // succeeded
    long excluded = 0;
    double bias = 0.0;
    double mean_width = 0.0;
    double coverage = 0.0;
    double coverage_mc_se = 0.0;
};

struct ReplicateDetail {
    std::string scenario;
    std::string method;
    long replicate = 0;
    double slope_est = 0.0, slope_se = 0.0, slope_lo = 0.0, slope_hi = 0.0;
    double slope_target = 0.0;
    bool hit = false;
    double intercept_est = 0.0, intercept_se = 0.0;
    double intercept_target = 0.0;
    bool intercept_hit = false;
    std::string error;
};

struct SimulationReport {
    std::vector<ReportRow> rows;
    std::vector<ReplicateDetail> detail;
    std::uint64_t master_seed = 0;
    std::string x_mode;
};

namespace detail {

// Stream purposes, packed with the scenario and replicate indices into the
// 64-bit stream id so every (scenario, replicate, purpose) triple gets an
// independent stream no matter how work is scheduled.
enum StreamPurpose : std::uint64_t {
    kStreamX = 0,
    kStreamNoise = 1,
    kStreamMcmc = 2,
    kStreamBeta = 3,
};

inline std::uint64_t pack_stream(std::uint64_t scenario, std::uint64_t purpose,
                                 std::uint64_t replicate) {
    return (scenario << 48) | (purpose << 40) | replicate;
}

constexpr std::uint64_t kFixedDesignReplicate = (1ULL << 40) - 1;

struct MethodOutcome {
    bool attempted = false;
    bool ok = false;
    double est[2] = {0.0, 0.0};
    double se[2] = {0.0, 0.0};
    double lo[2] = {0.0, 0.0};
    double hi[2] = {0.0, 0.0};
    std::string error;
};

struct ReplicateOutcome {
    double target_slope = 0.0;
    double target_intercept = 0.0;
    std::vector<MethodOutcome> by_method;
    std::string data_error;
};

} // namespace detail

// Runs the scenario grid: per replicate, generate data, fit every requested
// method, score slope intervals against the scenario target, and aggregate
// bias / mean width / coverage per (scenario, method) cell. Replicates run
// concurrently; results land in indexed slots so the report is bit-identical
// for any thread count.
inline SimulationReport run_study(const StudyConfig& config) {
    SimulationReport report;
    report.master_seed = config.master_seed;
    report.x_mode = to_string(config.x_mode);
    if (config.scenarios.empty() || config.methods.empty()) {
        return report;
    }
    for (const auto& spec : config.scenarios) {
        validate_scenario(spec);
    }

    const auto n_methods = config.methods.size();
    for (std::size_t si = 0; si < config.scenarios.size(); ++si) {
        const ScenarioSpec& spec = config.scenarios[si];
        long r_max = 0;
        for (Method m : config.methods) {
            r_max = std::max(r_max, config.replicates_for(m));
        }
        if (r_max == 0) {
            continue;
        }

        const Eigen::Vector2d pop_beta = population_beta(spec.mean, spec.x_lo, spec.x_hi);
        std::optional<Eigen::VectorXd> shared_x;
        if (spec.x_design == XDesign::fixed_reuse) {
            RngStream xr(config.master_seed,
                         detail::pack_stream(si, detail::kStreamX, detail::kFixedDesignReplicate));
            shared_x = scenario_x(xr, spec);
        }

        std::vector<detail::ReplicateOutcome> slots(static_cast<std::size_t>(r_max));

        parallel_for_indexed(r_max, config.threads, [&](long r) {
            auto& slot = slots[static_cast<std::size_t>(r)];
            slot.by_method.resize(n_methods);
            try {
                const auto rep = static_cast<std::uint64_t>(r);
                Eigen::VectorXd x;
                if (shared_x.has_value()) {
                    x = *shared_x;
                } else {
                    RngStream xr(config.master_seed, detail::pack_stream(si, detail::kStreamX, rep));
                    x = scenario_x(xr, spec);
                }
                RngStream noise(config.master_seed,
                                detail::pack_stream(si, detail::kStreamNoise, rep));
                const Dataset data = scenario_dataset_from_x(x, noise, spec);

                if (config.x_mode == XMode::fixed_x) {
                    const Eigen::Vector2d t = fixed_design_beta(x, spec.mean);
                    slot.target_intercept = t[0];
                    slot.target_slope = t[1];
                } else {
                    slot.target_intercept = pop_beta[0];
                    slot.target_slope = pop_beta[1];
                }

                bool need_ols = false;
                for (std::size_t mi = 0; mi < n_methods; ++mi) {
                    const Method m = config.methods[mi];
                    if (m != Method::bayes_robust && r < config.replicates_for(m)) {
                        need_ols = true;
                    }
                }
                Eigen::VectorXd beta_ols;
                if (need_ols) {
                    beta_ols = fit_ols(data);
                }

                for (std::size_t mi = 0; mi < n_methods; ++mi) {
                    const Method m = config.methods[mi];
                    if (r >= config.replicates_for(m)) {
                        continue;
                    }
                    auto& out = slot.by_method[mi];
                    out.attempted = true;
                    try {
                        if (m == Method::bayes_robust) {
                            const BasisSpec basis =
                                build_basis(x, config.knots, spec.x_lo, spec.x_hi);
                            RngStream mcmc_rng(config.master_seed,
                                               detail::pack_stream(si, detail::kStreamMcmc, rep));
                            const SplineChain chain = mcmc_fit(data, basis, config.mcmc, mcmc_rng);
                            RngStream beta_rng(config.master_seed,
                                               detail::pack_stream(si, detail::kStreamBeta, rep));
                            const PosteriorSummary s = posterior_beta_continuous(
                                data, basis, chain, config.x_mode, beta_rng);
                            for (int j = 0; j < 2; ++j) {
                                out.est[j] = s.beta_hat[j];
                                out.se[j] = s.sd[j];
                                out.lo[j] = s.ci_low[j];
                                out.hi[j] = s.ci_high[j];
                            }
                        } else {
                            const Eigen::MatrixXd cov = m == Method::model_based
                                                            ? cov_model_based(data, beta_ols)
                                                            : cov_sandwich_hc0(data, beta_ols);
                            const FitResult fr = make_fit_result(beta_ols, cov, to_string(m));
                            for (int j = 0; j < 2; ++j) {
                                out.est[j] = fr.beta[j];
                                out.se[j] = fr.se[j];
                                out.lo[j] = fr.ci_low[j];
                                out.hi[j] = fr.ci_high[j];
                            }
                        }
                        out.ok = true;
                    } catch (const std::exception& e) {
                        out.error = e.what();
                    }
                }
            } catch (const std::exception& e) {
                slot.data_error = e.what();
            }
        });

        // Sequential aggregation in replicate order.
        for (std::size_t mi = 0; mi < n_methods; ++mi) {
            const Method m = config.methods[mi];
            const long r_method = config.replicates_for(m);
            if (r_method == 0) {
                continue;
            }
            ReportRow row;
            row.scenario = spec.label();
            row.method = to_string(m);
            row.n = spec.n;
            row.replicates = r_method;
            double bias_sum = 0.0, width_sum = 0.0;
            long hits = 0;
            for (long r = 0; r < r_method; ++r) {
                const auto& slot = slots[static_cast<std::size_t>(r)];
                const auto& out = slot.by_method[mi];
                const bool ok = out.attempted && out.ok && slot.data_error.empty();
                if (ok) {
                    ++row.used;
                    bias_sum += out.est[1] - slot.target_slope;
                    width_sum += out.hi[1] - out.lo[1];
                    const bool hit =
                        out.lo[1] <= slot.target_slope && slot.target_slope <= out.hi[1];
                    if (hit) ++hits;
                }
                if (config.keep_detail) {
                    ReplicateDetail rd;
                    rd.scenario = row.scenario;
                    rd.method = row.method;
                    rd.replicate = r;
                    rd.slope_target = slot.target_slope;
                    rd.intercept_target = slot.target_intercept;
                    if (ok) {
                        rd.slope_est = out.est[1];
                        rd.slope_se = out.se[1];
                        rd.slope_lo = out.lo[1];
                        rd.slope_hi = out.hi[1];
                        rd.hit = out.lo[1] <= slot.target_slope && slot.target_slope <= out.hi[1];
                        rd.intercept_est = out.est[0];
                        rd.intercept_se = out.se[0];
                        rd.intercept_hit =
                            out.lo[0] <= slot.target_intercept && slot.target_intercept <= out.hi[0];
                    } else {
                        rd.error = !slot.data_error.empty() ? slot.data_error : out.error;
                    }
                    report.detail.push_back(std::move(rd));
                }
            }
            row.excluded = r_method - row.used;
            if (static_cast<double>(row.excluded) >
                config.max_failure_rate * static_cast<double>(r_method)) {
                throw NumericalFailureError(
                    "estimator failure rate above threshold in cell " + row.scenario + " / " +
                    row.method + " (" + std::to_string(row.excluded) + " of " +
                    std::to_string(r_method) + ")");
            }
            if (row.used > 0) {
                row.bias = bias_sum / static_cast<double>(row.used);
                row.mean_width = width_sum / static_cast<double>(row.used);
                row.coverage = static_cast<double>(hits) / static_cast<double>(row.used);
                row.coverage_mc_se = std::sqrt(row.coverage * (1.0 - row.coverage) /
                                               static_cast<double>(row.used));
            }
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

// Named study presets. Desk scale keeps closed-form methods at 500
// replicates and the spline method at 200; full scale runs everything at
// 1000 replicates for n in {400, 800}.
inline StudyConfig study_preset(const std::string& name) {
    StudyConfig config;
    const auto all_scenarios = [](long n) {
        return std::vector<ScenarioSpec>{
            {MeanKind::linear, VarKind::equal, n},
            {MeanKind::linear, VarKind::unequal, n},
            {MeanKind::nonlinear, VarKind::equal, n},
            {MeanKind::nonlinear, VarKind::unequal, n},
        };
    };
    if (name == "table1-desk" || name == "table2-desk") {
        config.scenarios = all_scenarios(400);
        config.x_mode = name == "table1-desk" ? XMode::random_x : XMode::fixed_x;
        config.r_closed = 500;
        config.r_mcmc = 200;
    } else if (name == "table1-full" || name == "table2-full") {
        config.scenarios = all_scenarios(400);
        const auto more = all_scenarios(800);
        config.scenarios.insert(config.scenarios.end(), more.begin(), more.end());
        config.x_mode = name == "table1-full" ? XMode::random_x : XMode::fixed_x;
        config.r_closed = 1000;
        config.r_mcmc = 1000;
    } else {
        throw ConfigError("unknown preset '" + name +
                          "' (expected table1-desk, table2-desk, table1-full, table2-full)");
    }
    return config;
}

} // namespace robreg::sim
