#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "robreg/posterior.hpp"
#include "robreg/simulate.hpp"

namespace robreg {

// One fitted-method row of a fit report (Table-3 shape: rows are methods,
// columns are (estimate, se) per covariate).
struct FitRow {
    std::string method;
    std::vector<std::string> names;
    std::vector<double> estimate;
    std::vector<double> se;
    std::vector<double> ci_low;
    std::vector<double> ci_high;
    long n_draws = 0;
    std::vector<double> mc_se_sd;
    long rejected_draws = 0;
};

struct FitReport {
    std::vector<FitRow> rows;
    std::vector<std::string> warnings;
    long n = 0;
    long dropped_rows = 0;
    std::string kind;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

} // namespace detail

inline FitRow fit_row_from_result(const FitResult& fr, const std::vector<std::string>& names) {
    FitRow row;
    row.method = fr.method;
    row.names = names;
    for (Eigen::Index j = 0; j < fr.beta.size(); ++j) {
        row.estimate.push_back(fr.beta[j]);
        row.se.push_back(fr.se[j]);
        row.ci_low.push_back(fr.ci_low[j]);
        row.ci_high.push_back(fr.ci_high[j]);
    }
    return row;
}

inline FitRow fit_row_from_posterior(const PosteriorSummary& s,
                                     const std::vector<std::string>& names) {
    FitRow row;
    row.method = s.method;
    row.names = names;
    for (Eigen::Index j = 0; j < s.beta_hat.size(); ++j) {
        row.estimate.push_back(s.beta_hat[j]);
        row.se.push_back(s.sd[j]);
        row.ci_low.push_back(s.ci_low[j]);
        row.ci_high.push_back(s.ci_high[j]);
        row.mc_se_sd.push_back(s.mc_se_sd.size() > j ? s.mc_se_sd[j] : 0.0);
    }
    row.n_draws = s.n_draws;
    row.rejected_draws = s.rejected_draws;
    return row;
}

inline std::string render_fit_text(const FitReport& report) {
    std::string out;
    out += "n = " + std::to_string(report.n);
    if (report.dropped_rows > 0) {
        out += " (dropped " + std::to_string(report.dropped_rows) + ")";
    }
    out += ", kind = " + report.kind + ", seed = " + std::to_string(report.seed) + "\n";
    if (report.rows.empty()) {
        out += "(no methods requested)\n";
        return out;
    }
    const auto& names = report.rows.front().names;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-22s", "method");
    out += buf;
    for (const auto& name : names) {
        std::snprintf(buf, sizeof(buf), " %14s %12s", ("beta[" + name + "]").c_str(),
                      ("se[" + name + "]").c_str());
        out += buf;
    }
    out += "\n";
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%-22s", row.method.c_str());
        out += buf;
        for (std::size_t j = 0; j < row.estimate.size(); ++j) {
            std::snprintf(buf, sizeof(buf), " %14.4f %12.4f", row.estimate[j], row.se[j]);
            out += buf;
        }
        out += "\n";
    }
    for (const auto& w : report.warnings) {
        out += "warning: " + w + "\n";
    }
    return out;
}

inline nlohmann::ordered_json fit_report_json(const FitReport& report) {
    nlohmann::ordered_json j;
    j["command"] = "fit";
    j["n"] = report.n;
    j["dropped_rows"] = report.dropped_rows;
    j["kind"] = report.kind;
    j["seed"] = report.seed;
    j["warnings"] = report.warnings;
    j["results"] = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) {
        nlohmann::ordered_json r;
        r["method"] = row.method;
        r["coefficients"] = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < row.estimate.size(); ++k) {
            nlohmann::ordered_json c;
            c["name"] = row.names[k];
            c["estimate"] = row.estimate[k];
            c["se"] = row.se[k];
            c["ci_low"] = row.ci_low[k];
            c["ci_high"] = row.ci_high[k];
            if (!row.mc_se_sd.empty()) {
                c["mc_se_sd"] = row.mc_se_sd[k];
            }
            r["coefficients"].push_back(std::move(c));
        }
        r["n_draws"] = row.n_draws;
        r["rejected_draws"] = row.rejected_draws;
        j["results"].push_back(std::move(r));
    }
    return j;
}

inline std::string render_fit_json(const FitReport& report) {
    return fit_report_json(report).dump(2) + "\n";
}

inline std::string render_sim_text(const sim::SimulationReport& report) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-20s %-14s %5s %9s %8s %9s %9s %5s %5s\n", "scenario",
                  "method", "n", "bias", "width", "coverage", "cov-mcse", "R", "excl");
    out += buf;
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%-20s %-14s %5ld %+9.3f %8.3f %9.3f %9.3f %5ld %5ld\n",
                      r.scenario.c_str(), r.method.c_str(), r.n, r.bias, r.mean_width, r.coverage,
                      r.coverage_mc_se, r.replicates, r.excluded);
        out += buf;
    }
    if (report.rows.empty()) {
        out += "(no rows)\n";
    }
    return out;
}

inline nlohmann::ordered_json sim_report_json(const sim::SimulationReport& report,
                                              bool include_detail) {
    nlohmann::ordered_json j;
    j["command"] = "simulate";
    j["seed"] = report.master_seed;
    j["x_mode"] = report.x_mode;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json row;
        row["scenario"] = r.scenario;
        row["method"] = r.method;
        row["n"] = r.n;
        row["replicates"] = r.replicates;
        row["used"] = r.used;
        row["excluded"] = r.excluded;
        row["bias"] = r.bias;
        row["mean_width"] = r.mean_width;
        row["coverage"] = r.coverage;
        row["coverage_mc_se"] = r.coverage_mc_se;
        j["rows"].push_back(std::move(row));
    }
    if (include_detail) {
        j["detail"] = nlohmann::ordered_json::array();
        for (const auto& d : report.detail) {
            nlohmann::ordered_json row;
            row["scenario"] = d.scenario;
            row["method"] = d.method;
            row["replicate"] = d.replicate;
            if (d.error.empty()) {
                row["slope_est"] = d.slope_est;
                row["slope_se"] = d.slope_se;
                row["slope_target"] = d.slope_target;
                row["hit"] = d.hit;
                row["intercept_est"] = d.intercept_est;
                row["intercept_se"] = d.intercept_se;
                row["intercept_target"] = d.intercept_target;
                row["intercept_hit"] = d.intercept_hit;
            } else {
                row["error"] = d.error;
            }
            j["detail"].push_back(std::move(row));
        }
    }
    return j;
}

inline std::string render_sim_json(const sim::SimulationReport& report, bool include_detail) {
    return sim_report_json(report, include_detail).dump(2) + "\n";
}

// Flat CSV of retained draws for external diagnostics.
inline std::string render_chain_csv(const SplineChain& chain) {
    std::string out = "draw";
    const auto mean_cols = chain.mean_coefs.cols();
    const auto sd_cols = chain.logsd_coefs.cols();
    out += ",alpha0,alpha1";
    for (int q = 1; q <= chain.q; ++q) out += ",a" + std::to_string(q);
    out += ",gamma0";
    if (sd_cols > 1) {
        out += ",gamma1";
        for (int q = 1; q <= chain.q; ++q) out += ",b" + std::to_string(q);
    }
    out += ",sigma_a2,log_post\n";
    char buf[64];
    for (long d = 0; d < chain.retained(); ++d) {
        out += std::to_string(d);
        for (Eigen::Index j = 0; j < mean_cols; ++j) {
            std::snprintf(buf, sizeof(buf), ",%.17g", chain.mean_coefs(d, j));
            out += buf;
        }
        for (Eigen::Index j = 0; j < sd_cols; ++j) {
            std::snprintf(buf, sizeof(buf), ",%.17g", chain.logsd_coefs(d, j));
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), ",%.17g", chain.sigma_a2[d]);
        out += buf;
        std::snprintf(buf, sizeof(buf), ",%.17g", chain.log_post[d]);
        out += buf;
        out += "\n";
    }
    return out;
}

} // namespace robreg
