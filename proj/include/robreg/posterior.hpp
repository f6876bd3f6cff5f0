#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>

#include "robreg/estimators.hpp"

namespace robreg {

// Moment summary of a posterior sample (or of a closed form, n_draws == 0).
struct PosteriorSummary {
    Eigen::VectorXd beta_hat;
    Eigen::VectorXd sd;
    Eigen::VectorXd ci_low;
    Eigen::VectorXd ci_high;
    long n_draws = 0;
    std::string method;
    // Jackknife (over draw blocks) standard error of each sd entry; zero for
    // closed forms. Surfaced so users see the Monte Carlo noise they bought.
    Eigen::VectorXd mc_se_sd;
    long rejected_draws = 0;
};

namespace detail {

inline Eigen::VectorXd jackknife_sd_se(const Eigen::MatrixXd& draws, int blocks = 20) {
    const Eigen::Index n = draws.rows();
    const Eigen::Index m = draws.cols();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    if (n < 2 * blocks || blocks < 2) {
        return out;
    }
    const Eigen::Index block_len = n / blocks;
    const Eigen::Index used = block_len * blocks;
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto col = draws.col(j).head(used);
        const double total_sum = col.sum();
        const double total_sq = col.squaredNorm();
        Eigen::VectorXd loo(blocks);
        for (int b = 0; b < blocks; ++b) {
            const auto seg = col.segment(b * block_len, block_len);
            const double s = total_sum - seg.sum();
            const double q = total_sq - seg.squaredNorm();
            const double cnt = static_cast<double>(used - block_len);
            const double var = (q - s * s / cnt) / (cnt - 1.0);
            loo[b] = std::sqrt(std::max(0.0, var));
        }
        const double mean_loo = loo.mean();
        const double ss = (loo.array() - mean_loo).square().sum();
        out[j] = std::sqrt(ss * (blocks - 1.0) / blocks);
    }
    return out;
}

inline PosteriorSummary summarize_draws(const Eigen::MatrixXd& draws, std::string method) {
    const Eigen::Index n = draws.rows();
    const Eigen::Index m = draws.cols();
    PosteriorSummary s;
    s.method = std::move(method);
    s.n_draws = static_cast<long>(n);
    s.beta_hat.resize(m);
    s.sd.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        // Shifted two-pass moments: a constant column yields sd exactly 0.
        const double shift = draws(0, j);
        const Eigen::ArrayXd centered = draws.col(j).array() - shift;
        const double mean_c = centered.mean();
        s.beta_hat[j] = shift + mean_c;
        const double var = (centered - mean_c).square().sum() / static_cast<double>(n - 1);
        s.sd[j] = std::sqrt(std::max(0.0, var));
    }
    s.ci_low = s.beta_hat - kIntervalMultiplier * s.sd;
    s.ci_high = s.beta_hat + kIntervalMultiplier * s.sd;
    s.mc_se_sd = jackknife_sd_se(draws);
    return s;
}

} // namespace detail

} // namespace robreg
