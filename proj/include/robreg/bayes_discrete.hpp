#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "robreg/errors.hpp"
#include "robreg/estimators.hpp"
#include "robreg/grouping.hpp"
#include "robreg/posterior.hpp"
#include "robreg/rng.hpp"

namespace robreg {

// Posterior for a group mean under the saturated model with the
// noninformative p(phi, sigma^2) ∝ sigma^-2 prior: a Student-t located at the
// group average. scale = s_k / sqrt(n_k) with s_k^2 = SS_k/(n_k - 1) and
// df = n_k - 1, so the posterior variance is SS_k / (n_k (n_k - 3)).
// A group with zero spread degenerates to a point mass (scale 0).
struct TPosterior {
    double loc = 0.0;
    double scale = 0.0;
    double df = 0.0;

    double variance() const {
        if (scale == 0.0) return 0.0;
        if (df <= 2.0) return std::numeric_limits<double>::infinity();
        return scale * scale * df / (df - 2.0);
    }
};

inline std::vector<TPosterior> t_posteriors(const GroupedData& grouped) {
    std::vector<TPosterior> out(static_cast<std::size_t>(grouped.k()));
    for (Eigen::Index k = 0; k < grouped.k(); ++k) {
        const double nk = static_cast<double>(grouped.counts[static_cast<std::size_t>(k)]);
        TPosterior t;
        t.loc = grouped.group_mean[k];
        t.df = nk - 1.0;
        t.scale = grouped.group_ss[k] > 0.0
                      ? std::sqrt(grouped.group_ss[k] / ((nk - 1.0) * nk))
                      : 0.0;
        out[static_cast<std::size_t>(k)] = t;
    }
    return out;
}

// One draw of the covariate weights: Dirichlet(n_1, ..., n_K).
inline std::vector<double> draw_posterior_lambda(RngStream& rng, const GroupedData& grouped) {
    return sample_dirichlet_counts(rng, grouped.counts);
}

// One joint draw of the group means (independent across groups).
inline Eigen::VectorXd draw_posterior_phi(RngStream& rng, const std::vector<TPosterior>& tpost) {
    Eigen::VectorXd phi(static_cast<Eigen::Index>(tpost.size()));
    for (std::size_t k = 0; k < tpost.size(); ++k) {
        const TPosterior& t = tpost[k];
        if (t.df < 1.0) {
            throw InvalidParameterError("posterior t draw needs df >= 1");
        }
        phi[static_cast<Eigen::Index>(k)] =
            t.scale == 0.0 ? t.loc : sample_student_t(rng, t.df, t.loc, t.scale);
    }
    return phi;
}

// The least-squares linear summary of (phi, lambda): the minimizer of
// sum_k lambda_k (phi_k - xi_k beta)^2, i.e. weighted least squares over the
// covariate atoms. Weights are normalized first, so only their ratios matter.
inline Eigen::VectorXd beta_functional(const Eigen::VectorXd& phi,
                                       const std::vector<double>& lambda,
                                       const Eigen::MatrixXd& xi,
                                       double cond_threshold = kDefaultConditionThreshold) {
    const Eigen::Index K = xi.rows();
    if (phi.size() != K || static_cast<Eigen::Index>(lambda.size()) != K) {
        throw InvalidParameterError("beta_functional: phi/lambda/xi size mismatch");
    }
    double total = 0.0;
    for (double w : lambda) {
        if (!(w >= 0.0)) {
            throw InvalidParameterError("beta_functional: weights must be non-negative");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        throw InvalidParameterError("beta_functional: weights sum to zero");
    }
    Eigen::MatrixXd sw_xi(K, xi.cols());
    Eigen::VectorXd sw_phi(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double sw = std::sqrt(lambda[static_cast<std::size_t>(k)] / total);
        sw_xi.row(k) = sw * xi.row(k);
        sw_phi[k] = sw * phi[k];
    }
    detail::GatedQr qr(sw_xi, cond_threshold);
    return qr.solve(sw_phi);
}

namespace detail {

inline void require_min_replication(const GroupedData& grouped, long long min_count = 4) {
    for (std::size_t k = 0; k < grouped.counts.size(); ++k) {
        if (grouped.counts[k] < min_count) {
            throw InsufficientReplicationError(
                "group " + std::to_string(k) + " has " + std::to_string(grouped.counts[k]) +
                " rows; posterior inference needs at least " + std::to_string(min_count));
        }
    }
}

// A = (Xi^t W Xi)^-1 Xi^t W for W = diag(weights); rows of A map group-level
// values to coefficients.
inline Eigen::MatrixXd atom_projection(const GroupedData& grouped,
                                       const Eigen::VectorXd& weights,
                                       double cond_threshold) {
    const Eigen::Index K = grouped.k();
    Eigen::MatrixXd sw_xi(K, grouped.m());
    Eigen::MatrixXd sw_diag = Eigen::MatrixXd::Zero(K, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double sw = std::sqrt(weights[k]);
        sw_xi.row(k) = sw * grouped.xi.row(k);
        sw_diag(k, k) = sw;
    }
    GatedQr qr(sw_xi, cond_threshold, &grouped.column_names);
    return qr.solve(sw_diag);
}

} // namespace detail

// Monte Carlo posterior for beta with random covariate sampling: joint draws
// of (lambda, phi) pushed through the least-squares functional.
inline PosteriorSummary posterior_beta_random_x(const GroupedData& grouped, long n_draws,
                                                RngStream& rng,
                                                double cond_threshold = kDefaultConditionThreshold) {
    detail::require_min_replication(grouped);
    if (n_draws < 100) {
        throw InvalidParameterError("posterior_beta_random_x needs at least 100 draws");
    }
    const auto tpost = t_posteriors(grouped);
    Eigen::MatrixXd draws(n_draws, grouped.m());
    for (long d = 0; d < n_draws; ++d) {
        const auto lambda = draw_posterior_lambda(rng, grouped);
        const Eigen::VectorXd phi = draw_posterior_phi(rng, tpost);
        draws.row(d) = beta_functional(phi, lambda, grouped.xi, cond_threshold).transpose();
    }
    return detail::summarize_draws(draws, "bayes-random-x");
}

// Fixed-design posterior in closed form: point estimate is the least-squares
// fit; covariance is A diag(Var phi_k) A^t with A the empirical-weight
// projection and Var phi_k = SS_k / (n_k (n_k - 3)).
inline PosteriorSummary posterior_beta_fixed_x_closed(const GroupedData& grouped,
                                                      double cond_threshold = kDefaultConditionThreshold) {
    detail::require_min_replication(grouped);
    const Eigen::Index K = grouped.k();
    const double n = static_cast<double>(grouped.n());
    Eigen::VectorXd weights(K);
    Eigen::VectorXd var_phi(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double nk = static_cast<double>(grouped.counts[static_cast<std::size_t>(k)]);
        weights[k] = nk / n;
        var_phi[k] = grouped.group_ss[k] / (nk * (nk - 3.0));
    }
    const Eigen::MatrixXd A = detail::atom_projection(grouped, weights, cond_threshold);
    PosteriorSummary s;
    s.method = "bayes-fixed-x-closed";
    s.n_draws = 0;
    s.beta_hat = A * grouped.group_mean;
    const Eigen::MatrixXd cov =
        detail::symmetrize(A * var_phi.asDiagonal() * A.transpose());
    s.sd.resize(grouped.m());
    for (Eigen::Index j = 0; j < grouped.m(); ++j) {
        s.sd[j] = std::sqrt(std::max(0.0, cov(j, j)));
    }
    s.ci_low = s.beta_hat - kIntervalMultiplier * s.sd;
    s.ci_high = s.beta_hat + kIntervalMultiplier * s.sd;
    s.mc_se_sd = Eigen::VectorXd::Zero(grouped.m());
    return s;
}

// Covariance of the closed-form fixed-design posterior, exposed for identity
// checks against the grouped sandwich form.
inline Eigen::MatrixXd posterior_beta_fixed_x_closed_cov(const GroupedData& grouped,
                                                         double cond_threshold = kDefaultConditionThreshold) {
    detail::require_min_replication(grouped);
    const Eigen::Index K = grouped.k();
    const double n = static_cast<double>(grouped.n());
    Eigen::VectorXd weights(K);
    Eigen::VectorXd var_phi(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double nk = static_cast<double>(grouped.counts[static_cast<std::size_t>(k)]);
        weights[k] = nk / n;
        var_phi[k] = grouped.group_ss[k] / (nk * (nk - 3.0));
    }
    const Eigen::MatrixXd A = detail::atom_projection(grouped, weights, cond_threshold);
    return detail::symmetrize(A * var_phi.asDiagonal() * A.transpose());
}

// Monte Carlo version of the fixed-design posterior: phi is drawn, lambda is
// pinned at the empirical weights. Converges to the closed form.
inline PosteriorSummary posterior_beta_fixed_x_mc(const GroupedData& grouped, long n_draws,
                                                  RngStream& rng,
                                                  double cond_threshold = kDefaultConditionThreshold) {
    detail::require_min_replication(grouped);
    if (n_draws < 100) {
        throw InvalidParameterError("posterior_beta_fixed_x_mc needs at least 100 draws");
    }
    const auto tpost = t_posteriors(grouped);
    const double n = static_cast<double>(grouped.n());
    std::vector<double> weights(static_cast<std::size_t>(grouped.k()));
    for (std::size_t k = 0; k < weights.size(); ++k) {
        weights[k] = static_cast<double>(grouped.counts[k]) / n;
    }
    Eigen::MatrixXd draws(n_draws, grouped.m());
    for (long d = 0; d < n_draws; ++d) {
        const Eigen::VectorXd phi = draw_posterior_phi(rng, tpost);
        draws.row(d) = beta_functional(phi, weights, grouped.xi, cond_threshold).transpose();
    }
    auto s = detail::summarize_draws(draws, "bayes-fixed-x-mc");
    return s;
}

} // namespace robreg
