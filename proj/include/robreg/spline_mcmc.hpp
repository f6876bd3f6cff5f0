#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "robreg/dataset.hpp"
#include "robreg/errors.hpp"
#include "robreg/rng.hpp"
#include "robreg/spline_basis.hpp"

namespace robreg {

struct McmcConfig {
    long iterations = 6000;
    long burnin = 2000;
    long thin = 1;
    // Log-SD block: when false the noise level is a single unknown constant
    // (gamma_0 only); when true it gets the same linear + spline expansion as
    // the mean.
    bool heteroscedastic = true;
    double target_accept = 0.35;
    double alpha_prior_var = 1e6;  // intercept and slope of the mean
    double gamma_prior_var = 1e6;  // intercept and slope of the log-SD
    double b_prior_var = 0.1;      // log-SD spline coefficients
    double sigma_a_shape = 0.1;    // Gamma hyperprior on 1/sigma_a^2
    double sigma_a_rate = 0.1;
    double logsd_bound = 50.0;     // proposals pushing |log sd| past this are rejected

    // Known-variance fits: pin the log-SD coefficients (and optionally the
    // spline ridge variance) instead of sampling them.
    std::optional<Eigen::VectorXd> fixed_logsd;
    std::optional<double> fixed_sigma_a2;

    long retained() const {
        if (iterations <= burnin || thin < 1) {
            throw ConfigError("mcmc needs iterations > burnin and thin >= 1");
        }
        return (iterations - burnin) / thin;
    }
};

// Retained draws of the heteroscedastic spline model. Coefficient layout is
// (intercept, slope, spline...) for both blocks; the log-SD block has a
// single column when the chain was run homoscedastic.
struct SplineChain {
    Eigen::MatrixXd mean_coefs;
    Eigen::MatrixXd logsd_coefs;
    Eigen::VectorXd sigma_a2;
    Eigen::VectorXd log_post;
    long burnin = 0;
    long thin = 1;
    double logsd_accept_rate = 0.0;
    int q = 0;

    long retained() const { return mean_coefs.rows(); }
};

// Metropolis-within-Gibbs for the model
//   y_i ~ N(phi(x_i), sigma(x_i)^2),
//   phi(x)      = alpha_0 + alpha_1 x + sum_q a_q Z_q(x),
//   log sigma(x)= gamma_0 + gamma_1 x + sum_q b_q Z_q(x),
// with a_q ~ N(0, sigma_a^2), 1/sigma_a^2 ~ Gamma(0.1, 0.1), b_q ~ N(0, 0.1)
// and flat-ish N(0, 1e6) priors on the linear coefficients.
//
// Update order per sweep: sigma_a^2 moves first through a Metropolis step on
// log sigma_a^2 whose target is the exact marginal with the mean coefficients
// integrated out (a partially collapsed update; the conditional inverse-gamma
// update cannot cross the funnel between the collapsed and wiggly regimes
// when the truth is nearly linear). The mean block is then an exact
// conditional Gaussian draw given (sigma_a^2, sigma(.)); the log-SD block is
// a joint adaptive random-walk Metropolis step whose proposal covariance is
// learned during burn-in and frozen afterwards.
inline SplineChain mcmc_fit(const Dataset& data, const BasisSpec& basis,
                            const McmcConfig& config, RngStream& rng) {
    validate_dataset(data);
    if (data.m() != 2) {
        throw InvalidInputError("mcmc_fit expects an intercept plus one covariate");
    }
    const Eigen::VectorXd x = data.X.col(1);
    if (basis.x_train.size() != x.size() || (basis.x_train - x).cwiseAbs().maxCoeff() != 0.0) {
        throw InvalidInputError("basis was not built from this dataset's covariate");
    }
    const long keep = config.retained();

    const Eigen::Index n = x.size();
    const int q = basis.q;
    const Eigen::Index p = 2 + q;
    Eigen::MatrixXd c_mean(n, p);
    c_mean.col(0).setOnes();
    c_mean.col(1) = x;
    if (q > 0) c_mean.rightCols(q) = basis.z;

    const Eigen::Index ps = config.heteroscedastic ? p : 1;
    const Eigen::MatrixXd c_sd = config.heteroscedastic
                                     ? c_mean
                                     : Eigen::MatrixXd::Ones(n, 1);

    const Eigen::VectorXd& y = data.y;

    // Deterministic initial state: ridge fit for the mean, residual spread
    // for the noise level.
    Eigen::MatrixXd gram0 = c_mean.transpose() * c_mean;
    gram0.diagonal().array() += 1e-8;
    Eigen::VectorXd th_m = gram0.ldlt().solve(c_mean.transpose() * y);
    Eigen::VectorXd resid0 = y - c_mean * th_m;
    const double s0 = std::max(std::sqrt(resid0.squaredNorm() / std::max<Eigen::Index>(1, n - p)),
                               1e-6);
    Eigen::VectorXd th_s = Eigen::VectorXd::Zero(ps);
    th_s[0] = std::log(s0);
    const bool sample_logsd = !config.fixed_logsd.has_value();
    if (!sample_logsd) {
        if (config.fixed_logsd->size() != ps) {
            throw ConfigError("fixed_logsd length does not match the log-SD block size");
        }
        th_s = *config.fixed_logsd;
    }
    double sigma_a2 = config.fixed_sigma_a2.value_or(1.0);

    Eigen::VectorXd eta = c_sd * th_s;          // log sigma at the data
    Eigen::VectorXd e2 = (-2.0 * eta).array().exp(); // 1/sigma^2
    double eta_sum = eta.sum();

    // Gram caches; stale whenever the variance curve moves.
    Eigen::MatrixXd gram_data(p, p);
    Eigen::VectorXd rhs_data(p);
    bool gram_dirty = true;

    auto prior_logdens_sd = [&](const Eigen::VectorXd& th) {
        double lp = -0.5 * th[0] * th[0] / config.gamma_prior_var;
        if (config.heteroscedastic) {
            lp += -0.5 * th[1] * th[1] / config.gamma_prior_var;
            for (Eigen::Index j = 2; j < ps; ++j) {
                lp += -0.5 * th[j] * th[j] / config.b_prior_var;
            }
        }
        return lp;
    };

    // Adaptive proposal state for the log-SD block.
    Eigen::MatrixXd prop_chol = Eigen::MatrixXd::Identity(ps, ps) * 0.1;
    double log_scale = 0.0;
    Eigen::VectorXd adapt_mean = Eigen::VectorXd::Zero(ps);
    Eigen::MatrixXd adapt_cov = Eigen::MatrixXd::Zero(ps, ps);
    long adapt_count = 0;
    // Adaptive proposal scale for the collapsed log sigma_a^2 step.
    double sa2_step = 1.0;

    SplineChain chain;
    chain.q = q;
    chain.burnin = config.burnin;
    chain.thin = config.thin;
    chain.mean_coefs.resize(keep, p);
    chain.logsd_coefs.resize(keep, ps);
    chain.sigma_a2.resize(keep);
    chain.log_post.resize(keep);

    Eigen::MatrixXd scaled(n, p);
    Eigen::VectorXd z_draw(p), phi(n), resid(n), r2(n);
    Eigen::VectorXd step(ps), th_prop(ps), eta_prop(n), e2_prop(n);
    long accepted = 0, proposals = 0, kept = 0;

    // Precision factor and mean of theta_mean | (sigma_a^2, sigma(.)), plus
    // the log marginal likelihood of sigma_a^2 with theta_mean integrated
    // out (terms constant in sigma_a^2 at fixed weights are dropped).
    struct MeanState {
        Eigen::LLT<Eigen::MatrixXd> llt;
        Eigen::VectorXd mu;
        double logml = 0.0;
        bool ok = false;
    };
    const auto eval_mean_state = [&](double sa2) {
        MeanState st;
        Eigen::MatrixXd gram = gram_data;
        gram(0, 0) += 1.0 / config.alpha_prior_var;
        gram(1, 1) += 1.0 / config.alpha_prior_var;
        for (Eigen::Index j = 2; j < p; ++j) {
            gram(j, j) += 1.0 / sa2;
        }
        st.llt.compute(gram);
        if (st.llt.info() != Eigen::Success) {
            return st;
        }
        st.mu = st.llt.solve(rhs_data);
        double logdet = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            logdet += 2.0 * std::log(st.llt.matrixL()(j, j));
        }
        st.logml = 0.5 * rhs_data.dot(st.mu) - 0.5 * logdet -
                   0.5 * static_cast<double>(q) * std::log(sa2);
        st.ok = true;
        return st;
    };
    const auto log_sa2_target = [&](double log_sa2, double logml) {
        return logml - config.sigma_a_shape * log_sa2 -
               config.sigma_a_rate * std::exp(-log_sa2);
    };

    for (long iter = 0; iter < config.iterations; ++iter) {
        if (gram_dirty) {
            scaled = e2.asDiagonal() * c_mean;
            gram_data.noalias() = c_mean.transpose() * scaled;
            rhs_data.noalias() = scaled.transpose() * y;
            gram_dirty = false;
        }
        MeanState cur = eval_mean_state(sigma_a2);
        if (!cur.ok) {
            throw McmcDivergenceError("mean-block precision not positive definite", iter);
        }

        // --- sigma_a^2: collapsed Metropolis step on log sigma_a^2 ---
        if (q > 0 && !config.fixed_sigma_a2.has_value()) {
            const double log_cur = std::log(sigma_a2);
            const double log_prop = log_cur + sa2_step * sample_standard_normal(rng);
            double accept_prob = 0.0;
            if (std::abs(log_prop) < 60.0) {
                MeanState prop = eval_mean_state(std::exp(log_prop));
                if (prop.ok) {
                    const double delta = log_sa2_target(log_prop, prop.logml) -
                                         log_sa2_target(log_cur, cur.logml);
                    accept_prob = std::min(1.0, std::exp(delta));
                    if (rng.uniform_pos() <= accept_prob) {
                        sigma_a2 = std::exp(log_prop);
                        cur = std::move(prop);
                    }
                }
            }
            if (iter < config.burnin) {
                const double rm = std::pow(static_cast<double>(iter + 1), -0.66);
                sa2_step *= std::exp(rm * (accept_prob - 0.44));
            }
        }

        // --- mean block: exact Gaussian conditional ---
        for (Eigen::Index j = 0; j < p; ++j) {
            z_draw[j] = sample_standard_normal(rng);
        }
        th_m = cur.mu + cur.llt.matrixU().solve(z_draw);
        phi.noalias() = c_mean * th_m;
        resid = y - phi;
        r2 = resid.array().square();

        // --- log-SD block: joint adaptive random-walk Metropolis ---
        double lp_cur = -eta_sum - 0.5 * r2.dot(e2) + prior_logdens_sd(th_s);
        if (!std::isfinite(lp_cur)) {
            throw McmcDivergenceError("log posterior became non-finite", iter);
        }
        double accept_prob = 0.0;
        if (sample_logsd) {
            for (Eigen::Index j = 0; j < ps; ++j) {
                step[j] = sample_standard_normal(rng);
            }
            th_prop = th_s + std::exp(log_scale) * (prop_chol * step);
            eta_prop.noalias() = c_sd * th_prop;
            const bool in_bounds = eta_prop.cwiseAbs().maxCoeff() <= config.logsd_bound;
            if (in_bounds) {
                e2_prop = (-2.0 * eta_prop).array().exp();
                const double lp_prop =
                    -eta_prop.sum() - 0.5 * r2.dot(e2_prop) + prior_logdens_sd(th_prop);
                accept_prob = std::min(1.0, std::exp(lp_prop - lp_cur));
                if (rng.uniform_pos() <= accept_prob) {
                    th_s = th_prop;
                    eta.swap(eta_prop);
                    e2.swap(e2_prop);
                    eta_sum = eta.sum();
                    gram_dirty = true;
                    ++accepted;
                }
            }
            ++proposals;
        }

        if (iter < config.burnin && sample_logsd) {
            // Robbins-Monro on the global scale, running covariance for the
            // proposal shape; both frozen once burn-in ends.
            const double rm = std::pow(static_cast<double>(iter + 1), -0.66);
            log_scale += rm * (accept_prob - config.target_accept);
            ++adapt_count;
            const double w = 1.0 / static_cast<double>(adapt_count);
            const Eigen::VectorXd delta = th_s - adapt_mean;
            adapt_mean += w * delta;
            adapt_cov += w * (delta * (th_s - adapt_mean).transpose() - adapt_cov);
            if (adapt_count >= 50 && adapt_count % 25 == 0) {
                Eigen::MatrixXd reg = adapt_cov;
                reg.diagonal().array() += 1e-10;
                Eigen::LLT<Eigen::MatrixXd> pc(reg);
                if (pc.info() == Eigen::Success) {
                    prop_chol = pc.matrixL();
                }
            }
        }
        if (iter >= config.burnin && (iter - config.burnin) % config.thin == 0 && kept < keep) {
            chain.mean_coefs.row(kept) = th_m.transpose();
            chain.logsd_coefs.row(kept) = th_s.transpose();
            chain.sigma_a2[kept] = sigma_a2;
            double lp = -0.5 * static_cast<double>(n) * std::log(2.0 * 3.14159265358979323846) -
                        eta_sum - 0.5 * r2.dot(e2);
            lp += prior_logdens_sd(th_s);
            lp += -0.5 * (th_m[0] * th_m[0] + th_m[1] * th_m[1]) / config.alpha_prior_var;
            if (q > 0) {
                lp += -0.5 * th_m.tail(q).squaredNorm() / sigma_a2 -
                      0.5 * q * std::log(sigma_a2);
                const double tau = 1.0 / sigma_a2;
                lp += (config.sigma_a_shape - 1.0) * std::log(tau) - config.sigma_a_rate * tau;
            }
            chain.log_post[kept] = lp;
            ++kept;
        }
    }
    chain.logsd_accept_rate =
        proposals > 0 ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
    return chain;
}

} // namespace robreg
