#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "robreg/bayes_discrete.hpp"
#include "robreg/posterior.hpp"
#include "robreg/rng.hpp"
#include "robreg/spline_basis.hpp"
#include "robreg/spline_mcmc.hpp"

namespace robreg {

// Whether the covariate distribution entering the linear-trend functional is
// posterior-random (Bayesian bootstrap over the observed points) or pinned at
// the empirical measure of the realized design.
enum class XMode { random_x, fixed_x };

inline const char* to_string(XMode mode) {
    return mode == XMode::random_x ? "random" : "fixed";
}

// Pushes each retained draw of the mean curve through the least-squares
// linear summary. The curve is evaluated at the observed covariate values
// only, matching the support of the covariate weights: uniform 1/n in fixed
// mode, Dirichlet(1, ..., 1) in random mode (ties aggregate automatically).
// Draws whose weighted design degenerates are redrawn and counted.
inline PosteriorSummary posterior_beta_continuous(const Dataset& data, const BasisSpec& basis,
                                                  const SplineChain& chain, XMode mode,
                                                  RngStream& rng) {
    validate_dataset(data);
    if (data.m() != 2) {
        throw InvalidInputError("continuous posterior expects an intercept plus one covariate");
    }
    if (chain.retained() == 0) {
        throw InvalidParameterError("chain has no retained draws");
    }
    const Eigen::VectorXd x = data.X.col(1);
    const Eigen::Index n = x.size();
    const long n_draws = chain.retained();

    Eigen::MatrixXd c_mean(n, 2 + chain.q);
    c_mean.col(0).setOnes();
    c_mean.col(1) = x;
    if (chain.q > 0) {
        if (basis.q != chain.q) {
            throw InvalidInputError("basis and chain disagree on the spline dimension");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            c_mean.row(i).tail(chain.q) = basis.design_row(x[i]);
        }
    }
    // phi_draws(d, i): draw d of the mean curve at observation i.
    const Eigen::MatrixXd phi_draws = chain.mean_coefs * c_mean.transpose();

    const double uniform_w = 1.0 / static_cast<double>(n);
    const double x_extent = (x.array() - x.mean()).abs().maxCoeff();
    const double sxx_floor = 1e-12 * static_cast<double>(n) * x_extent * x_extent;

    Eigen::MatrixXd draws(n_draws, 2);
    Eigen::VectorXd w(n);
    long rejected = 0;
    for (long d = 0; d < n_draws; ++d) {
        double slope = 0.0, intercept = 0.0;
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            double sw;
            if (mode == XMode::fixed_x) {
                w.setConstant(uniform_w);
                sw = 1.0;
            } else {
                sw = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    w[i] = sample_gamma(rng, 1.0);
                    sw += w[i];
                }
            }
            const double xbar = w.dot(x) / sw;
            const double pbar = w.dot(phi_draws.row(d)) / sw;
            double sxx = 0.0, sxp = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double dx = x[i] - xbar;
                sxx += w[i] * dx * dx;
                sxp += w[i] * dx * (phi_draws(d, i) - pbar);
            }
            if (sxx > sxx_floor * sw) {
                slope = sxp / sxx;
                intercept = pbar - slope * xbar;
                ok = true;
            } else {
                if (mode == XMode::fixed_x) {
                    throw SingularDesignError("observed covariate has no spread");
                }
                ++rejected;
            }
        }
        if (!ok) {
            throw SingularDesignError("covariate weights kept collapsing onto a single point");
        }
        draws(d, 0) = intercept;
        draws(d, 1) = slope;
    }
    auto s = detail::summarize_draws(
        draws, mode == XMode::random_x ? "bayes-random-x" : "bayes-fixed-x-mc");
    s.rejected_draws = rejected;
    return s;
}

} // namespace robreg
