#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "robreg/dataset.hpp"
#include "robreg/errors.hpp"
#include "robreg/grouping.hpp"

namespace robreg {

inline constexpr double kDefaultConditionThreshold = 1e12;
inline constexpr double kIntervalMultiplier = 1.96;

struct FitResult {
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov;
    Eigen::VectorXd se;
    Eigen::VectorXd ci_low;
    Eigen::VectorXd ci_high;
    std::string method;
};

namespace detail {

// QR factorization with an explicit condition gate. All least-squares solves
// in the library go through this so collinear designs fail loudly instead of
// returning garbage.
class GatedQr {
public:
    GatedQr(const Eigen::MatrixXd& A, double cond_threshold,
            const std::vector<std::string>* names = nullptr)
        : qr_(A) {
        const Eigen::Index m = A.cols();
        Eigen::VectorXd rdiag(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            rdiag[j] = std::abs(qr_.matrixR()(j, j));
        }
        const double dmax = rdiag[0];
        std::vector<Eigen::Index> offending;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (!(rdiag[j] * cond_threshold > dmax)) {
                offending.push_back(qr_.colsPermutation().indices()[j]);
            }
        }
        if (!(dmax > 0.0)) {
            for (Eigen::Index j = 0; j < m; ++j) offending.push_back(j);
        }
        if (!offending.empty()) {
            std::string msg = "condition number exceeds gate; offending columns:";
            for (Eigen::Index j : offending) {
                msg += ' ';
                msg += (names != nullptr && static_cast<Eigen::Index>(names->size()) > j)
                           ? (*names)[static_cast<std::size_t>(j)]
                           : ("col" + std::to_string(j));
            }
            throw SingularDesignError(msg);
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return qr_.solve(b); }
    Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const { return qr_.solve(B); }

    // (A^t A)^-1 from the R factor: P R^-1 R^-t P^t.
    Eigen::MatrixXd normal_matrix_inverse() const {
        const Eigen::Index m = qr_.matrixR().cols();
        Eigen::MatrixXd rinv = qr_.matrixR()
                                   .topLeftCorner(m, m)
                                   .template triangularView<Eigen::Upper>()
                                   .solve(Eigen::MatrixXd::Identity(m, m));
        Eigen::MatrixXd inv = rinv * rinv.transpose();
        const auto& perm = qr_.colsPermutation();
        inv = perm * inv * perm.transpose();
        return 0.5 * (inv + inv.transpose());
    }

private:
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

inline Eigen::MatrixXd symmetrize(Eigen::MatrixXd M) {
    return 0.5 * (M + M.transpose());
}

} // namespace detail

// Least-squares fit (X^t X)^-1 X^t Y through a rank-gated QR factorization.
inline Eigen::VectorXd fit_ols(const Dataset& data,
                               double cond_threshold = kDefaultConditionThreshold) {
    validate_dataset(data);
    detail::GatedQr qr(data.X, cond_threshold, &data.column_names);
    return qr.solve(data.y);
}

// Classical homoscedastic covariance: RSS/(n-m) * (X^t X)^-1.
inline Eigen::MatrixXd cov_model_based(const Dataset& data, const Eigen::VectorXd& beta,
                                       double cond_threshold = kDefaultConditionThreshold) {
    validate_dataset(data);
    const Eigen::Index n = data.n();
    const Eigen::Index m = data.m();
    if (n <= m) {
        throw ZeroDfError("model-based covariance needs n > m");
    }
    const Eigen::VectorXd resid = data.y - data.X * beta;
    const double sigma2 = resid.squaredNorm() / static_cast<double>(n - m);
    detail::GatedQr qr(data.X, cond_threshold, &data.column_names);
    return detail::symmetrize(sigma2 * qr.normal_matrix_inverse());
}

// Heteroscedasticity-consistent covariance with raw squared residuals:
// (X^t X)^-1 (X^t S X) (X^t X)^-1, S = diag(residual^2). The middle factor is
// accumulated column-wise; the n x n diagonal is never materialized.
inline Eigen::MatrixXd cov_sandwich_hc0(const Dataset& data, const Eigen::VectorXd& beta,
                                        double cond_threshold = kDefaultConditionThreshold) {
    validate_dataset(data);
    const Eigen::VectorXd resid = data.y - data.X * beta;
    detail::GatedQr qr(data.X, cond_threshold, &data.column_names);
    const Eigen::MatrixXd bread = qr.normal_matrix_inverse();
    const Eigen::ArrayXd r2 = resid.array().square();
    const Eigen::MatrixXd meat =
        data.X.transpose() * (data.X.array().colwise() * r2).matrix();
    return detail::symmetrize(bread * meat * bread);
}

// Fixed-design grouped sandwich: the per-row variance surrogate is the
// within-group sum of squares over (n_k - 3), constant across a group's rows.
// Needs at least four replicates per group.
inline Eigen::MatrixXd cov_sandwich_fixed_groups(const GroupedData& grouped,
                                                 double cond_threshold = kDefaultConditionThreshold) {
    const Eigen::Index K = grouped.k();
    const Eigen::Index m = grouped.m();
    for (Eigen::Index k = 0; k < K; ++k) {
        if (grouped.counts[static_cast<std::size_t>(k)] < 4) {
            throw InsufficientReplicationError(
                "group " + std::to_string(k) + " has " +
                std::to_string(grouped.counts[static_cast<std::size_t>(k)]) +
                " rows; the fixed-design variance needs at least 4");
        }
    }
    Eigen::MatrixXd sqrt_n_xi(K, m);
    for (Eigen::Index k = 0; k < K; ++k) {
        sqrt_n_xi.row(k) =
            std::sqrt(static_cast<double>(grouped.counts[static_cast<std::size_t>(k)])) *
            grouped.xi.row(k);
    }
    detail::GatedQr qr(sqrt_n_xi, cond_threshold, &grouped.column_names);
    const Eigen::MatrixXd bread = qr.normal_matrix_inverse();
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double nk = static_cast<double>(grouped.counts[static_cast<std::size_t>(k)]);
        const double var_row = grouped.group_ss[k] / (nk - 3.0);
        meat.noalias() += (nk * var_row) * grouped.xi.row(k).transpose() * grouped.xi.row(k);
    }
    return detail::symmetrize(bread * meat * bread);
}

// Moment-based 95% interval: beta +/- 1.96 * sqrt(diag cov).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> ci95(const Eigen::VectorXd& beta,
                                                        const Eigen::MatrixXd& cov) {
    const Eigen::Index m = beta.size();
    Eigen::VectorXd lo(m), hi(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double v = cov(j, j);
        if (v < -1e-12) {
            throw NumericalFailureError("negative variance on covariance diagonal");
        }
        if (v < 0.0) {
            v = 0.0;
        }
        const double half = kIntervalMultiplier * std::sqrt(v);
        lo[j] = beta[j] - half;
        hi[j] = beta[j] + half;
    }
    return {lo, hi};
}

inline FitResult make_fit_result(Eigen::VectorXd beta, Eigen::MatrixXd cov,
                                 std::string method) {
    FitResult r;
    r.beta = std::move(beta);
    r.cov = std::move(cov);
    const Eigen::Index m = r.beta.size();
    r.se.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        r.se[j] = std::sqrt(std::max(0.0, r.cov(j, j)));
    }
    auto [lo, hi] = ci95(r.beta, r.cov);
    r.ci_low = std::move(lo);
    r.ci_high = std::move(hi);
    r.method = std::move(method);
    return r;
}

} // namespace robreg
