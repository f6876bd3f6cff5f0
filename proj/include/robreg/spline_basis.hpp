#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "robreg/errors.hpp"
#include "robreg/estimators.hpp"

namespace robreg {

// Penalized cubic spline basis in mixed-model form.
//
// Q knots are spread uniformly over [lo, hi] (endpoints included). The cubic
// B-spline basis on those knots has Q + 2 functions; its curvature penalty
// matrix has rank Q, and rotating the basis onto the penalty's positive
// eigenspace (scaled by 1/sqrt(eigenvalue)) turns the curvature penalty into
// an identity ridge on the spline coefficients. The resulting columns are
// additionally orthogonalized against (1, x) in the empirical inner product,
// which changes nothing about the fitted function space or the meaning of
// the ridge (the removed component is linear, hence curvature-free) but
// decorrelates the spline block from the linear coefficients.
struct BasisSpec {
    int q = 0;                    // number of penalized columns
    double lo = 0.0, hi = 0.0;    // knot range
    Eigen::VectorXd knots;        // Q knot locations, uniform on [lo, hi]
    Eigen::VectorXd knot_vector;  // padded vector used by the B-spline recursion
    Eigen::MatrixXd transform;    // (Q+2) x Q rotation onto the penalty eigenspace
    Eigen::MatrixXd linear_adjust; // 2 x Q empirical projection onto (1, x)
    Eigen::MatrixXd z;            // n x Q training design
    Eigen::VectorXd x_train;

    // One basis row at an arbitrary point in [lo, hi].
    Eigen::RowVectorXd design_row(double x) const;

    // Full model design [1, x, Z] for the given points.
    Eigen::MatrixXd full_design(const Eigen::VectorXd& x) const;
};

namespace detail {

// All cubic B-spline values at x for the padded knot vector t (Cox-de Boor).
// Returns nb = len(t) - 4 values; x is expected inside [t.front(), t.back()].
inline Eigen::VectorXd bspline_row(const Eigen::VectorXd& t, double x) {
    const Eigen::Index nb = t.size() - 4;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(nb);
    const double lo = t[0];
    const double hi = t[t.size() - 1];
    if (x < lo || x > hi) {
        return out;
    }
    // Order-1 indicator functions; the last span is right-closed.
    Eigen::VectorXd n_prev = Eigen::VectorXd::Zero(t.size() - 1);
    for (Eigen::Index i = 0; i + 1 < t.size(); ++i) {
        const bool last_span = t[i] < hi && t[i + 1] >= hi;
        if ((x >= t[i] && x < t[i + 1]) || (last_span && x == hi && t[i] < t[i + 1])) {
            n_prev[i] = 1.0;
            break;
        }
    }
    for (int order = 2; order <= 4; ++order) {
        Eigen::VectorXd n_cur = Eigen::VectorXd::Zero(t.size() - order);
        for (Eigen::Index i = 0; i + order < t.size(); ++i) {
            double v = 0.0;
            const double d1 = t[i + order - 1] - t[i];
            if (d1 > 0.0 && n_prev[i] != 0.0) {
                v += (x - t[i]) / d1 * n_prev[i];
            }
            const double d2 = t[i + order] - t[i + 1];
            if (d2 > 0.0 && n_prev[i + 1] != 0.0) {
                v += (t[i + order] - x) / d2 * n_prev[i + 1];
            }
            n_cur[i] = v;
        }
        n_prev.swap(n_cur);
    }
    out = n_prev.head(nb);
    return out;
}

// Second derivatives of all cubic B-splines at x, via the derivative
// recursion applied twice to order-2 basis values. Terms with a zero knot
// span are dropped, which is the standard convention for repeated knots.
inline Eigen::VectorXd bspline_row_d2(const Eigen::VectorXd& t, double x) {
    const Eigen::Index nb = t.size() - 4;
    const double hi = t[t.size() - 1];
    Eigen::VectorXd n2 = Eigen::VectorXd::Zero(t.size() - 2);
    {
        Eigen::VectorXd n1 = Eigen::VectorXd::Zero(t.size() - 1);
        for (Eigen::Index i = 0; i + 1 < t.size(); ++i) {
            const bool last_span = t[i] < hi && t[i + 1] >= hi;
            if ((x >= t[i] && x < t[i + 1]) || (last_span && x == hi && t[i] < t[i + 1])) {
                n1[i] = 1.0;
                break;
            }
        }
        for (Eigen::Index i = 0; i + 2 < t.size(); ++i) {
            double v = 0.0;
            const double d1 = t[i + 1] - t[i];
            if (d1 > 0.0 && n1[i] != 0.0) v += (x - t[i]) / d1 * n1[i];
            const double d2 = t[i + 2] - t[i + 1];
            if (d2 > 0.0 && n1[i + 1] != 0.0) v += (t[i + 2] - x) / d2 * n1[i + 1];
            n2[i] = v;
        }
    }
    auto d1_of_order3 = [&](Eigen::Index i) {
        double v = 0.0;
        const double da = t[i + 2] - t[i];
        if (da > 0.0) v += n2[i] / da;
        const double db = t[i + 3] - t[i + 1];
        if (db > 0.0) v -= n2[i + 1] / db;
        return 2.0 * v;
    };
    Eigen::VectorXd out(nb);
    for (Eigen::Index i = 0; i < nb; ++i) {
        double v = 0.0;
        const double da = t[i + 3] - t[i];
        if (da > 0.0) v += d1_of_order3(i) / da;
        const double db = t[i + 4] - t[i + 1];
        if (db > 0.0) v -= d1_of_order3(i + 1) / db;
        out[i] = 3.0 * v;
    }
    return out;
}

} // namespace detail

inline Eigen::RowVectorXd BasisSpec::design_row(double x) const {
    if (q == 0) {
        return Eigen::RowVectorXd(0);
    }
    const Eigen::VectorXd b = detail::bspline_row(knot_vector, x);
    Eigen::RowVectorXd row = b.transpose() * transform;
    row -= Eigen::RowVector2d(1.0, x) * linear_adjust;
    return row;
}

inline Eigen::MatrixXd BasisSpec::full_design(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd c(x.size(), 2 + q);
    c.col(0).setOnes();
    c.col(1) = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        c.row(i).tail(q) = design_row(x[i]);
    }
    return c;
}

// Builds the penalized basis for covariate vector x with n_knots knots. The
// knot range defaults to the observed range of x; pass lo/hi explicitly to
// cover the potential range instead. n_knots == 0 collapses the model to the
// plain linear basis.
inline BasisSpec build_basis(const Eigen::VectorXd& x, int n_knots,
                             double lo = std::numeric_limits<double>::quiet_NaN(),
                             double hi = std::numeric_limits<double>::quiet_NaN()) {
    BasisSpec spec;
    spec.x_train = x;
    if (x.size() == 0 || !x.allFinite()) {
        throw InvalidInputError("spline basis needs finite covariate values");
    }
    if (std::isnan(lo)) lo = x.minCoeff();
    if (std::isnan(hi)) hi = x.maxCoeff();
    spec.lo = lo;
    spec.hi = hi;
    spec.q = n_knots;
    if (n_knots == 0) {
        spec.z.resize(x.size(), 0);
        return spec;
    }
    if (n_knots == 1) {
        throw InvalidInputError("knot count must be 0 or at least 2");
    }
    if (!(hi > lo)) {
        throw InvalidInputError("degenerate covariate range for spline basis");
    }
    if (x.size() < n_knots + 4) {
        throw InvalidInputError("need at least knots + 4 observations");
    }
    if (x.minCoeff() < lo || x.maxCoeff() > hi) {
        throw InvalidInputError("covariate values fall outside the knot range");
    }

    const int q = n_knots;
    spec.knots = Eigen::VectorXd::LinSpaced(q, lo, hi);
    spec.knot_vector.resize(q + 6);
    spec.knot_vector.head(3).setConstant(lo);
    spec.knot_vector.segment(3, q) = spec.knots;
    spec.knot_vector.tail(3).setConstant(hi);

    const Eigen::Index nb = q + 2;
    // Curvature penalty: second derivatives are piecewise linear, so a
    // per-span Simpson rule integrates their products exactly.
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(nb, nb);
    for (int s = 0; s + 1 < q; ++s) {
        const double a = spec.knots[s];
        const double b = spec.knots[s + 1];
        const double mid = 0.5 * (a + b);
        const double h = b - a;
        const Eigen::VectorXd da = detail::bspline_row_d2(spec.knot_vector, a);
        const Eigen::VectorXd dm = detail::bspline_row_d2(spec.knot_vector, mid);
        const Eigen::VectorXd db = detail::bspline_row_d2(spec.knot_vector, b);
        omega.noalias() += (h / 6.0) * (da * da.transpose() + 4.0 * (dm * dm.transpose()) +
                                        db * db.transpose());
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega);
    if (eig.info() != Eigen::Success) {
        throw NumericalFailureError("penalty eigendecomposition failed");
    }
    // Ascending eigenvalues; the null space (linear functions) has dimension
    // two, everything else must be strictly positive.
    const Eigen::VectorXd d = eig.eigenvalues();
    const double dmax = d[nb - 1];
    if (!(dmax > 0.0) || d[2] <= dmax * 1e-10) {
        throw NumericalFailureError("penalty matrix rank is below expectation");
    }
    spec.transform.resize(nb, q);
    for (int j = 0; j < q; ++j) {
        const Eigen::Index src = nb - 1 - j; // descending eigenvalue order
        Eigen::VectorXd v = eig.eigenvectors().col(src);
        Eigen::Index imax;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0.0) v = -v;
        spec.transform.col(j) = v / std::sqrt(d[src]);
    }

    Eigen::MatrixXd b_mat(x.size(), nb);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        b_mat.row(i) = detail::bspline_row(spec.knot_vector, x[i]).transpose();
    }
    Eigen::MatrixXd z_raw = b_mat * spec.transform;

    Eigen::MatrixXd x_lin(x.size(), 2);
    x_lin.col(0).setOnes();
    x_lin.col(1) = x;
    detail::GatedQr qr(x_lin, kDefaultConditionThreshold);
    spec.linear_adjust = qr.solve(z_raw);
    spec.z = z_raw - x_lin * spec.linear_adjust;
    return spec;
}

} // namespace robreg
