#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "robreg/errors.hpp"

namespace robreg {

namespace detail {

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) {
        throw NumericalFailureError("adaptive quadrature failed to converge");
    }
    if (std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

// Adaptive Simpson quadrature; split points let callers isolate known kinks
// so each recursion works on a smooth piece.
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol,
                        std::vector<double> split_points = {}) {
    split_points.push_back(a);
    split_points.push_back(b);
    std::sort(split_points.begin(), split_points.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < split_points.size(); ++i) {
        const double lo = std::max(a, split_points[i]);
        const double hi = std::min(b, split_points[i + 1]);
        if (!(hi > lo)) continue;
        const double mid = 0.5 * (lo + hi);
        const double flo = f(lo), fmid = f(mid), fhi = f(hi);
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += detail::adaptive_simpson_rec(f, lo, hi, flo, fmid, fhi, whole,
                                              tol / static_cast<double>(split_points.size()), 60);
    }
    return total;
}

} // namespace robreg
