#pragma once

#include <Eigen/Dense>
#include <cstring>
#include <string>
#include <unordered_map>
#include <vector>

#include "robreg/dataset.hpp"
#include "robreg/errors.hpp"

namespace robreg {

// Sufficient statistics of (X, Y) after collapsing identical covariate rows:
// unique rows xi (in first-appearance order), per-group counts, means of Y,
// and within-group sums of squared deviations.
struct GroupedData {
    Eigen::MatrixXd xi;              // K x m unique covariate rows
    std::vector<long long> counts;   // n_k
    Eigen::VectorXd group_mean;      // ybar_k
    Eigen::VectorXd group_ss;        // sum over group of (y - ybar_k)^2
    std::vector<int> row_index;      // original row -> group id
    std::vector<std::string> column_names;

    Eigen::Index k() const { return xi.rows(); }
    Eigen::Index m() const { return xi.cols(); }
    long long n() const {
        long long total = 0;
        for (long long c : counts) total += c;
        return total;
    }
};

namespace detail {

struct RowKey {
    std::vector<std::uint64_t> bits;
    bool operator==(const RowKey& other) const { return bits == other.bits; }
};

struct RowKeyHash {
    std::size_t operator()(const RowKey& key) const {
        std::size_t h = 0xcbf29ce484222325ULL;
        for (std::uint64_t b : key.bits) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

inline RowKey row_key(const Eigen::MatrixXd& X, Eigen::Index i) {
    RowKey key;
    key.bits.resize(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double v = X(i, j);
        std::uint64_t b;
        std::memcpy(&b, &v, sizeof(b));
        key.bits[static_cast<std::size_t>(j)] = b;
    }
    return key;
}

// Rank check used everywhere a design (weighted or not) must be invertible.
inline void require_full_rank(const Eigen::MatrixXd& A, double cond_threshold,
                              const std::string& what) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    const Eigen::MatrixXd R = qr.matrixR()
                                  .topLeftCorner(A.cols(), A.cols())
                                  .template triangularView<Eigen::Upper>();
    const double dmax = std::abs(R(0, 0));
    const double dmin = std::abs(R(A.cols() - 1, A.cols() - 1));
    if (!(dmax > 0.0) || !(dmin > 0.0) || dmax / dmin > cond_threshold) {
        throw SingularDesignError(what);
    }
}

} // namespace detail

// Collapses rows that are bitwise identical across all covariate columns.
// Grouping keys are exact; use round_covariates() first for jittery data.
inline GroupedData group_by_covariate(const Dataset& data,
                                      double cond_threshold = 1e12) {
    validate_dataset(data);
    const Eigen::Index n = data.n();
    const Eigen::Index m = data.m();

    std::unordered_map<detail::RowKey, int, detail::RowKeyHash> ids;
    ids.reserve(static_cast<std::size_t>(n));
    GroupedData g;
    g.column_names = data.column_names;
    g.row_index.resize(static_cast<std::size_t>(n));
    std::vector<Eigen::Index> first_row;

    for (Eigen::Index i = 0; i < n; ++i) {
        auto key = detail::row_key(data.X, i);
        auto [it, inserted] = ids.emplace(std::move(key), static_cast<int>(first_row.size()));
        if (inserted) {
            first_row.push_back(i);
        }
        g.row_index[static_cast<std::size_t>(i)] = it->second;
    }

    const auto K = static_cast<Eigen::Index>(first_row.size());
    g.xi.resize(K, m);
    for (Eigen::Index k = 0; k < K; ++k) {
        g.xi.row(k) = data.X.row(first_row[static_cast<std::size_t>(k)]);
    }
    if (K < m) {
        throw SingularDesignError("only " + std::to_string(K) + " distinct covariate rows for " +
                                  std::to_string(m) + " coefficients");
    }
    detail::require_full_rank(g.xi, cond_threshold, "unique covariate rows do not span the coefficient space");

    g.counts.assign(static_cast<std::size_t>(K), 0);
    g.group_mean = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int k = g.row_index[static_cast<std::size_t>(i)];
        g.counts[static_cast<std::size_t>(k)]++;
        g.group_mean[k] += data.y[i];
    }
    for (Eigen::Index k = 0; k < K; ++k) {
        g.group_mean[k] /= static_cast<double>(g.counts[static_cast<std::size_t>(k)]);
    }
    // Second pass keeps the sums of squares exact around the final means.
    g.group_ss = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int k = g.row_index[static_cast<std::size_t>(i)];
        const double dev = data.y[i] - g.group_mean[k];
        g.group_ss[k] += dev * dev;
    }
    return g;
}

// Drops groups with fewer than min_count replicates; returns the surviving
// grouped data. Dropping changes the estimand, so callers must warn loudly.
inline GroupedData drop_small_groups(const GroupedData& g, long long min_count,
                                     std::vector<int>* dropped_groups = nullptr) {
    std::vector<int> keep;
    for (std::size_t k = 0; k < g.counts.size(); ++k) {
        if (g.counts[k] >= min_count) {
            keep.push_back(static_cast<int>(k));
        } else if (dropped_groups != nullptr) {
            dropped_groups->push_back(static_cast<int>(k));
        }
    }
    if (keep.size() == g.counts.size()) {
        return g;
    }
    if (keep.empty()) {
        throw DataError("all covariate groups fall below the replication minimum");
    }
    GroupedData out;
    out.column_names = g.column_names;
    out.xi.resize(static_cast<Eigen::Index>(keep.size()), g.m());
    out.group_mean.resize(static_cast<Eigen::Index>(keep.size()));
    out.group_ss.resize(static_cast<Eigen::Index>(keep.size()));
    std::vector<int> remap(g.counts.size(), -1);
    for (std::size_t j = 0; j < keep.size(); ++j) {
        const int k = keep[j];
        remap[static_cast<std::size_t>(k)] = static_cast<int>(j);
        out.xi.row(static_cast<Eigen::Index>(j)) = g.xi.row(k);
        out.counts.push_back(g.counts[static_cast<std::size_t>(k)]);
        out.group_mean[static_cast<Eigen::Index>(j)] = g.group_mean[k];
        out.group_ss[static_cast<Eigen::Index>(j)] = g.group_ss[k];
    }
    for (int id : g.row_index) {
        if (remap[static_cast<std::size_t>(id)] >= 0) {
            out.row_index.push_back(remap[static_cast<std::size_t>(id)]);
        }
    }
    if (out.xi.rows() < out.xi.cols()) {
        throw SingularDesignError("dropping under-replicated groups left fewer rows than coefficients");
    }
    detail::require_full_rank(out.xi, 1e12, "surviving covariate rows do not span the coefficient space");
    return out;
}

} // namespace robreg
