#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "robreg/errors.hpp"

namespace robreg {

// Design matrix plus outcome vector. The intercept, when requested, is just
// another column (conventionally the first, named "intercept").
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> column_names;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index m() const { return X.cols(); }
};

inline void validate_dataset(const Dataset& data) {
    if (data.X.rows() != data.y.size()) {
        throw InvalidInputError("X and Y row counts differ");
    }
    if (data.X.rows() < data.X.cols()) {
        throw InvalidInputError("need at least as many rows as columns");
    }
    if (data.X.cols() == 0) {
        throw InvalidInputError("design matrix has no columns");
    }
    if (!data.column_names.empty() &&
        static_cast<Eigen::Index>(data.column_names.size()) != data.X.cols()) {
        throw InvalidInputError("column_names length does not match design width");
    }
    if (!data.X.allFinite() || !data.y.allFinite()) {
        throw InvalidInputError("non-finite entries in data");
    }
}

inline std::string column_label(const Dataset& data, Eigen::Index j) {
    if (static_cast<Eigen::Index>(data.column_names.size()) > j) {
        return data.column_names[static_cast<std::size_t>(j)];
    }
    return "col" + std::to_string(j);
}

// Builds a single-covariate dataset with a leading intercept column.
inline Dataset make_dataset(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            const std::string& x_name = "x") {
    Dataset d;
    d.X.resize(x.size(), 2);
    d.X.col(0).setOnes();
    d.X.col(1) = x;
    d.y = y;
    d.column_names = {"intercept", x_name};
    return d;
}

// Rounds every non-intercept covariate column to the given number of decimal
// places. Exact-bit grouping is the default; this is the documented
// preprocessor for data recorded with floating-point jitter.
inline Dataset round_covariates(const Dataset& data, int decimals) {
    if (decimals < 0 || decimals > 15) {
        throw ConfigError("rounding decimals must be in [0, 15]");
    }
    Dataset out = data;
    const double scale = std::pow(10.0, decimals);
    for (Eigen::Index j = 0; j < out.X.cols(); ++j) {
        if (column_label(data, j) == "intercept") {
            continue;
        }
        for (Eigen::Index i = 0; i < out.X.rows(); ++i) {
            out.X(i, j) = std::round(out.X(i, j) * scale) / scale;
        }
    }
    return out;
}

} // namespace robreg
