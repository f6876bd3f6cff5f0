#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "robreg/dataset.hpp"
#include "robreg/errors.hpp"

namespace robreg {

struct LoadResult {
    Dataset data;
    long dropped_rows = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        out.push_back(trim(field));
    }
    if (!line.empty() && line.back() == ',') {
        out.push_back("");
    }
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

} // namespace detail

// Reads a comma-separated file (header row, '.' decimal point) and assembles
// the design from the named covariate columns with an intercept prepended.
// Rows with a missing or non-numeric value in any selected column are
// dropped and counted.
inline LoadResult load_csv(const std::string& path, const std::string& outcome,
                           const std::vector<std::string>& covariates) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open input file '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("input file '" + path + "' is empty");
    }
    const auto headers = detail::split_csv_line(line);
    for (std::size_t i = 0; i < headers.size(); ++i) {
        for (std::size_t j = i + 1; j < headers.size(); ++j) {
            if (headers[i] == headers[j]) {
                throw ConfigError("duplicated header name '" + headers[i] + "'");
            }
        }
    }
    auto find_column = [&](const std::string& name) {
        for (std::size_t i = 0; i < headers.size(); ++i) {
            if (headers[i] == name) return static_cast<long>(i);
        }
        std::string available;
        for (const auto& h : headers) {
            if (!available.empty()) available += ", ";
            available += h;
        }
        throw ConfigError("unknown column '" + name + "' (available: " + available + ")");
    };

    if (covariates.empty()) {
        throw ConfigError("at least one covariate column is required");
    }
    const long y_col = find_column(outcome);
    std::vector<long> x_cols;
    for (const auto& c : covariates) {
        if (c == outcome) {
            throw ConfigError("covariate '" + c + "' duplicates the outcome column");
        }
        x_cols.push_back(find_column(c));
    }

    std::vector<double> ys;
    std::vector<std::vector<double>> xs;
    LoadResult result;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        bool ok = true;
        double yv = 0.0;
        std::vector<double> xv(x_cols.size());
        if (y_col >= static_cast<long>(fields.size()) ||
            !detail::parse_double(fields[static_cast<std::size_t>(y_col)], yv)) {
            ok = false;
        }
        for (std::size_t j = 0; ok && j < x_cols.size(); ++j) {
            if (x_cols[j] >= static_cast<long>(fields.size()) ||
                !detail::parse_double(fields[static_cast<std::size_t>(x_cols[j])], xv[j])) {
                ok = false;
            }
        }
        if (!ok) {
            ++result.dropped_rows;
            continue;
        }
        ys.push_back(yv);
        xs.push_back(std::move(xv));
    }
    if (ys.empty()) {
        throw DataError("no usable rows in '" + path + "'");
    }
    if (result.dropped_rows > 0) {
        result.warnings.push_back("dropped " + std::to_string(result.dropped_rows) +
                                  " row(s) with missing or non-numeric values");
    }

    const auto n = static_cast<Eigen::Index>(ys.size());
    const auto m = static_cast<Eigen::Index>(x_cols.size()) + 1;
    result.data.X.resize(n, m);
    result.data.y.resize(n);
    result.data.X.col(0).setOnes();
    for (Eigen::Index i = 0; i < n; ++i) {
        result.data.y[i] = ys[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 1; j < m; ++j) {
            result.data.X(i, j) = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - 1)];
        }
    }
    result.data.column_names.push_back("intercept");
    for (const auto& c : covariates) {
        result.data.column_names.push_back(c);
    }
    validate_dataset(result.data);
    return result;
}

} // namespace robreg
