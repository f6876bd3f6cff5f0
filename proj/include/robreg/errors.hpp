#pragma once

#include <stdexcept>
#include <string>

namespace robreg {

// Exit codes used by the CLI. Library code throws; the CLI maps to these.
enum class ExitCode : int {
    ok = 0,
    config_error = 2,
    data_error = 3,
    numerical_failure = 4,
};

class Error : public std::runtime_error {
public:
    Error(std::string msg, ExitCode code)
        : std::runtime_error(std::move(msg)), code_(code) {}
    ExitCode exit_code() const noexcept { return code_; }

private:
    ExitCode code_;
};

// A sampler or estimator was called with out-of-domain parameters.
class InvalidParameterError : public Error {
public:
    explicit InvalidParameterError(const std::string& msg)
        : Error("invalid parameter: " + msg, ExitCode::numerical_failure) {}
};

// Design matrix (possibly weighted) is rank deficient past the condition gate.
class SingularDesignError : public Error {
public:
    explicit SingularDesignError(const std::string& msg)
        : Error("singular design: " + msg, ExitCode::numerical_failure) {}
};

// Covariance estimators that divide by n - m need n > m.
class ZeroDfError : public Error {
public:
    explicit ZeroDfError(const std::string& msg)
        : Error("zero residual degrees of freedom: " + msg, ExitCode::numerical_failure) {}
};

// A covariate group has fewer than the required number of replicates.
class InsufficientReplicationError : public Error {
public:
    explicit InsufficientReplicationError(const std::string& msg)
        : Error("insufficient replication: " + msg, ExitCode::data_error) {}
};

class NumericalFailureError : public Error {
public:
    explicit NumericalFailureError(const std::string& msg)
        : Error("numerical failure: " + msg, ExitCode::numerical_failure) {}
};

// MCMC reached a non-finite state; reports the iteration where it happened.
class McmcDivergenceError : public Error {
public:
    McmcDivergenceError(const std::string& msg, long iteration)
        : Error("mcmc divergence at iteration " + std::to_string(iteration) + ": " + msg,
                ExitCode::numerical_failure),
          iteration_(iteration) {}
    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg)
        : Error("config error: " + msg, ExitCode::config_error) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& msg)
        : Error("data error: " + msg, ExitCode::data_error) {}
};

class InvalidInputError : public Error {
public:
    explicit InvalidInputError(const std::string& msg)
        : Error("invalid input: " + msg, ExitCode::data_error) {}
};

} // namespace robreg
