#pragma once

#include <stdexcept>
#include <string>

namespace banditlab {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument, config value, or out-of-range input.
class InputError : public Error {
public:
    explicit InputError(const std::string& msg) : Error(msg) {}
};

// Numerical solver could not reach the requested tolerance.
class SolverError : public Error {
public:
    SolverError(const std::string& msg, double best_residual)
        : Error(msg), best_residual_(best_residual) {}

    double best_residual() const { return best_residual_; }

private:
    double best_residual_;
};

// act/update called out of order.
class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& msg) : Error(msg) {}
};

// Environment produced data violating its own contract (e.g. sparsity budget).
class EnvironmentError : public Error {
public:
    explicit EnvironmentError(const std::string& msg) : Error(msg) {}
};

// A runtime-checked theory invariant failed during a run.
class InvariantViolation : public Error {
public:
    explicit InvariantViolation(const std::string& msg) : Error(msg) {}
};

} // namespace banditlab
