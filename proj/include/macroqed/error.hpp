#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace macroqed {

// Input outside the physical or mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed configuration or parameter set (CLI exit code 2).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Numerical procedure failed to reach the requested tolerance (CLI exit code 3).
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double achieved_error)
        : std::runtime_error(what), achieved_error_(achieved_error) {}
    double achieved_error() const noexcept { return achieved_error_; }

private:
    double achieved_error_;
};

// Non-fatal notes collected while evaluating a scenario.
struct Diagnostics {
    std::vector<std::string> warnings;
    void warn(std::string message) { warnings.push_back(std::move(message)); }
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw DomainError(message);
}

}  // namespace macroqed
