// Exception hierarchy shared by every relkep module.
#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace relkep {

/// Input outside the mathematical domain of an operation (origin, |v| >= c, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed integer arguments (n >= k, gcd(n,k) != 1, n < 1, ...).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One inequality of the closed-orbit conditions, with the numbers that decided it.
struct Inequality {
    std::string expression;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// (h, L) or derived quantity is not in the regime an operation needs.
/// Carries the inequalities that were checked so front ends can report them.
class InvalidRegimeError : public std::runtime_error {
public:
    InvalidRegimeError(const std::string& what, std::vector<Inequality> checks)
        : std::runtime_error(what), checks_(std::move(checks)) {}

    const std::vector<Inequality>& checks() const noexcept { return checks_; }

private:
    std::vector<Inequality> checks_;
};

/// A hypothesis of the periodic-solution theorem fails (T <= T*_n, k < k*, ...).
class HypothesisError : public std::runtime_error {
public:
    HypothesisError(std::string condition, const std::string& detail)
        : std::runtime_error("theorem hypothesis violated: " + condition + " (" + detail + ")"),
          condition_(std::move(condition)) {}

    const std::string& condition() const noexcept { return condition_; }

private:
    std::string condition_;
};

/// Custom perturbation table queried outside its sampled radius range.
class InterpolationDomainError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class IntegrationError : public std::runtime_error {
public:
    enum class Kind { NearCollision, StepUnderflow, TooManySteps };

    IntegrationError(Kind kind, const std::string& what, double time)
        : std::runtime_error(what), kind_(kind), time_(time) {}

    Kind kind() const noexcept { return kind_; }
    double time() const noexcept { return time_; }

private:
    Kind kind_;
    double time_;
};

/// Winding number requested on a trajectory that does not close on an integer turn count.
class NonIntegerWindingError : public std::runtime_error {
public:
    NonIntegerWindingError(const std::string& what, double turns)
        : std::runtime_error(what), turns_(turns) {}

    double turns() const noexcept { return turns_; }

private:
    double turns_;
};

}  // namespace relkep
