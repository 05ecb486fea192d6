#pragma once

#include <stdexcept>
#include <string>

namespace qreset {

/// Argument outside the domain of a closed-form relation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Numerical failure: step-size underflow, step budget, non-finite state.
class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An event function never crossed zero before the integration limit.
class EventNotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A root bracket could not be formed or was invalid.
class BracketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The target error lies below the fixed point of the largest allowed gap,
/// so no reset time is long enough.
class InfeasibleError : public std::runtime_error {
public:
    InfeasibleError(const std::string& what, double lambda_threshold)
        : std::runtime_error(what), lambda_threshold_(lambda_threshold) {}

    /// Smallest gap bound that would make the task feasible.
    double lambda_threshold() const noexcept { return lambda_threshold_; }

private:
    double lambda_threshold_;
};

/// The reset time is shorter than the fastest reachable reset.
class InaccessibleError : public std::runtime_error {
public:
    InaccessibleError(const std::string& what, double tau_min)
        : std::runtime_error(what), tau_min_(tau_min) {}

    /// Shortest achievable reset time (tau_c1).
    double tau_min() const noexcept { return tau_min_; }

private:
    double tau_min_;
};

} // namespace qreset
