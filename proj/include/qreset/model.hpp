// Closed-form relations for a two-level system under a controllable gap,
// coupled to a thermal bath.
//
// Units: every energy is dimensionless (beta * lambda), every time is
// dimensionless (gamma * t) and work is reported in multiples of 1/beta.
// Only the excited-state population p_e is tracked; p_g = 1 - p_e.

#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "qreset/errors.hpp"

namespace qreset::model {

namespace detail {

inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

inline void require_positive_gap(double lambda, const char* who) {
    if (!(lambda > 0.0) || std::isnan(lambda)) {
        throw DomainError(std::string(who) + ": gap must be > 0, got " + fmt(lambda));
    }
}

inline void require_error_range(double epsilon, const char* who) {
    if (!(epsilon > 0.0 && epsilon < 0.5)) {
        throw DomainError(std::string(who) + ": reset error must lie in (0, 1/2), got " +
                          fmt(epsilon));
    }
}

} // namespace detail

/// Bose occupation n = 1 / (e^lambda - 1) of the bath mode at gap lambda.
inline double mean_phonon(double lambda) {
    detail::require_positive_gap(lambda, "mean_phonon");
    // e^-l / (1 - e^-l) never overflows; for l > 745 it returns exactly 0.
    const double decay = std::exp(-lambda);
    return decay / -std::expm1(-lambda);
}

/// Relaxation rate 2n + 1 = coth(lambda / 2) at a constant gap.
inline double relaxation_rate(double lambda) {
    detail::require_positive_gap(lambda, "relaxation_rate");
    return 1.0 / std::tanh(0.5 * lambda);
}

/// Thermal excited population e^-l / (1 + e^-l) = n / (2n + 1).
inline double equilibrium_population(double lambda) {
    detail::require_positive_gap(lambda, "equilibrium_population");
    const double decay = std::exp(-lambda);
    return decay / (1.0 + decay);
}

/// Gap whose equilibrium population equals epsilon: ln((1 - eps) / eps).
inline double lambda_for_error(double epsilon) {
    detail::require_error_range(epsilon, "lambda_for_error");
    return std::log1p(-epsilon) - std::log(epsilon);
}

/// Rate dp_e/dt under gap lambda_H:
/// (e^-l (1 - p) - p) / (1 - e^-l) = n - (2n + 1) p.
inline double master_rhs(double p_e, double lambda_H) {
    if (!(p_e > 0.0 && p_e < 1.0)) {
        throw DomainError("master_rhs: population must lie in (0, 1), got " + detail::fmt(p_e));
    }
    detail::require_positive_gap(lambda_H, "master_rhs");
    const double decay = std::exp(-lambda_H);
    return (decay * (1.0 - p_e) - p_e) / -std::expm1(-lambda_H);
}

/// Gap that produces the rate p_dot at population p_e; inverse of master_rhs
/// in its second argument: -ln((p_dot + p_e) / (p_dot + 1 - p_e)).
///
/// At p_e = 1/2 every admissible rate maps to gap 0; that value is returned
/// as the continuity limit used at the start of a reset.
inline double invert_control(double p_e, double p_dot) {
    if (!(p_e > 0.0 && p_e <= 0.5)) {
        throw DomainError("invert_control: population must lie in (0, 1/2], got " +
                          detail::fmt(p_e));
    }
    const double lower = p_dot + p_e;
    if (!(lower > 0.0)) {
        throw DomainError("invert_control: p_dot + p_e must be > 0 (got p_e=" + detail::fmt(p_e) +
                          ", p_dot=" + detail::fmt(p_dot) + "); no finite gap exists");
    }
    if (p_e == 0.5) {
        return 0.0;
    }
    return std::log(p_dot + 1.0 - p_e) - std::log(lower);
}

/// Time derivative of the gap along an optimal (Euler-Lagrange) trajectory,
/// expressed through the instantaneous population and gap.
inline double control_rate(double p_e, double lambda_H) {
    if (!(p_e > 0.0 && p_e < 0.5)) {
        throw DomainError("control_rate: population must lie in (0, 1/2), got " +
                          detail::fmt(p_e));
    }
    detail::require_positive_gap(lambda_H, "control_rate");
    const double decay = std::exp(-lambda_H);
    const double one_minus = -std::expm1(-lambda_H);
    const double numerator = 2.0 * (1.0 - p_e * (1.0 + decay)) * (p_e - decay * (1.0 - p_e));
    const double denominator =
        (1.0 - 2.0 * p_e) * (p_e * one_minus + decay) * one_minus;
    return numerator / denominator;
}

/// Population under a constant gap lambda_m, passing through p_start at
/// t_start. Valid on both sides of t_start, so it serves both as the forward
/// relaxation from p = 1/2 and as the tail anchored at p(tau) = epsilon.
inline double relaxation_solution(double t, double p_start, double t_start, double lambda_m) {
    detail::require_positive_gap(lambda_m, "relaxation_solution");
    const double rate = relaxation_rate(lambda_m);
    const double p_inf = equilibrium_population(lambda_m);
    return p_inf + (p_start - p_inf) * std::exp(-rate * (t - t_start));
}

/// Shannon entropy (natural log) of the two-point distribution {eps, 1 - eps}.
inline double shannon_entropy(double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw DomainError("shannon_entropy: probability must lie in [0, 1], got " +
                          detail::fmt(epsilon));
    }
    auto term = [](double x) { return x > 0.0 ? -x * std::log(x) : 0.0; };
    return term(epsilon) + term(1.0 - epsilon);
}

/// Free-energy change ln 2 - S(eps) of a quasistatic reset to error eps.
inline double quasistatic_work(double epsilon) {
    detail::require_error_range(epsilon, "quasistatic_work");
    return std::log(2.0) - shannon_entropy(epsilon);
}

} // namespace qreset::model
