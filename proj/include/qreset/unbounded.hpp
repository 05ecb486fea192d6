// Minimum-work reset without a bound on the gap.
//
// The optimal population obeys the Euler-Lagrange equation of the work
// functional J = -int p_dot * lambda_H dt with lambda_H eliminated through the
// population dynamics. The two-point problem p(0) = 1/2, p(tau) = eps is
// solved by shooting backward in time from (eps, s): the flow is integrated
// until p reaches 1/2, and the terminal slope s is adjusted until that takes
// exactly tau. Integrating toward p = 1/2 keeps the singular point of the
// equation at the very end of every shot.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "qreset/errors.hpp"
#include "qreset/model.hpp"
#include "qreset/ode.hpp"
#include "qreset/quadrature.hpp"
#include "qreset/types.hpp"

namespace qreset::unbounded {

/// Second derivative of p_e along an extremal of the work functional.
inline double el_rhs(double p_e, double p_dot) {
    const double edge = 2.0 * p_e * (1.0 - p_e) + p_dot;
    if (!(p_e > 0.0 && p_e < 0.5) || edge == 0.0) {
        throw DomainError("el_rhs: singular point (p_e=" + model::detail::fmt(p_e) +
                          ", p_dot=" + model::detail::fmt(p_dot) + ")");
    }
    const double v2 = p_dot * p_dot;
    const double numerator =
        (1.0 - 2.0 * p_e + 2.0 * p_e * p_e) * v2 + 2.0 * v2 * p_dot + 2.0 * v2 * v2;
    return numerator / ((1.0 - 2.0 * p_e) * edge);
}

/// First integral p_dot * dL/dp_dot - L of the autonomous Lagrangian
/// L = p_dot * ln((p_dot + p_e) / (p_dot + 1 - p_e)). Simplifies to
/// p_dot^2 (1 - 2 p_e) / ((p_dot + p_e)(p_dot + 1 - p_e)).
inline double beltrami_constant(double p_e, double p_dot) {
    if (!(p_e > 0.0 && p_e <= 0.5) || !(p_dot + p_e > 0.0)) {
        throw DomainError("beltrami_constant: inadmissible state (p_e=" +
                          model::detail::fmt(p_e) + ", p_dot=" + model::detail::fmt(p_dot) + ")");
    }
    return p_dot * p_dot * (1.0 - 2.0 * p_e) / ((p_dot + p_e) * (p_dot + 1.0 - p_e));
}

struct ShootingConfig {
    ode::IntegratorConfig integrator{};
    /// Accepted |shot duration - tau| is max(residual_tol, residual_rel_tol * tau);
    /// the integrated duration carries an error proportional to tau.
    double residual_tol = 1e-9;
    double residual_rel_tol = 1e-11;
    /// Number of uniform samples in the reported trajectory.
    std::size_t samples = 1000;
    /// The backward flow stops at p = 1/2 - event_gap; the remaining
    /// (linear) stretch is added analytically.
    double event_gap = 1e-9;
    int max_bracket_expansions = 40;
};

struct ShootingReport {
    double parameter = 0.0; ///< terminal slope p_dot(tau)
    double residual = 0.0;  ///< |shot duration - tau|
    int iterations = 0;
    double rel_tol = 0.0;
    double abs_tol = 0.0;
    double residual_tol = 0.0;
};

/// Euler-Lagrange flow integrated backward from the terminal state until
/// p = 1/2. Backward time sigma runs from 0 at the anchor. The state is
/// carried as (p, r) with margin r = p_dot + p_e > 0, so the gap
/// ln((r + 1 - 2p) / r) stays accurate when p_dot is close to -p_e.
struct BackwardArc {
    ode::SampledCurve<2> curve; ///< (p, r) against sigma
    double sigma_event = 0.0;   ///< where p reached 1/2 - event_gap
    double duration = 0.0;      ///< sigma_event plus the analytic remainder
    double p_event = 0.5;
    double r_event = 0.0;

    double v_event() const { return r_event - p_event; }

    /// (p, r) at backward time sigma in [0, duration].
    std::pair<double, double> margin_at(double sigma) const {
        if (sigma <= sigma_event) {
            const auto y = curve.at(sigma);
            return {y[0], y[1]};
        }
        const double v = v_event();
        const double p = std::min(0.5, p_event - v * (sigma - sigma_event));
        return {p, v + p};
    }

    /// (p, p_dot) at backward time sigma in [0, duration].
    PopulationState at(double sigma) const {
        const auto [p, r] = margin_at(sigma);
        return {p, r - p};
    }

    double gap(double sigma) const {
        const auto [p, r] = margin_at(sigma);
        return p >= 0.5 ? 0.0 : std::log((r + (1.0 - 2.0 * p)) / r);
    }
};

namespace detail {

inline ode::IntegratorConfig scaled_config(ode::IntegratorConfig cfg, double scale) {
    // Populations near eps can be far below abs_tol; keep them relative.
    cfg.abs_tol = std::min(cfg.abs_tol, cfg.rel_tol * scale);
    return cfg;
}

/// d/dsigma of (p, r); the margin derivative is factored so that no
/// cancellation occurs as r -> 0.
inline ode::State<2> backward_rhs(double, const ode::State<2>& y) {
    const double p = y[0];
    const double r = y[1];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (!(p > 0.0 && p < 0.5) || !(r > 0.0)) {
        return {nan, nan};
    }
    const double v = r - p;
    const double q = 4.0 * p * p - 3.0 * p * r - 4.0 * p + r * r + r + 1.0;
    const double d = (1.0 - 2.0 * p) * (r + p * (1.0 - 2.0 * p));
    return {-v, -2.0 * r * v * q / d};
}

inline double logistic(double w) { return 1.0 / (1.0 + std::exp(-w)); }

} // namespace detail

/// Integrate the Euler-Lagrange flow backward from (p_end, p_end + r_end)
/// until p_e reaches 1/2. Returns nullopt if that takes longer than
/// sigma_limit; throws IntegrationError if the flow runs into the
/// infinite-gap edge first.
inline std::optional<BackwardArc> integrate_backward_margin(double p_end, double r_end,
                                                            double sigma_limit,
                                                            const ShootingConfig& config) {
    const double target = 0.5 - config.event_gap;
    BackwardArc arc;
    if (p_end >= target) {
        arc.curve.ts = {0.0};
        arc.curve.ys = {{p_end, r_end}};
        arc.curve.event_time = 0.0;
        arc.sigma_event = 0.0;
        arc.p_event = std::min(p_end, 0.5);
        arc.r_event = r_end - p_end + arc.p_event;
        const double v = arc.v_event();
        arc.duration = v < 0.0 ? (0.5 - arc.p_event) / -v : 0.0;
        return arc;
    }
    const auto cfg = detail::scaled_config(config.integrator, std::min(p_end, r_end));
    auto event = [target](double, const ode::State<2>& y) { return y[0] - target; };
    try {
        arc.curve = ode::integrate_to_event(detail::backward_rhs, ode::State<2>{p_end, r_end}, 0.0,
                                            event, ode::Crossing::Rising, cfg, sigma_limit);
    } catch (const EventNotFoundError&) {
        return std::nullopt;
    }
    arc.sigma_event = *arc.curve.event_time;
    arc.p_event = arc.curve.back()[0];
    arc.r_event = arc.curve.back()[1];
    arc.duration = arc.sigma_event + (0.5 - arc.p_event) / -arc.v_event();
    return arc;
}

/// Same flow from (p_end, v_end) with v_end > -p_end.
inline std::optional<BackwardArc> integrate_backward(double p_end, double v_end, double sigma_limit,
                                                     const ShootingConfig& config) {
    return integrate_backward_margin(p_end, v_end + p_end, sigma_limit, config);
}

/// Trajectory point at forward time t of an arc whose anchor sits at t_anchor.
inline TrajectoryPoint arc_point(const BackwardArc& arc, double t, double t_anchor) {
    const double sigma = std::max(0.0, t_anchor - t);
    const PopulationState s = arc.at(sigma);
    return {t, s.p_e, s.p_dot, arc.gap(sigma)};
}

struct UnboundedSolution {
    Trajectory trajectory;
    ShootingReport report;
    std::shared_ptr<const BackwardArc> arc;
};

/// Shortest reset time reachable at all: the gap -> infinity limit where
/// p_e decays as e^-t from 1/2.
inline double speed_limit_time(double epsilon) { return std::log(0.5 / epsilon); }

/// Uniformly sampled trajectory on [0, tau] from an arc anchored at tau.
inline Trajectory sample_arc(std::shared_ptr<const BackwardArc> arc, double tau,
                             std::size_t samples) {
    Trajectory traj;
    const std::size_t n = std::max<std::size_t>(samples, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = i + 1 == n ? tau : tau * static_cast<double>(i) / (n - 1);
        TrajectoryPoint pt = arc_point(*arc, t, tau);
        if (i == 0) {
            pt.p_e = 0.5;
            pt.lambda_H = 0.0;
        }
        traj.push_back(pt);
    }
    traj.dense = [arc, tau](double t) { return arc_point(*arc, t, tau); };
    const double tail_start = tau - arc->sigma_event;
    if (tail_start > 0.0) {
        traj.breaks.push_back(tail_start);
    }
    return traj;
}

/// Solve the unbounded minimum-work reset for (tau, epsilon).
inline UnboundedSolution solve_unbounded(const ResetTask& task, const ShootingConfig& config = {}) {
    task.validate();
    if (task.lambda_max) {
        throw DomainError("solve_unbounded: task carries a gap bound; use the bounded solver");
    }
    const double eps = task.epsilon;
    const double tau = task.tau;
    const double t_min = speed_limit_time(eps);
    if (!(tau > t_min)) {
        std::ostringstream os;
        os.precision(12);
        os << "reset time " << tau << " is below the infinite-gap limit ln(1/(2 eps)) = " << t_min;
        throw InaccessibleError(os.str(), t_min);
    }

    // Terminal margin r = eps * u with u = logistic(w) in (0, 1): u -> 0 is
    // the infinite-gap edge, u -> 1 the stationary edge. The slope is r - eps.
    auto margin = [eps](double w) { return eps * detail::logistic(w); };
    const double limit = 4.0 * tau + 10.0;
    auto residual = [&](double w) {
        try {
            const auto arc = integrate_backward_margin(eps, margin(w), limit, config);
            return (arc ? arc->duration : limit) - tau;
        } catch (const IntegrationError&) {
            // ran into the infinite-gap edge: a shot that is too fast
            return -tau;
        }
    };

    const double logit_lo = std::log(1e-3 / (1.0 - 1e-3));
    const double logit_hi = std::log((1.0 - 1e-6) / 1e-6);
    double w_lo = logit_lo, w_hi = logit_hi;
    double r_lo = residual(w_lo);
    for (int k = 0; r_lo >= 0.0 && k < config.max_bracket_expansions; ++k) {
        w_lo -= std::log(10.0);
        r_lo = residual(w_lo);
    }
    double r_hi = residual(w_hi);
    for (int k = 0; r_hi <= 0.0 && k < config.max_bracket_expansions; ++k) {
        w_hi += std::log(10.0);
        r_hi = residual(w_hi);
    }
    if (r_lo >= 0.0 || r_hi <= 0.0) {
        std::ostringstream os;
        os.precision(12);
        os << "solve_unbounded: could not bracket the terminal slope for tau=" << tau
           << ", eps=" << eps << "; scanned s in [" << margin(w_lo) - eps << ", " << margin(w_hi) - eps
           << "] with residuals " << r_lo << ", " << r_hi;
        throw BracketError(os.str());
    }

    ode::RootOptions ropt;
    const double accept = std::max(config.residual_tol, config.residual_rel_tol * tau);
    ropt.f_tol = accept;
    ropt.x_tol = 1e-13 * std::max(1.0, std::abs(w_lo) + std::abs(w_hi));
    const ode::RootResult root = ode::find_root(residual, w_lo, w_hi, ropt);

    const double r_end = margin(root.root);
    auto arc = integrate_backward_margin(eps, r_end, limit, config);
    if (!arc) {
        throw IntegrationError("solve_unbounded: converged shot failed to reach p_e = 1/2");
    }
    auto shared = std::make_shared<const BackwardArc>(std::move(*arc));

    UnboundedSolution sol;
    sol.report.parameter = r_end - eps;
    sol.report.residual = std::abs(shared->duration - tau);
    sol.report.iterations = root.iterations;
    sol.report.rel_tol = config.integrator.rel_tol;
    sol.report.abs_tol = config.integrator.abs_tol;
    sol.report.residual_tol = accept;
    if (sol.report.residual > accept) {
        std::ostringstream os;
        os.precision(12);
        os << "solve_unbounded: shooting residual " << sol.report.residual << " above tolerance "
           << accept;
        throw IntegrationError(os.str());
    }
    sol.trajectory = sample_arc(shared, tau, config.samples);
    sol.arc = std::move(shared);
    return sol;
}

/// Work objective J = -int_0^tau p_dot * lambda_H dt. Uses adaptive
/// quadrature on the dense solution when available, the trapezoid rule on
/// the samples otherwise.
inline double objective(const Trajectory& traj, const ode::QuadratureOptions& opt = {}) {
    if (traj.size() < 2) {
        return 0.0;
    }
    if (traj.dense) {
        auto integrand = [&](double t) {
            const TrajectoryPoint pt = traj.dense(t);
            return -pt.p_dot * pt.lambda_H;
        };
        return ode::integrate_adaptive(integrand, traj.ts.front(), traj.ts.back(), opt, traj.breaks)
            .value;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        const double a = -traj.p_dot[i] * traj.lambda_H[i];
        const double b = -traj.p_dot[i + 1] * traj.lambda_H[i + 1];
        sum += 0.5 * (a + b) * (traj.ts[i + 1] - traj.ts[i]);
    }
    return sum;
}

/// W_ex = J - (ln 2 - S(eps)).
inline double extra_work(double J, double epsilon) {
    return J - model::quasistatic_work(epsilon);
}

inline WorkBreakdown work_breakdown(const Trajectory& traj, double epsilon) {
    return WorkBreakdown::from_objective(objective(traj), traj.lambda_H.back(), epsilon);
}

} // namespace qreset::unbounded
