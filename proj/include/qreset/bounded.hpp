// Minimum-work reset with the gap confined to [0, lambda_max].
//
// Once an optimal gap reaches the bound it stays there, so a bounded optimum
// is an Euler-Lagrange arc on [0, t*] followed by constant lambda_max on
// [t*, tau]. Depending on tau the task is inaccessible (tau < tau_c1),
// touched (tau_c1 <= tau < tau_c2) or untouched (tau >= tau_c2, identical to
// the unbounded optimum).

#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "qreset/errors.hpp"
#include "qreset/model.hpp"
#include "qreset/ode.hpp"
#include "qreset/protocol.hpp"
#include "qreset/quadrature.hpp"
#include "qreset/types.hpp"
#include "qreset/unbounded.hpp"

namespace qreset::bounded {

enum class CaseKind { Inaccessible, Touched, Untouched };

inline std::string to_string(CaseKind kind) {
    switch (kind) {
    case CaseKind::Inaccessible: return "inaccessible";
    case CaseKind::Touched: return "touched";
    case CaseKind::Untouched: return "untouched";
    }
    return "unknown";
}

struct CaseLabel {
    CaseKind kind = CaseKind::Untouched;
    std::optional<double> t_star; ///< set for Touched
    double tau_c1 = 0.0;
    std::optional<double> tau_c2; ///< set when requested
};

/// Throws InfeasibleError unless epsilon lies above the fixed point of
/// lambda_m, i.e. lambda_m > ln((1 - eps) / eps).
inline void require_feasible(double lambda_m, double epsilon) {
    if (!(lambda_m > 0.0)) {
        throw DomainError("gap bound must be > 0");
    }
    model::detail::require_error_range(epsilon, "require_feasible");
    if (!(epsilon > model::equilibrium_population(lambda_m))) {
        const double threshold = model::lambda_for_error(epsilon);
        std::ostringstream os;
        os.precision(12);
        os << "infeasible: eps=" << epsilon << " is not above the equilibrium population of the bound "
           << "lambda_max=" << lambda_m << "; need lambda_max > " << threshold;
        throw InfeasibleError(os.str(), threshold);
    }
}

/// Shortest reset time under the bound: the gap held at lambda_m throughout.
inline double tau_c1(double lambda_m, double epsilon) {
    require_feasible(lambda_m, epsilon);
    const double n = model::mean_phonon(lambda_m);
    const double rate = 2.0 * n + 1.0;
    return std::log(1.0 / (2.0 * (epsilon * rate - n))) / rate;
}

/// Final gap of the unbounded optimum for (tau, epsilon).
inline double unbounded_terminal_gap(double tau, double epsilon,
                                     const unbounded::ShootingConfig& cfg = {}) {
    return unbounded::solve_unbounded({tau, epsilon, std::nullopt}, cfg).trajectory.lambda_H.back();
}

struct CriticalTimeOptions {
    unbounded::ShootingConfig shooting{};
    int max_doublings = 30;
    double rel_tol = 1e-10;
};

/// Reset time at which the unbounded optimum ends exactly on the bound.
inline double tau_c2(double lambda_m, double epsilon, const CriticalTimeOptions& opt = {}) {
    const double t1 = tau_c1(lambda_m, epsilon);
    auto g = [&](double tau) { return unbounded_terminal_gap(tau, epsilon, opt.shooting) - lambda_m; };
    double lo = t1;
    double hi = 2.0 * t1;
    double g_hi = g(hi);
    int k = 0;
    for (; g_hi > 0.0 && k < opt.max_doublings; ++k) {
        lo = hi;
        hi *= 2.0;
        g_hi = g(hi);
    }
    if (g_hi > 0.0) {
        std::ostringstream os;
        os.precision(12);
        os << "tau_c2: terminal gap stays above lambda_max=" << lambda_m << " for tau in [" << t1
           << ", " << hi << "]";
        throw BracketError(os.str());
    }
    ode::RootOptions ropt;
    ropt.x_tol = opt.rel_tol * hi;
    ropt.f_tol = 1e-12;
    // g(lo) > 0 holds at tau_c1 and at every scanned point below hi.
    return ode::find_root(g, lo, hi, ropt).root;
}

struct BoundedConfig {
    unbounded::ShootingConfig shooting{};
    double t_star_tol = 1e-9;
};

struct TouchSearch {
    double t_star = 0.0;
    double residual = 0.0;
    int iterations = 0;
    std::shared_ptr<const unbounded::BackwardArc> arc;
};

namespace detail {

inline TouchSearch find_touch_time(const ResetTask& task, double t1, const BoundedConfig& cfg) {
    const double lm = *task.lambda_max;
    const double eps = task.epsilon;
    const double tau = task.tau;
    const double limit = 4.0 * tau + 10.0;
    auto shoot = [&](double t_star) {
        const double p = std::min(model::relaxation_solution(t_star, eps, tau, lm), 0.5);
        // on the bound p_dot + p = n (1 - 2p)
        const double r = model::mean_phonon(lm) * (1.0 - 2.0 * p);
        return unbounded::integrate_backward_margin(p, r, limit, cfg.shooting);
    };
    auto residual = [&](double t_star) {
        const auto arc = shoot(t_star);
        return (arc ? arc->duration : limit) - t_star;
    };
    const double lo = std::max(0.0, tau - t1);
    ode::RootOptions ropt;
    ropt.x_tol = cfg.t_star_tol;
    ropt.f_tol = 1e-12;
    const ode::RootResult root = ode::find_root(residual, lo, tau, ropt);
    auto arc = shoot(root.root);
    if (!arc) {
        throw IntegrationError("touch-time search: converged arc did not reach p_e = 1/2");
    }
    TouchSearch out;
    out.t_star = root.root;
    out.residual = std::abs(arc->duration - root.root);
    out.iterations = root.iterations;
    out.arc = std::make_shared<const unbounded::BackwardArc>(std::move(*arc));
    return out;
}

} // namespace detail

struct ClassifyOptions {
    BoundedConfig solver{};
    bool with_tau_c2 = true;
    /// Solve for the touch time of touched tasks.
    bool with_t_star = true;
};

/// Case of a bounded task. Touched versus untouched is read off the final gap
/// of the unbounded optimum at tau (touched iff it exceeds the bound); the
/// touch time is solved for touched tasks.
inline CaseLabel classify(const ResetTask& task, const ClassifyOptions& opt = {}) {
    task.validate();
    if (!task.lambda_max) {
        throw DomainError("classify: task has no gap bound");
    }
    const double lm = *task.lambda_max;
    CaseLabel label;
    label.tau_c1 = tau_c1(lm, task.epsilon);
    if (opt.with_tau_c2) {
        CriticalTimeOptions copt;
        copt.shooting = opt.solver.shooting;
        label.tau_c2 = tau_c2(lm, task.epsilon, copt);
    }
    if (task.tau < label.tau_c1) {
        label.kind = CaseKind::Inaccessible;
        return label;
    }
    if (unbounded_terminal_gap(task.tau, task.epsilon, opt.solver.shooting) <= lm) {
        label.kind = CaseKind::Untouched;
        return label;
    }
    label.kind = CaseKind::Touched;
    if (opt.with_t_star) {
        label.t_star = detail::find_touch_time(task, label.tau_c1, opt.solver).t_star;
    }
    return label;
}

struct BoundedSolution {
    ControlProtocol protocol;
    Trajectory trajectory;
    CaseLabel label;
    WorkBreakdown work;
    /// Present when the task is untouched and the unbounded solver was used.
    std::optional<unbounded::ShootingReport> shooting;
    /// Touch-time search diagnostics, touched tasks only.
    std::optional<TouchSearch> touch;
    double lambda_max = 0.0;
    double epsilon = 0.0;
};

/// J split at the touch time: J1 over the free arc, J2 over the bound.
struct SplitObjective {
    double J1 = 0.0;
    double J2 = 0.0;
    double J = 0.0;
};

inline SplitObjective bounded_objective(const BoundedSolution& sol,
                                        const ode::QuadratureOptions& opt = {}) {
    SplitObjective out;
    if (sol.label.kind != CaseKind::Touched || !sol.touch) {
        out.J1 = unbounded::objective(sol.trajectory, opt);
        out.J = out.J1;
        return out;
    }
    const double t_star = sol.touch->t_star;
    const auto& arc = *sol.touch->arc;
    if (t_star > 0.0) {
        auto integrand = [&](double t) {
            const TrajectoryPoint pt = unbounded::arc_point(arc, t, t_star);
            return -pt.p_dot * pt.lambda_H;
        };
        std::vector<double> breaks;
        if (t_star - arc.sigma_event > 0.0) breaks.push_back(t_star - arc.sigma_event);
        out.J1 = ode::integrate_adaptive(integrand, 0.0, t_star, opt, breaks).value;
    }
    const double p_star = arc.at(0.0).p_e;
    out.J2 = sol.lambda_max * (p_star - sol.epsilon);
    out.J = out.J1 + out.J2;
    return out;
}

/// Optimal protocol of a touched task.
inline BoundedSolution solve_touched(const ResetTask& task, const BoundedConfig& cfg = {}) {
    task.validate();
    if (!task.lambda_max) {
        throw DomainError("solve_touched: task has no gap bound");
    }
    const double lm = *task.lambda_max;
    const double eps = task.epsilon;
    const double tau = task.tau;
    BoundedSolution sol;
    sol.lambda_max = lm;
    sol.epsilon = eps;
    sol.label.tau_c1 = tau_c1(lm, eps);
    if (tau < sol.label.tau_c1 || unbounded_terminal_gap(tau, eps, cfg.shooting) <= lm) {
        std::ostringstream os;
        os.precision(12);
        os << "solve_touched: tau=" << tau << " is not in the touched range (tau_c1="
           << sol.label.tau_c1 << ")";
        throw DomainError(os.str());
    }
    TouchSearch touch = detail::find_touch_time(task, sol.label.tau_c1, cfg);
    sol.label.kind = CaseKind::Touched;
    sol.label.t_star = touch.t_star;
    const double t_star = touch.t_star;
    auto arc = touch.arc;

    if (t_star > 0.0) {
        sol.protocol.segments.push_back(FunctionGap{
            [arc, t_star](double t) { return unbounded::arc_point(*arc, t, t_star).lambda_H; },
            t_star});
    }
    sol.protocol.segments.push_back(ConstantGap{lm, tau - t_star});

    auto point = [arc, t_star, eps, tau, lm](double t) -> TrajectoryPoint {
        if (t < t_star) {
            return unbounded::arc_point(*arc, t, t_star);
        }
        const double p = model::relaxation_solution(t, eps, tau, lm);
        return {t, p, model::master_rhs(std::min(p, 0.5), lm), lm};
    };
    const std::size_t n = std::max<std::size_t>(cfg.shooting.samples, 2);
    bool star_done = t_star <= 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = i + 1 == n ? tau : tau * static_cast<double>(i) / (n - 1);
        if (!star_done && t >= t_star) {
            if (t > t_star) sol.trajectory.push_back(point(t_star));
            star_done = true;
        }
        TrajectoryPoint pt = point(t);
        if (i == 0) {
            pt.p_e = 0.5;
            if (t_star > 0.0) pt.lambda_H = 0.0;
        }
        sol.trajectory.push_back(pt);
    }
    sol.trajectory.dense = point;
    if (t_star - arc->sigma_event > 0.0) sol.trajectory.breaks.push_back(t_star - arc->sigma_event);
    sol.trajectory.breaks.push_back(t_star);

    sol.touch = std::move(touch);
    const SplitObjective split = bounded_objective(sol);
    sol.work = WorkBreakdown::from_objective(split.J, lm, eps);
    sol.work.J1 = split.J1;
    sol.work.J2 = split.J2;
    return sol;
}

/// Optimal bounded protocol for any accessible task. Untouched tasks return
/// the unbounded solution unchanged.
inline BoundedSolution solve_bounded(const ResetTask& task, const BoundedConfig& cfg = {}) {
    task.validate();
    if (!task.lambda_max) {
        throw DomainError("solve_bounded: task has no gap bound");
    }
    const double lm = *task.lambda_max;
    const double t1 = tau_c1(lm, task.epsilon);
    if (task.tau < t1) {
        std::ostringstream os;
        os.precision(12);
        os << "inaccessible: tau=" << task.tau << " is below tau_c1=" << t1;
        throw InaccessibleError(os.str(), t1);
    }
    auto free = unbounded::solve_unbounded({task.tau, task.epsilon, std::nullopt}, cfg.shooting);
    if (free.trajectory.lambda_H.back() > lm) {
        return solve_touched(task, cfg);
    }
    BoundedSolution sol;
    sol.lambda_max = lm;
    sol.epsilon = task.epsilon;
    sol.label.kind = CaseKind::Untouched;
    sol.label.tau_c1 = t1;
    sol.work = unbounded::work_breakdown(free.trajectory, task.epsilon);
    sol.shooting = free.report;
    sol.protocol.segments.push_back(FunctionGap{
        [dense = free.trajectory.dense](double t) { return dense(t).lambda_H; }, task.tau});
    sol.trajectory = std::move(free.trajectory);
    return sol;
}

/// Extra work in the tau -> tau_c1 limit, where the whole reset runs at the
/// bound: lambda_m (1/2 - eps) - (ln 2 - S(eps)).
inline double max_extra_work(double lambda_m, double epsilon) {
    require_feasible(lambda_m, epsilon);
    return lambda_m * (0.5 - epsilon) - model::quasistatic_work(epsilon);
}

} // namespace qreset::bounded
