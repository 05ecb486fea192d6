// Forward simulation of arbitrary gap protocols and a second, independent
// work computation used to close the loop on optimizer output.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "qreset/errors.hpp"
#include "qreset/model.hpp"
#include "qreset/ode.hpp"
#include "qreset/protocol.hpp"
#include "qreset/types.hpp"

namespace qreset::verify {

struct SimulateConfig {
    ode::IntegratorConfig integrator{};
    std::size_t samples = 1000;
    /// Gap used in place of values below it when evaluating the rate; the
    /// quench value lambda(0) = 0 makes the rate 0/0.
    double gap_floor = 1e-12;
};

/// Integrate the population dynamics under the protocol from p0 at t = 0.
inline Trajectory simulate(const ControlProtocol& protocol, double p0,
                           const SimulateConfig& cfg = {}) {
    protocol.validate();
    if (!(p0 > 0.0 && p0 < 1.0)) {
        throw DomainError("simulate: p0 must lie in (0, 1)");
    }
    const double tau = protocol.total_duration();
    auto proto = std::make_shared<const ControlProtocol>(protocol);
    const double floor = cfg.gap_floor;
    auto gap = [proto, floor](double t) { return std::max(proto->gap_at(t), floor); };

    Trajectory traj;
    if (!(tau > 0.0)) {
        traj.push_back({0.0, p0, 0.0, protocol.gap_at(0.0)});
        return traj;
    }

    ode::IntegratorConfig icfg = cfg.integrator;
    // p_e stays positive and may end many decades below p0: control the
    // error relative to it.
    icfg.abs_tol = std::numeric_limits<double>::min();

    // Integrate kink to kink so every step sees a smooth gap.
    std::vector<double> knots = protocol.kinks();
    knots.erase(std::remove_if(knots.begin(), knots.end(),
                               [tau](double t) { return !(t > 0.0 && t < tau); }),
                knots.end());
    knots.insert(knots.begin(), 0.0);
    knots.push_back(tau);

    auto curve = std::make_shared<ode::SampledCurve<1>>();
    ode::State<1> y{p0};
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double a = knots[i];
        const double b = knots[i + 1];
        if (!(b > a)) continue;
        // Stay on the segment owning (a, b) even when a stage lands on b.
        const double last = std::nextafter(b, a);
        auto rhs = [&](double t, const ode::State<1>& s) -> ode::State<1> {
            const double p = s[0];
            if (!(p > 0.0 && p < 1.0)) return {std::nan("")};
            return {model::master_rhs(p, gap(std::clamp(t, a, last)))};
        };
        const auto piece = ode::integrate<1>(rhs, y, {a, b}, icfg);
        curve->append(piece);
        y = piece.back();
    }

    auto point = [curve, gap](double t) -> TrajectoryPoint {
        const double p = curve->at(t)[0];
        const double l = gap(t);
        return {t, p, model::master_rhs(p, l), l};
    };
    const std::size_t n = std::max<std::size_t>(cfg.samples, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = i + 1 == n ? tau : tau * static_cast<double>(i) / (n - 1);
        TrajectoryPoint pt = point(t);
        pt.lambda_H = protocol.gap_at(t);
        traj.push_back(pt);
    }
    traj.dense = point;
    traj.breaks.assign(knots.begin() + 1, knots.end() - 1);
    return traj;
}

/// Final excited population.
inline double reset_error(const Trajectory& traj) {
    if (traj.p_e.empty()) {
        throw DomainError("reset_error: empty trajectory");
    }
    return traj.p_e.back();
}

struct StieltjesOptions {
    /// Per-panel tolerance; only panels near non-smooth points get refined.
    double panel_tol = 1e-13;
    int max_depth = 48;
};

namespace detail {

inline double stieltjes_panel(const TrajectoryPoint& a, const TrajectoryPoint& b) {
    return (0.5 * (a.p_e + b.p_e) - 0.5) * (b.lambda_H - a.lambda_H);
}

template <class Dense>
double stieltjes_refine(const Dense& dense, const TrajectoryPoint& a, const TrajectoryPoint& b,
                        double coarse, double tol, int depth) {
    const double m = 0.5 * (a.t + b.t);
    if (depth <= 0 || !(m > a.t && m < b.t)) {
        return coarse;
    }
    const TrajectoryPoint mid = dense(m);
    const double left = stieltjes_panel(a, mid);
    const double right = stieltjes_panel(mid, b);
    const double fine = left + right;
    if (std::abs(fine - coarse) <= 3.0 * tol) {
        return fine + (fine - coarse) / 3.0;
    }
    return stieltjes_refine(dense, a, mid, left, tol, depth - 1) +
           stieltjes_refine(dense, mid, b, right, tol, depth - 1);
}

} // namespace detail

/// First-step work int (p_e - 1/2) d(lambda_H) as a Stieltjes sum over the
/// samples, refined adaptively on the dense solution when one is attached.
/// Starts from lambda_H(0) as sampled; with the quench convention that is 0.
inline double stieltjes_work(const Trajectory& traj, const StieltjesOptions& opt = {}) {
    if (traj.size() < 2) {
        return 0.0;
    }
    // Sample grid plus kinks: both sides of a kink are sampled exactly.
    std::vector<double> grid = traj.ts;
    grid.insert(grid.end(), traj.breaks.begin(), traj.breaks.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    double sum = 0.0;
    if (!traj.dense) {
        for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
            sum += detail::stieltjes_panel(traj.point(i), traj.point(i + 1));
        }
        return sum;
    }
    TrajectoryPoint prev = traj.point(0);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        // the right end of a panel uses the left limit of the dense solution
        TrajectoryPoint next = traj.dense(std::nextafter(grid[i], grid[i - 1]));
        next.t = grid[i];
        sum += detail::stieltjes_refine(traj.dense, prev, next, detail::stieltjes_panel(prev, next),
                                        opt.panel_tol, opt.max_depth);
        prev = traj.dense(grid[i]);
    }
    return sum;
}

/// Total work of the two-step reset computed without J: the Stieltjes
/// first-step work plus the quench term -lambda_H(tau) (p_e(tau) - 1/2).
inline double work_direct(const Trajectory& traj, const StieltjesOptions& opt = {}) {
    if (traj.size() < 2) {
        return 0.0;
    }
    const double quench = -traj.lambda_H.back() * (traj.p_e.back() - 0.5);
    return stieltjes_work(traj, opt) + quench;
}

} // namespace qreset::verify
