#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qreset/errors.hpp"
#include "qreset/model.hpp"

namespace qreset {

/// A reset problem: reach p_e(tau) = epsilon from p_e(0) = 1/2, optionally
/// with the gap confined to [0, lambda_max].
struct ResetTask {
    double tau = 0.0;
    double epsilon = 0.0;
    std::optional<double> lambda_max;

    void validate() const {
        if (!(tau > 0.0) || !std::isfinite(tau)) {
            throw DomainError("ResetTask: tau must be a finite value > 0");
        }
        if (!(epsilon > 0.0 && epsilon < 0.5)) {
            throw DomainError("ResetTask: epsilon must lie in (0, 1/2)");
        }
        if (lambda_max && !(*lambda_max > 0.0)) {
            throw DomainError("ResetTask: lambda_max must be > 0");
        }
    }
};

struct PopulationState {
    double p_e = 0.0;
    double p_dot = 0.0;
};

struct TrajectoryPoint {
    double t = 0.0;
    double p_e = 0.0;
    double p_dot = 0.0;
    double lambda_H = 0.0;
};

/// Sampled time series on [0, tau]. When `dense` is set it evaluates the
/// underlying continuous solution anywhere in [0, tau]; `breaks` lists times
/// where the control may have a kink.
struct Trajectory {
    std::vector<double> ts;
    std::vector<double> p_e;
    std::vector<double> p_dot;
    std::vector<double> lambda_H;
    std::function<TrajectoryPoint(double)> dense;
    std::vector<double> breaks;

    std::size_t size() const { return ts.size(); }
    double duration() const { return ts.empty() ? 0.0 : ts.back() - ts.front(); }

    void push_back(const TrajectoryPoint& pt) {
        ts.push_back(pt.t);
        p_e.push_back(pt.p_e);
        p_dot.push_back(pt.p_dot);
        lambda_H.push_back(pt.lambda_H);
    }

    TrajectoryPoint point(std::size_t i) const { return {ts[i], p_e[i], p_dot[i], lambda_H[i]}; }
};

/// Work bookkeeping of the two-step reset, in units of 1/beta.
struct WorkBreakdown {
    double J = 0.0;
    std::optional<double> J1; ///< free (Euler-Lagrange) part, bounded solves only
    std::optional<double> J2; ///< boundary part, bounded solves only
    double W_sc1 = 0.0;       ///< first step (population reduction)
    double W_qa2 = 0.0;       ///< second step (quench back to zero gap)
    double W_sc = 0.0;
    double W_qs = 0.0;
    double W_ex = 0.0;

    /// Bookkeeping for a total objective J ending at gap lambda_final.
    static WorkBreakdown from_objective(double J, double lambda_final, double epsilon) {
        WorkBreakdown w;
        w.J = J;
        w.W_sc1 = J + lambda_final * (epsilon - 0.5);
        w.W_qa2 = -lambda_final * (epsilon - 0.5);
        w.W_sc = w.W_sc1 + w.W_qa2;
        w.W_qs = model::quasistatic_work(epsilon);
        w.W_ex = J - w.W_qs;
        return w;
    }
};

} // namespace qreset
