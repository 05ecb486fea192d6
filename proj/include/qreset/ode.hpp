// Explicit adaptive integration (Dormand-Prince 5(4) with continuous
// extension), event location on the dense output, and bracketed scalar
// root finding.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qreset/errors.hpp"

namespace qreset::ode {

template <std::size_t N>
using State = std::array<double, N>;

struct IntegratorConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 200000;
    double initial_step = 0.0; ///< 0 selects the step automatically

    void validate() const {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
            throw DomainError("IntegratorConfig: tolerances must be > 0");
        }
        if (!(max_step > 0.0) || max_steps == 0) {
            throw DomainError("IntegratorConfig: max_step and max_steps must be > 0");
        }
    }
};

/// One accepted step with its quartic interpolant.
template <std::size_t N>
struct DenseStep {
    double t0 = 0.0;
    double h = 0.0;
    std::array<State<N>, 5> coeff{};

    State<N> operator()(double t) const {
        const double theta = (t - t0) / h;
        const double theta1 = 1.0 - theta;
        State<N> y{};
        for (std::size_t i = 0; i < N; ++i) {
            y[i] = coeff[0][i] +
                   theta * (coeff[1][i] +
                            theta1 * (coeff[2][i] + theta * (coeff[3][i] + theta1 * coeff[4][i])));
        }
        return y;
    }
};

/// Integrated solution: accepted grid points plus dense output between them.
template <std::size_t N>
struct SampledCurve {
    std::vector<double> ts;
    std::vector<State<N>> ys;
    std::optional<double> event_time;
    std::vector<DenseStep<N>> steps;
    std::size_t rejected_steps = 0;

    double t_begin() const { return ts.front(); }
    double t_end() const { return ts.back(); }
    const State<N>& back() const { return ys.back(); }

    /// Dense evaluation; t is clamped to [t_begin, t_end].
    State<N> at(double t) const {
        if (steps.empty() || t <= ts.front()) {
            return ys.front();
        }
        if (t >= ts.back()) {
            return ys.back();
        }
        auto it = std::upper_bound(steps.begin(), steps.end(), t,
                                   [](double x, const DenseStep<N>& s) { return x < s.t0; });
        return std::prev(it)->operator()(t);
    }

    /// Concatenate a curve that starts where this one ends.
    void append(const SampledCurve& next) {
        if (ts.empty()) {
            *this = next;
            return;
        }
        ts.insert(ts.end(), next.ts.begin() + 1, next.ts.end());
        ys.insert(ys.end(), next.ys.begin() + 1, next.ys.end());
        steps.insert(steps.end(), next.steps.begin(), next.steps.end());
        rejected_steps += next.rejected_steps;
        event_time = next.event_time;
    }
};

enum class Crossing { Rising, Falling, Either };

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

template <std::size_t N>
bool all_finite(const State<N>& y) {
    return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

template <std::size_t N>
std::string describe(double t, const State<N>& y) {
    std::ostringstream os;
    os.precision(17);
    os << "t=" << t << ", y=(";
    for (std::size_t i = 0; i < N; ++i) {
        os << (i ? ", " : "") << y[i];
    }
    os << ")";
    return os.str();
}

template <std::size_t N>
double error_norm(const State<N>& err, const State<N>& y0, const State<N>& y1,
                  const IntegratorConfig& cfg) {
    double acc = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double scale = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double r = err[i] / scale;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(N));
}

template <std::size_t N, class Rhs>
double initial_step(Rhs& rhs, double t0, const State<N>& y0, const State<N>& f0, double span,
                    const IntegratorConfig& cfg) {
    State<N> scale{};
    for (std::size_t i = 0; i < N; ++i) {
        scale[i] = cfg.abs_tol + cfg.rel_tol * std::abs(y0[i]);
    }
    double dy = 0.0, df = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        dy += (y0[i] / scale[i]) * (y0[i] / scale[i]);
        df += (f0[i] / scale[i]) * (f0[i] / scale[i]);
    }
    dy = std::sqrt(dy / N);
    df = std::sqrt(df / N);
    double h0 = (dy < 1e-5 || df < 1e-5) ? 1e-6 : 0.01 * dy / df;
    h0 = std::min({h0, span, cfg.max_step});
    State<N> y1{};
    for (std::size_t i = 0; i < N; ++i) {
        y1[i] = y0[i] + h0 * f0[i];
    }
    const State<N> f1 = rhs(t0 + h0, y1);
    double d2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double r = (f1[i] - f0[i]) / scale[i];
        d2 += r * r;
    }
    if (!std::isfinite(d2)) {
        // The probe left the region where rhs is defined.
        return std::min(1e-2 * h0, cfg.max_step);
    }
    d2 = std::sqrt(d2 / N) / h0;
    const double dmax = std::max(df, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    return std::min({100.0 * h0, h1, span, cfg.max_step});
}

/// Core stepping loop. `on_step` is called after every accepted step with the
/// new dense step and returns a stop time if integration should end inside it.
template <std::size_t N, class Rhs, class OnStep>
SampledCurve<N> drive(Rhs&& rhs, const State<N>& y0, double t0, double t1,
                      const IntegratorConfig& cfg, OnStep&& on_step) {
    cfg.validate();
    SampledCurve<N> curve;
    curve.ts.push_back(t0);
    curve.ys.push_back(y0);

    State<N> k1 = rhs(t0, y0);
    if (!all_finite(k1)) {
        throw IntegrationError("non-finite derivative at initial state: " + describe(t0, y0));
    }
    const double span = t1 - t0;
    double h = cfg.initial_step > 0.0 ? std::min(cfg.initial_step, span)
                                      : initial_step(rhs, t0, y0, k1, span, cfg);
    double t = t0;
    State<N> y = y0;
    std::size_t steps = 0;

    while (t < t1) {
        if (++steps > cfg.max_steps) {
            throw IntegrationError("step budget of " + std::to_string(cfg.max_steps) +
                                   " exhausted at " + describe(t, y));
        }
        h = std::min(h, cfg.max_step);
        bool last = false;
        if (t + h >= t1 || t + 1.01 * h >= t1) {
            h = t1 - t;
            last = true;
        }
        const double h_min = 16.0 * std::numeric_limits<double>::epsilon() *
                             std::max(std::abs(t), 1.0);
        if (h < h_min) {
            throw IntegrationError("step size underflow at " + describe(t, y));
        }

        State<N> tmp{}, k2{}, k3{}, k4{}, k5{}, k6{}, k7{}, y_new{}, err{};
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * a21 * k1[i];
        k2 = rhs(t + c2 * h, tmp);
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        k3 = rhs(t + c3 * h, tmp);
        for (std::size_t i = 0; i < N; ++i)
            tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        k4 = rhs(t + c4 * h, tmp);
        for (std::size_t i = 0; i < N; ++i)
            tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        k5 = rhs(t + c5 * h, tmp);
        for (std::size_t i = 0; i < N; ++i)
            tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                 a65 * k5[i]);
        k6 = rhs(t + h, tmp);
        for (std::size_t i = 0; i < N; ++i)
            y_new[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                                   a76 * k6[i]);
        const double t_new = last ? t1 : t + h;
        k7 = rhs(t_new, y_new);
        for (std::size_t i = 0; i < N; ++i)
            err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                          e7 * k7[i]);

        double norm = error_norm(err, y, y_new, cfg);
        if (!std::isfinite(norm) || !all_finite(y_new) || !all_finite(k7)) {
            // A stage left the region where rhs is defined; retreat.
            h *= 0.25;
            ++curve.rejected_steps;
            continue;
        }
        if (norm > 1.0) {
            h *= std::max(0.2, 0.9 * std::pow(norm, -0.2));
            ++curve.rejected_steps;
            continue;
        }

        DenseStep<N> step;
        step.t0 = t;
        step.h = t_new - t;
        for (std::size_t i = 0; i < N; ++i) {
            const double dy = y_new[i] - y[i];
            const double bspl = h * k1[i] - dy;
            step.coeff[0][i] = y[i];
            step.coeff[1][i] = dy;
            step.coeff[2][i] = bspl;
            step.coeff[3][i] = dy - h * k7[i] - bspl;
            step.coeff[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                    d6 * k6[i] + d7 * k7[i]);
        }
        curve.steps.push_back(step);

        if (const std::optional<double> stop = on_step(step, y, y_new)) {
            const double ts = *stop;
            curve.ts.push_back(ts);
            curve.ys.push_back(ts >= t_new ? y_new : step(ts));
            curve.event_time = ts;
            return curve;
        }
        curve.ts.push_back(t_new);
        curve.ys.push_back(y_new);
        t = t_new;
        y = y_new;
        k1 = k7;
        const double factor = norm == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(norm, -0.2));
        h *= std::max(0.2, factor);
    }
    return curve;
}

} // namespace detail

/// Integrate dy/dt = rhs(t, y) from t_span.first to t_span.second (t1 > t0).
template <std::size_t N, class Rhs>
SampledCurve<N> integrate(Rhs&& rhs, const State<N>& y0, std::pair<double, double> t_span,
                          const IntegratorConfig& config = {}) {
    const auto [t0, t1] = t_span;
    if (!(t1 > t0)) {
        throw DomainError("integrate: t_span must satisfy t1 > t0");
    }
    auto never = [](const DenseStep<N>&, const State<N>&, const State<N>&) {
        return std::optional<double>{};
    };
    return detail::drive<N>(rhs, y0, t0, t1, config, never);
}

/// Tolerance on |event| at the located crossing.
inline constexpr double kEventTolerance = 1e-12;

/// Integrate from t0 until event(t, y) crosses zero in the given direction,
/// or until t_limit. The returned curve ends at the crossing and carries
/// event_time. Throws EventNotFoundError if t_limit is reached first.
template <std::size_t N, class Rhs, class Event>
SampledCurve<N> integrate_to_event(Rhs&& rhs, const State<N>& y0, double t0, Event&& event,
                                   Crossing direction, const IntegratorConfig& config,
                                   double t_limit) {
    if (!(t_limit > t0)) {
        throw DomainError("integrate_to_event: t_limit must exceed t0");
    }
    const double g_start = event(t0, y0);
    if (std::abs(g_start) <= kEventTolerance) {
        SampledCurve<N> curve;
        curve.ts.push_back(t0);
        curve.ys.push_back(y0);
        curve.event_time = t0;
        return curve;
    }
    auto fires = [direction](double g0, double g1) {
        switch (direction) {
        case Crossing::Rising: return g0 < 0.0 && g1 >= 0.0;
        case Crossing::Falling: return g0 > 0.0 && g1 <= 0.0;
        case Crossing::Either: return (g0 < 0.0) != (g1 < 0.0);
        }
        return false;
    };
    auto locate = [&](const DenseStep<N>& step, const State<N>& y_old,
                      const State<N>& y_new) -> std::optional<double> {
        double a = step.t0;
        double b = step.t0 + step.h;
        double ga = event(a, y_old);
        const double gb = event(b, y_new);
        if (!fires(ga, gb)) {
            return std::nullopt;
        }
        if (std::abs(gb) <= kEventTolerance) {
            return b;
        }
        // Bisection on the dense interpolant.
        for (int it = 0; it < 200; ++it) {
            const double m = 0.5 * (a + b);
            if (m <= a || m >= b) {
                break;
            }
            const double gm = event(m, step(m));
            if (std::abs(gm) <= kEventTolerance) {
                return m;
            }
            if ((gm < 0.0) == (ga < 0.0)) {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
        }
        return b;
    };
    SampledCurve<N> curve = detail::drive<N>(rhs, y0, t0, t_limit, config, locate);
    if (!curve.event_time) {
        std::ostringstream os;
        os.precision(17);
        os << "event did not fire before t_limit=" << t_limit;
        throw EventNotFoundError(os.str());
    }
    return curve;
}

struct RootOptions {
    double x_tol = 1e-12;
    double f_tol = 1e-14;
    int max_iter = 300;
};

struct RootResult {
    double root = 0.0;
    double value = 0.0;
    int iterations = 0;
};

/// Brent's method on [a, b] with f(a) f(b) <= 0. Every iterate stays inside
/// the current bracket. Stops when |f| < f_tol or the bracket is narrower
/// than x_tol.
template <class F>
RootResult find_root(F&& f, double a, double b, const RootOptions& opt = {}) {
    auto eval = [&](double x) {
        const double v = f(x);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os.precision(17);
            os << "find_root: non-finite value at x=" << x;
            throw DomainError(os.str());
        }
        return v;
    };
    double fa = eval(a);
    double fb = eval(b);
    if (std::abs(fa) < opt.f_tol) return {a, fa, 0};
    if (std::abs(fb) < opt.f_tol) return {b, fb, 0};
    if ((fa > 0.0) == (fb > 0.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "find_root: f has the same sign at both ends of [" << a << ", " << b
           << "] (" << fa << ", " << fb << ")";
        throw BracketError(os.str());
    }
    if (std::abs(fa) < std::abs(fb)) {
        std::swap(a, b);
        std::swap(fa, fb);
    }
    double c = a, fc = fa, d = b - a;
    bool bisected = true;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        if (std::abs(fb) < opt.f_tol || std::abs(b - a) < opt.x_tol) {
            break;
        }
        double s;
        if (fa != fc && fb != fc) {
            s = a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) +
                c * fa * fb / ((fc - fa) * (fc - fb));
        } else {
            s = b - fb * (b - a) / (fb - fa);
        }
        const double lo = std::min((3.0 * a + b) / 4.0, b);
        const double hi = std::max((3.0 * a + b) / 4.0, b);
        const bool reject = !(s > lo && s < hi) ||
                            (bisected && std::abs(s - b) >= std::abs(b - c) / 2.0) ||
                            (!bisected && std::abs(s - b) >= std::abs(c - d) / 2.0) ||
                            (bisected && std::abs(b - c) < opt.x_tol) ||
                            (!bisected && std::abs(c - d) < opt.x_tol);
        if (reject) {
            s = 0.5 * (a + b);
            bisected = true;
        } else {
            bisected = false;
        }
        const double fs = eval(s);
        d = c;
        c = b;
        fc = fb;
        if ((fa > 0.0) != (fs > 0.0)) {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if (std::abs(fa) < std::abs(fb)) {
            std::swap(a, b);
            std::swap(fa, fb);
        }
    }
    return {b, fb, it};
}

} // namespace qreset::ode
