#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "qreset/errors.hpp"

namespace qreset::ode {

struct QuadratureOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    int max_intervals = 20000;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    int intervals = 0;
};

namespace detail {

inline constexpr std::array<double, 8> kronrod_x = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_w = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss_w = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gauss_kronrod_15(F& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(mid);
    double kronrod = fc * kronrod_w[7];
    double gauss = fc * gauss_w[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kronrod_x[j];
        const double sum = f(mid - dx) + f(mid + dx);
        kronrod += kronrod_w[j] * sum;
        if (j % 2 == 1) {
            gauss += gauss_w[j / 2] * sum;
        }
    }
    return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

} // namespace detail

/// Globally adaptive Gauss-Kronrod (7, 15) quadrature of f over [a, b].
/// `breaks` lists interior points where f may be non-smooth.
template <class F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, const QuadratureOptions& opt = {},
                                    std::vector<double> breaks = {}) {
    QuadratureResult out;
    if (b == a) {
        return out;
    }
    if (b < a) {
        throw DomainError("integrate_adaptive: requires a <= b");
    }
    breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                                [&](double x) { return !(x > a && x < b); }),
                 breaks.end());
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> edges{a};
    edges.insert(edges.end(), breaks.begin(), breaks.end());
    edges.push_back(b);

    std::priority_queue<detail::Panel> heap;
    double total = 0.0, total_err = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        if (edges[i + 1] <= edges[i]) continue;
        const auto p = detail::gauss_kronrod_15(f, edges[i], edges[i + 1]);
        total += p.value;
        total_err += p.error;
        heap.push(p);
    }
    while (total_err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total)) &&
           static_cast<int>(heap.size()) < opt.max_intervals) {
        const detail::Panel worst = heap.top();
        const double m = 0.5 * (worst.a + worst.b);
        if (!(m > worst.a && m < worst.b)) {
            break;
        }
        heap.pop();
        const auto left = detail::gauss_kronrod_15(f, worst.a, m);
        const auto right = detail::gauss_kronrod_15(f, m, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed the drift of incremental updates.
    double sum = 0.0, err = 0.0;
    out.intervals = static_cast<int>(heap.size());
    while (!heap.empty()) {
        sum += heap.top().value;
        err += heap.top().error;
        heap.pop();
    }
    out.value = sum;
    out.error = err;
    return out;
}

} // namespace qreset::ode
