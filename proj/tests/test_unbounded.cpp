#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qreset/errors.hpp"
#include "qreset/model.hpp"
#include "qreset/ode.hpp"
#include "qreset/protocol.hpp"
#include "qreset/unbounded.hpp"
#include "qreset/verify.hpp"

using namespace qreset;
using namespace qreset::unbounded;

namespace {

const UnboundedSolution& cached(double tau, double eps) {
    static std::map<std::pair<double, double>, UnboundedSolution> cache;
    auto key = std::make_pair(tau, eps);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, solve_unbounded({tau, eps, std::nullopt})).first;
    return it->second;
}

} // namespace

TEST(ElRhs, Examples) {
    EXPECT_EQ(el_rhs(0.3, 0.0), 0.0);
    const double expect = (0.625 * 0.01 - 0.002 + 0.0002) / (0.5 * 0.275);
    EXPECT_NEAR(el_rhs(0.25, -0.1), expect, 1e-15);
    EXPECT_NEAR(el_rhs(0.25, -0.1), 0.0324, 1e-4);
    EXPECT_NEAR(el_rhs(0.2, -0.13), oracle::el(0.2, -0.13, 1.0), 1e-15);
    EXPECT_THROW(el_rhs(0.5, -0.1), DomainError);
    EXPECT_THROW(el_rhs(0.25, -0.375), DomainError);
}

TEST(ElRhs, NumeratorFactorsAtHalf) {
    // numerator -> 2 v^2 (v + 1/2)^2 as p_e -> 1/2
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uv(-0.49, -0.01);
    const double p = 0.5 - 1e-9;
    for (int i = 0; i < 10; ++i) {
        const double v = uv(rng);
        const double num = el_rhs(p, v) * (1 - 2 * p) * (2 * p * (1 - p) + v);
        EXPECT_NEAR(num, 2 * v * v * (v + 0.5) * (v + 0.5), 1e-8) << v;
    }
}

TEST(Beltrami, Examples) {
    EXPECT_EQ(beltrami_constant(0.3, 0.0), 0.0);
    // direct form p_dot dL/dp_dot - L
    const double p = 0.2, v = -0.07;
    auto L = [p](double v) { return v * std::log((v + p) / (v + 1 - p)); };
    const double h = 1e-6;
    const double dL = (L(v + h) - L(v - h)) / (2 * h);
    EXPECT_NEAR(beltrami_constant(p, v), v * dL - L(v), 1e-9);
}

TEST(SolveUnbounded, BoundaryValuesAndReport) {
    const auto& sol = cached(25.0, 1e-3);
    const auto& tr = sol.trajectory;
    ASSERT_EQ(tr.size(), 1000u);
    EXPECT_EQ(tr.ts.front(), 0.0);
    EXPECT_EQ(tr.ts.back(), 25.0);
    EXPECT_EQ(tr.p_e.front(), 0.5);
    EXPECT_EQ(tr.lambda_H.front(), 0.0);
    EXPECT_NEAR(tr.p_e.back(), 1e-3, 1e-12);
    EXPECT_LT(sol.report.residual, sol.report.residual_tol);
    EXPECT_LT(sol.report.parameter, 0.0);
    EXPECT_GT(sol.report.parameter, -1e-3);
    EXPECT_GT(tr.lambda_H.back(), std::log(999.0));
}

TEST(SolveUnbounded, MonotoneControlAndPopulation) {
    for (auto [tau, eps] : {std::pair{25.0, 1e-3}, {75.0, 1e-5}, {5.0, 1e-1}, {400.0, 1e-3}}) {
        const auto& tr = cached(tau, eps).trajectory;
        for (std::size_t i = 1; i < tr.size(); ++i) {
            EXPECT_LT(tr.p_e[i], tr.p_e[i - 1]) << tau << " " << i;
            EXPECT_GT(tr.lambda_H[i], tr.lambda_H[i - 1]) << tau << " " << i;
        }
    }
}

TEST(SolveUnbounded, ShorterResetNeedsLargerFinalGap) {
    EXPECT_LT(cached(75.0, 1e-5).trajectory.lambda_H.back(), cached(25.0, 1e-5).trajectory.lambda_H.back());
}

TEST(SolveUnbounded, BeltramiConstantIsConserved) {
    for (auto [tau, eps] : {std::pair{25.0, 1e-3}, {75.0, 1e-5}, {100.0, 1e-3}}) {
        const auto& tr = cached(tau, eps).trajectory;
        double lo = 1e300, hi = -1e300, mean = 0.0;
        int n = 0;
        for (std::size_t i = 1; i < tr.size(); ++i) {
            if (tr.p_e[i] > 0.5 - 1e-6) continue;
            const double h = beltrami_constant(tr.p_e[i], tr.p_dot[i]);
            lo = std::min(lo, h);
            hi = std::max(hi, h);
            mean += h;
            ++n;
        }
        mean /= n;
        EXPECT_LT(hi - lo, 1e-6 * std::abs(mean)) << tau;
        const double a = beltrami_constant(tr.p_e[100], tr.p_dot[100]);
        const double b = beltrami_constant(tr.p_e[900], tr.p_dot[900]);
        EXPECT_NEAR(a, b, 1e-8);
    }
}

TEST(SolveUnbounded, SecondDerivativeMatchesElRhs) {
    // central difference of the solved p_dot, away from both ends
    for (auto [tau, eps] : {std::pair{25.0, 1e-3}, {75.0, 1e-5}, {400.0, 1e-3}}) {
        const auto& tr = cached(tau, eps).trajectory;
        const double h = 1e-3;
        for (double t = 0.04 * tau; t < 0.96 * tau; t += tau / 200) {
            const double pp = (tr.dense(t + h).p_dot - tr.dense(t - h).p_dot) / (2 * h);
            const auto pt = tr.dense(t);
            const double ref = el_rhs(pt.p_e, pt.p_dot);
            EXPECT_NEAR(pp, ref, 1e-5 * std::abs(ref)) << tau << " " << t;
        }
    }
}

TEST(SolveUnbounded, ControlRateMatchesFiniteDifference) {
    const auto& tr = cached(25.0, 1e-3).trajectory;
    const double h = 1e-4;
    for (double t = 0.5; t < 24.9; t += 0.3) {
        const double d = (tr.dense(t + h).lambda_H - tr.dense(t - h).lambda_H) / (2 * h);
        const auto pt = tr.dense(t);
        const double ref = model::control_rate(pt.p_e, pt.lambda_H);
        EXPECT_NEAR(d, ref, 1e-6 * std::abs(ref)) << t;
    }
}

TEST(SolveUnbounded, ForwardResimulationReproducesPopulation) {
    const auto& tr = cached(25.0, 1e-3).trajectory;
    ControlProtocol proto;
    proto.segments.push_back(FunctionGap{[d = tr.dense](double t) { return d(t).lambda_H; }, 25.0});
    const Trajectory sim = verify::simulate(proto, 0.5);
    double sup = 0.0;
    for (std::size_t i = 0; i < sim.size(); ++i) sup = std::max(sup, std::abs(sim.p_e[i] - tr.dense(sim.ts[i]).p_e));
    EXPECT_LT(sup, 1e-7);
}

TEST(SolveUnbounded, TinyErrorsCloseUnderResimulation) {
    for (auto [tau, eps] : {std::pair{100.0, 1e-12}, {1000.0, 1e-16}, {40.0, 1e-14}}) {
        const auto& sol = cached(tau, eps);
        EXPECT_LE(sol.report.residual, sol.report.residual_tol);
        ControlProtocol proto;
        proto.segments.push_back(
            FunctionGap{[d = sol.trajectory.dense](double t) { return d(t).lambda_H; }, tau});
        const Trajectory sim = verify::simulate(proto, 0.5);
        EXPECT_NEAR(verify::reset_error(sim) / eps, 1.0, 1e-3) << tau << " " << eps;
        const double J = objective(sol.trajectory);
        EXPECT_NEAR(verify::work_direct(sim), J, 1e-6 * J) << tau << " " << eps;
    }
}

TEST(SolveUnbounded, LongResetTimesApproachTheStaticGap) {
    double prev = INFINITY;
    for (double tau : {1000.0, 5000.0, 20000.0}) {
        const auto sol = solve_unbounded({tau, 1e-5, std::nullopt}, ShootingConfig{{}, 1e-9, 1e-11, 2});
        const double last = sol.trajectory.lambda_H.back();
        EXPECT_LT(last, prev) << tau;
        EXPECT_GT(last, model::lambda_for_error(1e-5)) << tau;
        prev = last;
    }
}

TEST(SolveUnbounded, ExtraWorkGrowsAsErrorShrinks) {
    double prev = 0.0;
    for (int k = 3; k <= 14; ++k) {
        const double eps = std::pow(10.0, -k);
        const double w = work_breakdown(cached(100.0, eps).trajectory, eps).W_ex;
        EXPECT_GT(w, prev) << eps;
        prev = w;
    }
}

TEST(SolveUnbounded, Inaccessible) {
    const double t_min = std::log(0.5 / 1e-3);
    try {
        solve_unbounded({t_min * 0.99, 1e-3, std::nullopt});
        FAIL();
    } catch (const InaccessibleError& e) {
        EXPECT_NEAR(e.tau_min(), t_min, 1e-12);
    }
    EXPECT_THROW(solve_unbounded({25.0, 1e-3, 15.0}), DomainError);
    EXPECT_THROW(solve_unbounded({-1.0, 1e-3, std::nullopt}), DomainError);
}

TEST(SolveUnbounded, Deterministic) {
    const auto a = solve_unbounded({30.0, 1e-4, std::nullopt});
    const auto b = solve_unbounded({30.0, 1e-4, std::nullopt});
    EXPECT_EQ(a.report.parameter, b.report.parameter);
    EXPECT_EQ(a.trajectory.lambda_H, b.trajectory.lambda_H);
}

TEST(SolveUnbounded, TimeRescalingCovariance) {
    // Relaxation rate 1/k over reset time k*tau is the same problem in
    // rescaled time. Shoot the rescaled equation backward from the solver's
    // terminal state up to p = 0.49 and compare elapsed time and work
    // with the solver's arc over the same stretch.
    const double tau = 25.0, eps = 1e-3, p_stop = 0.49;
    const auto& sol = cached(tau, eps);
    const auto& tr = sol.trajectory;
    const double t_stop = ode::find_root([&](double t) { return tr.dense(t).p_e - p_stop; }, 0.0, tau).root;
    auto integrand = [&](double t) {
        const auto pt = tr.dense(t);
        return -pt.p_dot * pt.lambda_H;
    };
    const double J_part = ode::integrate_adaptive(integrand, t_stop, tau).value;
    for (double k : {0.5, 3.0}) {
        const double gamma = 1.0 / k;
        auto f = [gamma](double, const oracle::Vec<3>& y) -> oracle::Vec<3> {
            // backward time; third component accumulates -p_dot * lambda
            const double p = y[0], v = y[1];
            return {-v, -oracle::el(p, v, gamma), -v * oracle::gap(p, v, gamma)};
        };
        oracle::Vec<3> y{eps, sol.report.parameter * gamma, 0.0};
        const double h = 5e-4 * k;
        double sigma = 0.0;
        for (int step = 0; step < 1000000; ++step) {
            const auto next = oracle::rk4<3>(f, y, sigma, sigma + h, 1);
            if (next[0] >= p_stop) {
                const double frac = (p_stop - y[0]) / (next[0] - y[0]);
                sigma += frac * h;
                y[2] += frac * (next[2] - y[2]);
                break;
            }
            y = next;
            sigma += h;
        }
        EXPECT_NEAR(sigma, k * (tau - t_stop), 1e-6 * k * tau) << k;
        EXPECT_NEAR(y[2], J_part, 1e-6 * J_part) << k;
    }
}

TEST(Objective, StaticEquilibriumIsZero) {
    Trajectory tr;
    const double l = 4.0, p = model::equilibrium_population(l);
    for (int i = 0; i <= 10; ++i) tr.push_back({double(i), p, 0.0, l});
    EXPECT_EQ(objective(tr), 0.0);
}

TEST(Objective, ConstantGapSegment) {
    const double l = 15.0;
    Trajectory tr;
    auto point = [l](double t) -> TrajectoryPoint {
        const double p = oracle::relax(t, 0.5, l);
        return {t, p, oracle::rate(p, l), l};
    };
    for (int i = 0; i <= 100; ++i) tr.push_back(point(0.1 * i));
    tr.dense = point;
    EXPECT_NEAR(objective(tr), l * (0.5 - tr.p_e.back()), 1e-10);
}

TEST(Objective, ExtraWorkIsPositive) {
    const auto& sol = cached(500.0, 1e-3);
    const double J = objective(sol.trajectory);
    EXPECT_GT(extra_work(J, 1e-3), 0.0);
    EXPECT_EQ(extra_work(model::quasistatic_work(1e-3), 1e-3), 0.0);
}

TEST(WorkBreakdown, Identities) {
    const auto& sol = cached(25.0, 1e-3);
    const WorkBreakdown w = work_breakdown(sol.trajectory, 1e-3);
    EXPECT_DOUBLE_EQ(w.W_sc1 + w.W_qa2, w.J);
    EXPECT_EQ(w.W_sc, w.W_sc1 + w.W_qa2);
    EXPECT_GT(w.W_qa2, 0.0);
    EXPECT_NEAR(w.W_qs, model::quasistatic_work(1e-3), 1e-15);
    EXPECT_NEAR(w.W_ex, w.J - w.W_qs, 1e-15);
    const double stieltjes = verify::stieltjes_work(sol.trajectory);
    EXPECT_NEAR(stieltjes, w.W_sc1, 1e-6 * std::abs(w.W_sc1));
}

class BumpPerturbation : public ::testing::TestWithParam<std::pair<double, double>> {};

TEST_P(BumpPerturbation, NeverLowersWork) {
    const auto [tau, eps] = GetParam();
    const auto& sol = cached(tau, eps);
    const double J_opt = objective(sol.trajectory);
    auto base = sol.trajectory.dense;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uc(0.15, 0.85), uw(0.05, 0.2);
    for (int i = 0; i < 10; ++i) {
        const double c = uc(rng) * tau, w = uw(rng) * tau;
        const double amp = i % 2 ? 0.01 : -0.01;
        auto bump = [c, w](double t) {
            const double x = (t - c) / w;
            return std::abs(x) < 1 ? std::exp(-1 / (1 - x * x)) * std::exp(1.0) : 0.0;
        };
        // the shift k * (t / tau)^2 restores p(tau) = eps
        auto protocol = [&](double k) {
            ControlProtocol p;
            p.segments.push_back(FunctionGap{
                [=](double t) {
                    const double l = base(t).lambda_H * (1 + amp * bump(t)) + k * (t / tau) * (t / tau);
                    return l;
                },
                tau});
            return p;
        };
        auto miss = [&](double k) { return verify::reset_error(verify::simulate(protocol(k), 0.5)) / eps - 1.0; };
        const double k = ode::find_root(miss, -0.5, 0.5, {1e-13, 1e-10, 200}).root;
        const Trajectory sim = verify::simulate(protocol(k), 0.5);
        ASSERT_NEAR(verify::reset_error(sim) / eps, 1.0, 1e-6);
        EXPECT_GE(objective(sim), J_opt) << i;
    }
}

INSTANTIATE_TEST_SUITE_P(SolveUnbounded, BumpPerturbation,
                         ::testing::Values(std::pair{25.0, 1e-3}, std::pair{100.0, 1e-8}));
