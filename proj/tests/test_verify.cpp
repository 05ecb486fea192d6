#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qreset/bounded.hpp"
#include "qreset/errors.hpp"
#include "qreset/io.hpp"
#include "qreset/model.hpp"
#include "qreset/unbounded.hpp"
#include "qreset/verify.hpp"

using namespace qreset;
using namespace qreset::verify;

namespace {

ControlProtocol constant(double lambda, double length) {
    ControlProtocol p;
    p.segments.push_back(ConstantGap{lambda, length});
    return p;
}

const unbounded::UnboundedSolution& optimal_100() {
    static const auto sol = unbounded::solve_unbounded({100.0, 1e-3, std::nullopt});
    return sol;
}

} // namespace

TEST(Simulate, ConstantGapMatchesClosedForm) {
    const Trajectory tr = simulate(constant(15.0, 12.0), 0.5);
    double sup = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        sup = std::max(sup, std::abs(tr.p_e[i] - oracle::relax(tr.ts[i], 0.5, 15.0)));
    }
    EXPECT_LT(sup, 1e-9);
    for (double t = 0.0; t < 12.0; t += 0.37) EXPECT_NEAR(tr.dense(t).p_e, oracle::relax(t, 0.5, 15.0), 1e-9);
}

TEST(Simulate, FixedPointStays) {
    const double p0 = 0.2;
    const Trajectory tr = simulate(constant(model::lambda_for_error(p0), 30.0), p0);
    for (double p : tr.p_e) EXPECT_NEAR(p, p0, 1e-13);
}

TEST(Simulate, ReproducesOptimizer) {
    const auto& tr = optimal_100().trajectory;
    ControlProtocol proto;
    proto.segments.push_back(FunctionGap{[d = tr.dense](double t) { return d(t).lambda_H; }, 100.0});
    const Trajectory sim = simulate(proto, 0.5);
    double sup = 0.0;
    for (std::size_t i = 0; i < sim.size(); ++i) sup = std::max(sup, std::abs(sim.p_e[i] - tr.dense(sim.ts[i]).p_e));
    EXPECT_LT(sup, 1e-7);
    EXPECT_NEAR(reset_error(sim) / 1e-3, 1.0, 1e-3);
}

TEST(Simulate, PiecewiseSegmentsAndKinks) {
    // two constant stretches: closed form composes
    ControlProtocol p;
    p.segments.push_back(ConstantGap{3.0, 2.0});
    p.segments.push_back(ConstantGap{9.0, 3.0});
    const Trajectory tr = simulate(p, 0.5);
    const double mid = oracle::relax(2.0, 0.5, 3.0);
    EXPECT_NEAR(reset_error(tr), oracle::relax(3.0, mid, 9.0), 1e-10);
    ASSERT_EQ(tr.breaks.size(), 1u);
    EXPECT_EQ(tr.breaks[0], 2.0);
}

TEST(Simulate, SampledGapIsPiecewiseLinear) {
    // linear ramp from 1 to 5 against a fine RK4 oracle
    ControlProtocol p;
    p.segments.push_back(SampledGap{{0.0, 4.0}, {1.0, 5.0}});
    const Trajectory tr = simulate(p, 0.5);
    auto f = [](double t, const oracle::Vec<1>& y) -> oracle::Vec<1> {
        return {oracle::rate(y[0], 1.0 + t)};
    };
    EXPECT_NEAR(reset_error(tr), oracle::rk4<1>(f, {0.5}, 0.0, 4.0, 40000)[0], 1e-10);
}

TEST(Simulate, Errors) {
    EXPECT_THROW(simulate(constant(1.0, 1.0), 0.0), DomainError);
    EXPECT_THROW(simulate(constant(1.0, 1.0), 1.0), DomainError);
    EXPECT_THROW(simulate(ControlProtocol{}, 0.5), DomainError);
    ControlProtocol bad;
    bad.segments.push_back(SampledGap{{0.0, 1.0, 1.0}, {1.0, 2.0, 3.0}});
    EXPECT_THROW(simulate(bad, 0.5), DomainError);
    ControlProtocol zero;
    zero.segments.push_back(SampledGap{{0.0, 1.0}, {1.0, 0.0}});
    EXPECT_THROW(simulate(zero, 0.5), DomainError);
}

TEST(ResetError, Examples) {
    const double t1 = bounded::tau_c1(15.0, 1e-5);
    EXPECT_NEAR(reset_error(simulate(constant(15.0, t1), 0.5)) / 1e-5, 1.0, 1e-8);
    EXPECT_EQ(reset_error(simulate(constant(15.0, 0.0), 0.3)), 0.3);
    EXPECT_THROW(reset_error(Trajectory{}), DomainError);
}

TEST(WorkDirect, StaticEquilibriumIsZero) {
    const double p0 = 0.1;
    const Trajectory tr = simulate(constant(model::lambda_for_error(p0), 10.0), p0);
    // no population change and a constant gap: the quench term cancels only
    // against the gap switched on at t = 0, which this trajectory starts with
    EXPECT_NEAR(stieltjes_work(tr), 0.0, 1e-15);
}

TEST(WorkDirect, BoundarySegmentIsJForm) {
    const Trajectory tr = simulate(constant(15.0, 8.0), 0.5);
    EXPECT_NEAR(stieltjes_work(tr), 0.0, 1e-15);
    EXPECT_NEAR(work_direct(tr), 15.0 * (0.5 - reset_error(tr)), 1e-14);
    EXPECT_NEAR(work_direct(tr), unbounded::objective(tr), 1e-9);
}

TEST(WorkDirect, AgreesWithObjectiveOnOptimum) {
    const auto& sol = optimal_100();
    const double J = unbounded::objective(sol.trajectory);
    EXPECT_NEAR(work_direct(sol.trajectory), J, 1e-6 * J);
    ControlProtocol proto;
    proto.segments.push_back(FunctionGap{[d = sol.trajectory.dense](double t) { return d(t).lambda_H; }, 100.0});
    const Trajectory sim = simulate(proto, 0.5);
    EXPECT_NEAR(work_direct(sim), J, 1e-6 * J);
}

TEST(WorkDirect, CsvRoundTripClosure) {
    const auto& sol = optimal_100();
    std::stringstream ss;
    io::write_protocol_csv(ss, sol.trajectory);
    const ControlProtocol proto = io::read_protocol_csv(ss);
    const Trajectory sim = simulate(proto, 0.5);
    EXPECT_NEAR(reset_error(sim) / 1e-3, 1.0, 1e-3);
    const double J = unbounded::objective(sol.trajectory);
    EXPECT_NEAR(work_direct(sim), J, 1e-3 * J);
}

TEST(WorkDirect, SecondLaw) {
    std::vector<ControlProtocol> protos;
    protos.push_back(constant(15.0, 12.0));
    protos.push_back(constant(4.0, 3.0));
    {
        ControlProtocol p;
        p.segments.push_back(SampledGap{{0.0, 10.0}, {0.0, 9.0}});
        protos.push_back(p);
    }
    {
        ControlProtocol p;
        p.segments.push_back(SampledGap{{0.0, 1.0, 30.0}, {0.0, 2.0, 7.0}});
        p.segments.push_back(ConstantGap{12.0, 5.0});
        protos.push_back(p);
    }
    for (std::size_t i = 0; i < protos.size(); ++i) {
        const Trajectory tr = simulate(protos[i], 0.5);
        const double eps = reset_error(tr);
        EXPECT_GE(work_direct(tr), model::quasistatic_work(eps)) << i;
    }
    const auto& sol = optimal_100();
    EXPECT_GE(work_direct(sol.trajectory), model::quasistatic_work(1e-3));
}
