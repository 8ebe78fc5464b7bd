#include "fxted/dynamics.hpp"
#include "fxted/oracle.hpp"
#include "fxted/scenarios.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace fxted;

namespace {

Scenario four_unit_ring() {
    Scenario s;
    s.name = "ring4";
    s.dispatch.generators = {{0.5, 1.0}, {0.25, 2.0}, {1.0, 1.5}, {0.4, 3.0}};
    s.dispatch.loads.loads = {12.0, 8.0, 5.0, 15.0};
    s.dispatch.assignment = Assignment::round_robin(4, 4);
    s.schedule = TopologySchedule::fixed(Topology::ring(4));
    s.gains.smoothing_eps = suggested_smoothing(s.dispatch.generators, s.schedule, s.gains);
    s.lambda0 = std::vector<double>{40.0, -25.0, 10.0, 0.0};
    s.t_end = 8.0;
    return s;
}

} // namespace

TEST(SgnMu, Examples) {
    EXPECT_NEAR(sgn_mu(-8.0, 1.0 / 3.0), -2.0, 1e-12);
    EXPECT_NEAR(sgn_mu(4.0, 0.5), 2.0, 1e-12);
    EXPECT_EQ(sgn_mu(0.0, 0.8), 0.0);
    EXPECT_EQ(sgn_mu(3.0, 1.0), 3.0);
}

TEST(SignTerm, BoundaryLayer) {
    EXPECT_EQ(sign_term(0.3, 0.0), 1.0);
    EXPECT_EQ(sign_term(-0.3, 0.0), -1.0);
    EXPECT_EQ(sign_term(0.0, 0.0), 0.0);
    EXPECT_NEAR(sign_term(0.05, 0.1), 0.5, 1e-15);
    EXPECT_EQ(sign_term(-0.5, 0.1), -1.0);
}

TEST(Rhs, TwoNodeExample) {
    // lambda = (0, 1), both consistent with their dispatch, p = 1:
    // coupling(1) = sign + |1|^mu1 + |1|^mu2 = 3
    const std::vector<GeneratorParams> params{{0.5, 0.0}, {0.5, 1.0}};
    const SystemState s{{0.0, 0.0}, {0.0, 1.0}, 0.0};
    const auto d = rhs(s, Topology::complete(2), params, Gains{});
    EXPECT_NEAR(d.dP[0], 3.0, 1e-12);
    EXPECT_NEAR(d.dP[1], -3.0, 1e-12);
    EXPECT_NEAR(d.dlambda[0], 3.0, 1e-12);
    EXPECT_NEAR(d.dlambda[1], -3.0, 1e-12);
}

TEST(Rhs, ConsistencyTermDrivesLambdaOnly) {
    // consensus holds, unit 0 has e = 1: dP = 0, dlambda_0 = 2a(1 + 1)
    const std::vector<GeneratorParams> params{{0.5, 0.0}, {0.5, 0.0}};
    const SystemState s{{1.0, 0.0}, {0.0, 0.0}, 0.0};
    const auto d = rhs(s, Topology::complete(2), params, Gains{});
    EXPECT_EQ(d.dP[0], 0.0);
    EXPECT_NEAR(d.dlambda[0], 2.0, 1e-12);
    EXPECT_EQ(d.dlambda[1], 0.0);
}

TEST(Rhs, PowerChangesSumToTheDisturbance) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + trial % 7;
        const auto g = random_connected_topology(n, 0.5, rng);
        std::vector<GeneratorParams> params(n, GeneratorParams{0.3, 1.0});
        SystemState s{std::vector<double>(n), std::vector<double>(n), 0.0};
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) {
            s.P[i] = u(rng);
            s.lambda[i] = u(rng);
            w[i] = u(rng) / 100.0;
        }
        const auto d = rhs(s, g, params, Gains{}, w);
        EXPECT_NEAR(sum_in_order(d.dP), sum_in_order(w), 1e-9);
    }
}

TEST(Step, EulerIncrement) {
    Scenario s;
    s.dispatch.generators = {{0.5, 0.0}, {0.5, 1.0}};
    s.dispatch.loads.loads = {0.0, 0.0};
    s.dispatch.assignment = Assignment::round_robin(2, 2);
    s.schedule = TopologySchedule::fixed(Topology::complete(2));
    s.gains.dt = 0.01;
    NoiseSampler off(NoiseModel::off());
    const auto next = step({{0.0, 0.0}, {0.0, 1.0}, 0.0}, s.schedule, s.dispatch, s.gains, off);
    EXPECT_NEAR(next.P[0], 0.03, 1e-12);
    EXPECT_NEAR(next.P[1], -0.03, 1e-12);
    EXPECT_NEAR(next.t, 0.01, 1e-15);
}

TEST(Lyapunov, ZeroAtConsensusAndPositiveOtherwise) {
    const std::vector<GeneratorParams> params{{0.5, 0.0}, {0.5, 0.0}};
    EXPECT_NEAR(lyapunov_V({{0.0, 0.0}, {3.0, 3.0}, 0.0}, params), 0.0, 1e-15);
    // lambda = (0, 2): Gamma = 1/2, lambda_bar = 1, V = (1 + 1)/2 = 1
    EXPECT_NEAR(lyapunov_V({{0.0, 0.0}, {0.0, 2.0}, 0.0}, params), 1.0, 1e-12);
    EXPECT_NEAR(weighted_lambda_mean({0.0, 2.0}, params), 1.0, 1e-15);
}

TEST(Bounds, MatchesClosedForm) {
    // ring of four (lambda2 = 2), alpha in [0.25, 1], p = 1, exponents 0.8 / 1.2
    const std::vector<GeneratorParams> params{{0.5, 1.0}, {0.25, 2.0}, {1.0, 1.5}, {0.4, 3.0}};
    const auto b = settling_bounds(params, TopologySchedule::fixed(Topology::ring(4)), Gains{}, 0.5);
    EXPECT_NEAR(b.T1, 10.717734625363, 1e-9);
    EXPECT_NEAR(b.T2, 23.029178758812, 1e-9);
    EXPECT_NEAR(b.c1, 0.933032991537, 1e-10);
    EXPECT_NEAR(b.c2, 0.812252396356, 1e-10);
    EXPECT_NEAR(b.p_min_gain, 2.828427124746, 1e-10);
    EXPECT_NEAR(b.lambda2, 2.0, 1e-10);
}

TEST(Bounds, LargerGainShortensConsensusBound) {
    const std::vector<GeneratorParams> params(3, GeneratorParams{0.5, 1.0});
    const auto sched = TopologySchedule::fixed(Topology::path(3));
    Gains g;
    const double t_slow = settling_bounds(params, sched, g, 0.0).T2;
    g.p = 10.0;
    EXPECT_NEAR(settling_bounds(params, sched, g, 0.0).T2, t_slow / 10.0, 1e-9);
}

TEST(Bounds, DisturbanceBound) {
    const std::vector<GeneratorParams> params{{0.5, 0.0}, {0.5, 0.0}};  // Gamma = 1/2
    EXPECT_NEAR(disturbance_bound(NoiseModel::uniform(0.3, 1), params), 0.3 * 1.5, 1e-12);
    EXPECT_NEAR(disturbance_bound(NoiseModel::gaussian(0.1, 1), params), 0.3 * 1.5, 1e-12);
    EXPECT_EQ(disturbance_bound(NoiseModel::off(), params), 0.0);
}

TEST(Simulate, ConvergesToTheOracle) {
    const auto s = four_unit_ring();
    const auto trace = simulate(s);
    ASSERT_TRUE(trace.convergence_time.has_value());
    EXPECT_LE(*trace.convergence_time, settling_bounds(s).total());
    const double lambda_star = unconstrained_lambda(s.dispatch.generators, 40.0);
    for (double l : trace.final_state.lambda) EXPECT_NEAR(l, lambda_star, 1e-3);
    EXPECT_NEAR(lambda_star, 10.421052631579, 1e-10);
}

TEST(Simulate, LoadBalanceHoldsAtEverySample) {
    const auto s = four_unit_ring();
    const auto trace = simulate(s);
    for (const auto& smp : trace.samples) EXPECT_LE(smp.balance_residual, 1e-6 * 40.0);
    EXPECT_LE(trace.max_balance_residual, 1e-9);
}

TEST(Simulate, LyapunovDecaysAfterConsistency) {
    const auto s = four_unit_ring();
    const auto trace = simulate(s);
    EXPECT_GT(trace.samples.front().V, 100.0);
    EXPECT_LT(trace.samples.back().V, 1e-8);
}

TEST(Simulate, Deterministic) {
    auto s = four_unit_ring();
    s.noise = NoiseModel::uniform(0.3, 99);
    s.t_end = 1.0;
    const auto a = simulate(s);
    const auto b = simulate(s);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
        EXPECT_EQ(a.samples[k].lambda, b.samples[k].lambda);
        EXPECT_EQ(a.samples[k].P, b.samples[k].P);
    }
}

TEST(Simulate, SamplesOnStrideAndAtEnd) {
    auto s = four_unit_ring();
    s.t_end = 0.0105;
    s.sample_stride = 20;
    const auto trace = simulate(s);
    ASSERT_FALSE(trace.samples.empty());
    EXPECT_EQ(trace.samples.front().t, 0.0);
    EXPECT_NEAR(trace.samples.back().t, 0.0105, 1e-12);
    EXPECT_NEAR(trace.samples[1].t, 0.002, 1e-12);
}

TEST(Simulate, HoldStopsEarly) {
    const auto s = four_unit_ring();
    SimulationOptions o;
    o.hold_after_convergence = 0.25;
    const auto trace = simulate(s, o);
    ASSERT_TRUE(trace.convergence_time.has_value());
    EXPECT_NEAR(trace.final_state.t, *trace.convergence_time + 0.25, 2e-4);
}

TEST(Simulate, LoadEventsShiftDemand) {
    auto s = four_unit_ring();
    s.dispatch.loads.events = {{2.0, {6.0, 4.0, 2.5, 7.5}}};
    s.t_end = 12.0;
    const auto trace = simulate(s);
    ASSERT_EQ(trace.events.size(), 1u);
    EXPECT_DOUBLE_EQ(trace.events[0].demand, 20.0);
    ASSERT_TRUE(trace.events[0].settled_time.has_value());
    EXPECT_NEAR(sum_in_order(trace.final_state.P), 20.0, 1e-9);
    const double lambda_star = unconstrained_lambda(s.dispatch.generators, 20.0);
    for (double l : trace.final_state.lambda) EXPECT_NEAR(l, lambda_star, 1e-3);

    const auto rec = event_recovery(trace, 1e-3);
    ASSERT_EQ(rec.size(), 1u);
    ASSERT_TRUE(rec[0].recovered_time.has_value());
    EXPECT_GE(*rec[0].recovered_time, 2.0);
}

TEST(Simulate, SwitchingScheduleConverges) {
    auto s = four_unit_ring();
    s.schedule = TopologySchedule({Topology::ring(4), Topology::path(4), Topology::complete(4)},
                                  {{0.0, 1}, {0.5, 2}, {1.0, 0}, {1.5, 1}});
    s.gains.smoothing_eps = suggested_smoothing(s.dispatch.generators, s.schedule, s.gains);
    const auto trace = simulate(s);
    ASSERT_TRUE(trace.convergence_time.has_value());
    EXPECT_LE(*trace.convergence_time, settling_bounds(s).total());
}
