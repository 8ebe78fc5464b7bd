#include "fxted/discrete.hpp"
#include "fxted/scenarios.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fxted;

namespace {

Scenario static_scenario(std::vector<GeneratorParams> gens, const Topology& g, double p_tot) {
    Scenario s;
    s.name = "discrete";
    s.mode = Mode::discrete;
    const std::size_t n = gens.size();
    s.dispatch.generators = std::move(gens);
    s.dispatch.loads.loads = std::vector<double>(n, p_tot / static_cast<double>(n));
    s.dispatch.assignment = Assignment::round_robin(n, n);
    s.schedule = TopologySchedule::fixed(g);
    return s;
}

} // namespace

TEST(ZStep, Examples) {
    EXPECT_NEAR(z_step(1.0, 0.1), 1.0 / 1.1, 1e-15);
    EXPECT_NEAR(z_step(-4.0, 0.5), -4.0 / 3.0, 1e-15);
    EXPECT_EQ(z_step(0.0, 0.1), 0.0);
}

TEST(ZStep, DecaysLikeOneOverKH) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> mag(-1e6, 1e6), step(1e-3, 2.0);
    for (int trial = 0; trial < 300; ++trial) {
        double z = mag(rng);
        const double h = step(rng);
        for (int k = 1; k <= 200; ++k) {
            z = z_step(z, h);
            ASSERT_LE(std::abs(z), 1.0 / (k * h) * (1.0 + 1e-12));
        }
    }
}

TEST(Faca, ExactMeanAfterKSteps) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + trial % 8;
        const auto plan = make_faca_plan(random_connected_topology(n, 0.4, rng));
        std::vector<double> x(n);
        for (auto& v : x) v = u(rng);
        const double mean = sum_in_order(x) / static_cast<double>(n);
        for (double v : faca_consensus(x, plan)) EXPECT_NEAR(v, mean, 1e-9);
    }
}

TEST(Faca, PlanSizes) {
    EXPECT_EQ(make_faca_plan(Topology::complete(5)).size(), 1u);
    EXPECT_EQ(make_faca_plan(Topology::path(3)).size(), 2u);
    EXPECT_NEAR(make_faca_plan(Topology::path(3)).gain(0), 1.0, 1e-12);
    EXPECT_NEAR(make_faca_plan(Topology::path(3)).gain(1), 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(make_faca_plan(Topology::path(3)).gain(2), 1.0, 1e-12);
}

TEST(Faca, Errors) {
    EXPECT_THROW(make_faca_plan(Topology::from_edges(3, {{0, 1}})), DisconnectedTopologyError);
    const std::vector<GeneratorParams> gens(3, GeneratorParams{0.2, 1.0});
    EXPECT_THROW(faca_consensus({1.0, 2.0, 3.0}, make_weighted_faca_plan(Topology::path(3), gens)), ValidationError);
}

TEST(DiscreteUpdate, PreservesTotalPower) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-100.0, 100.0), a(0.01, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + trial % 7;
        std::vector<GeneratorParams> gens;
        for (std::size_t i = 0; i < n; ++i) gens.push_back({a(rng), std::abs(u(rng)) / 10.0});
        const auto plan = make_faca_plan(random_connected_topology(n, 0.5, rng), gens,
                                         trial % 2 ? FacaSpectrum::weighted : FacaSpectrum::laplacian);
        DiscreteState s{std::vector<double>(n), std::vector<double>(n), 0};
        for (std::size_t i = 0; i < n; ++i) {
            s.lambda[i] = u(rng);
            s.P[i] = u(rng);
        }
        const double total = sum_in_order(s.P);
        // rounding scales with the size of the exchanged power, not with the total
        double moved = std::abs(total);
        for (int k = 0; k < 10; ++k) {
            const auto next = discrete_update(s, plan, gens, 0.1);
            for (std::size_t i = 0; i < n; ++i) moved += std::abs(next.P[i] - s.P[i]);
            s = next;
            ASSERT_NEAR(sum_in_order(s.P), total, 1e-12 * std::max(1.0, moved));
        }
    }
}

TEST(DiscreteUpdate, ConsistencyErrorFollowsZStep) {
    const std::vector<GeneratorParams> gens{{0.3, 1.0}, {0.7, 2.0}, {0.5, 0.5}};
    const auto plan = make_faca_plan(Topology::path(3));
    DiscreteState s{{5.0, -2.0, 1.0}, {3.0, 4.0, -1.0}, 0};
    const auto z0 = consistency_errors(s, gens);
    const auto next = discrete_update(s, plan, gens, 0.1);
    const auto z1 = consistency_errors(next, gens);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(z1[i], z_step(z0[i], 0.1), 1e-12);
}

TEST(DiscreteSolve, WeightedPlanSettlesInKIterations) {
    const std::vector<GeneratorParams> gens{{0.5, 1.0}, {0.25, 2.0}, {1.0, 1.5}, {0.4, 3.0}};
    const auto s = static_scenario(gens, Topology::ring(4), 40.0);
    const auto r = discrete_solve(s);
    EXPECT_EQ(r.iterations, r.plan_size);
    EXPECT_NEAR(r.solution.lambda_star, 10.421052631579, 1e-9);
    EXPECT_TRUE(r.audit.passed);
    EXPECT_EQ(r.samples.size(), r.iterations + 1);
}

TEST(DiscreteSolve, LaplacianPlanIsSlowerWhenCostsDiffer) {
    const std::vector<GeneratorParams> gens{{0.5, 1.0}, {0.25, 2.0}, {1.0, 1.5}, {0.4, 3.0}};
    auto s = static_scenario(gens, Topology::ring(4), 40.0);
    s.discrete.plan = FacaSpectrum::laplacian;
    const auto r = discrete_solve(s);
    EXPECT_GT(r.iterations, r.plan_size);
    EXPECT_NEAR(r.solution.lambda_star, 10.421052631579, 1e-3);
}

TEST(DiscreteSolve, LaplacianPlanIsExactForEqualHalfAlphas) {
    const std::vector<GeneratorParams> gens{{0.5, 1.0}, {0.5, 2.0}, {0.5, 1.5}, {0.5, 3.0}};
    auto s = static_scenario(gens, Topology::path(4), 40.0);
    s.discrete.plan = FacaSpectrum::laplacian;
    EXPECT_EQ(discrete_solve(s).iterations, 3u);
}

TEST(DiscreteSolve, ConstrainedCase) {
    const std::vector<GeneratorParams> gens{
        {0.5, 1.0, 0.0, 0.0, 20.0}, {0.25, 2.0, 0.0, 0.0, 12.0}, {1.0, 1.5, 0.0, 0.0, kInf}, {0.4, 3.0, 0.0, 0.0, kInf}};
    const auto r = discrete_solve(static_scenario(gens, Topology::ring(4), 40.0));
    EXPECT_EQ(r.rounds.size(), 1u);
    EXPECT_NEAR(r.solution.lambda_star, 12.181818181818, 1e-9);
    EXPECT_TRUE(r.audit.passed);
}

TEST(DiscreteSolve, InconsistentStartNeedsTheZDecay) {
    const std::vector<GeneratorParams> gens{{0.5, 1.0}, {0.25, 2.0}, {1.0, 1.5}};
    auto s = static_scenario(gens, Topology::complete(3), 30.0);
    s.lambda0 = std::vector<double>{0.0, 0.0, 0.0};
    const auto r = discrete_solve(s);
    EXPECT_GT(r.iterations, 100u);
    EXPECT_NEAR(r.solution.lambda_star, unconstrained_lambda(gens, 30.0), 5e-3);
}

TEST(DiscreteSolve, IterationCap) {
    const std::vector<GeneratorParams> gens{{0.5, 1.0}, {0.25, 2.0}, {1.0, 1.5}, {0.4, 3.0}};
    auto s = static_scenario(gens, Topology::ring(4), 40.0);
    s.discrete.plan = FacaSpectrum::laplacian;
    s.discrete.max_iters = 3;
    EXPECT_THROW(discrete_solve(s), MaxIterationsError);
}

TEST(DiscreteSolve, RejectsSwitchingAndNoise) {
    const std::vector<GeneratorParams> gens(3, GeneratorParams{0.5, 1.0});
    auto s = static_scenario(gens, Topology::path(3), 10.0);
    s.noise = NoiseModel::uniform(0.1, 1);
    EXPECT_THROW(discrete_solve(s), ValidationError);
    s = static_scenario(gens, Topology::path(3), 10.0);
    s.schedule = TopologySchedule({Topology::path(3), Topology::complete(3)}, {{0.0, 0}, {1.0, 1}});
    EXPECT_THROW(discrete_solve(s), ValidationError);
}
