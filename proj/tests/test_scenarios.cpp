#include "fxted/scenarios.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace fxted;

namespace {

const std::string kScenarios = std::string(FXTED_SOURCE_DIR) + "/scenarios/";

// shipped files name the case relatively; the constructors record an absolute path
json without_case_ref(const Scenario& s) {
    json j = to_json(s);
    j.erase("case");
    return j;
}

} // namespace

TEST(CannedScenarios, SwitchingStudy) {
    const auto s = scenario_switching_57();
    EXPECT_EQ(s.size(), 7u);
    EXPECT_EQ(s.mode, Mode::constrained);
    EXPECT_NEAR(total_demand(s.dispatch.loads, 0.0), kCase57Demand, 1e-9);
    EXPECT_EQ(s.gains.p, 1485.0);
    EXPECT_EQ(s.gains.mu1, 0.8);
    EXPECT_EQ(s.gains.mu2, 1.2);
    EXPECT_EQ(s.gains.nu1, 0.8);
    EXPECT_EQ(s.gains.nu2, 1.2);
    EXPECT_EQ(s.initial_P.size(), 4u);

    const auto& phases = s.schedule.phases();
    ASSERT_EQ(phases.size(), 400u);
    for (std::size_t k = 0; k < phases.size(); ++k) {
        EXPECT_NEAR(phases[k].start_time, k * kSwitchInterval, 1e-12);
        EXPECT_TRUE(is_connected(s.schedule.topologies()[phases[k].topology_index]));
    }
}

TEST(CannedScenarios, TimeVaryingStudy) {
    const auto s = scenario_timevarying_noise_57();
    EXPECT_NEAR(total_demand(s.dispatch.loads, 0.5), kCase57Demand, 1e-9);
    ASSERT_EQ(s.dispatch.loads.events.size(), case57_demand_events().size());
    for (std::size_t k = 0; k < s.dispatch.loads.events.size(); ++k) {
        const auto& [t, total] = case57_demand_events()[k];
        EXPECT_EQ(s.dispatch.loads.events[k].time, t);
        EXPECT_NEAR(total_demand(s.dispatch.loads, t), total, 1e-9);
    }
    EXPECT_EQ(s.noise.kind, NoiseModel::Kind::truncated_gaussian);
    EXPECT_NEAR(s.noise.sigma, 0.1, 1e-15);
}

TEST(CannedScenarios, ComparisonStudy) {
    const auto s = scenario_comparison_30();
    EXPECT_EQ(s.mode, Mode::discrete);
    EXPECT_EQ(s.discrete.h, 0.1);
    EXPECT_NEAR(total_demand(s.dispatch.loads, 0.0), 250.0, 1e-9);
    EXPECT_EQ(s.size(), 6u);
}

TEST(CannedScenarios, ShippedFilesMatchConstructors) {
    EXPECT_EQ(without_case_ref(load_scenario(kScenarios + "iv-a-switching-57.json")),
              without_case_ref(scenario_switching_57()));
    EXPECT_EQ(without_case_ref(load_scenario(kScenarios + "iv-b-timevarying-noise-57.json")),
              without_case_ref(scenario_timevarying_noise_57()));
    EXPECT_EQ(without_case_ref(load_scenario(kScenarios + "iv-c-comparison-30.json")),
              without_case_ref(scenario_comparison_30()));
}

TEST(CannedScenarios, SmallFilesLoad) {
    const auto u = load_scenario(kScenarios + "small-unconstrained.json");
    EXPECT_EQ(u.size(), 4u);
    EXPECT_EQ(u.mode, Mode::unconstrained);
    const auto c = load_scenario(kScenarios + "small-constrained.json");
    EXPECT_EQ(c.mode, Mode::constrained);
    EXPECT_EQ(c.dispatch.generators[0].p_max, 20.0);
    EXPECT_TRUE(std::isinf(c.dispatch.generators[3].p_max));
}

TEST(RandomScenario, DeterministicPerSeed) {
    EXPECT_EQ(to_json(random_scenario(5, 3, true)), to_json(random_scenario(5, 3, true)));
    EXPECT_NE(to_json(random_scenario(5, 3, true)), to_json(random_scenario(5, 4, true)));
}

TEST(RandomScenario, SingleGenerator) {
    const auto s = random_scenario(1, 9, false);
    EXPECT_EQ(s.size(), 1u);
    EXPECT_NO_THROW(validate(s));
}

TEST(RandomScenario, ConstrainedInstancesOftenHaveActiveLimits) {
    int active = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = random_scenario(2 + seed % 5, seed, true);
        const double p_tot = total_demand(s.dispatch.loads, 0.0);
        EXPECT_GT(p_tot, sum_p_min(s.dispatch.generators));
        EXPECT_LT(p_tot, sum_p_max(s.dispatch.generators));
        if (!constrained_optimum(s.dispatch.generators, p_tot).saturated.empty()) ++active;
    }
    // pinned for this generator; a change here means the instance mix shifted
    EXPECT_EQ(active, 68);
}

TEST(RandomScenario, HorizonCoversTheBound) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = random_scenario(3, seed, false);
        EXPECT_GE(s.t_end, settling_bounds(s).total());
        EXPECT_GE(s.gains.p, 1.0);
    }
}

TEST(ScenarioJson, RoundTrip) {
    auto s = random_scenario(4, 11, true);
    s.noise = NoiseModel::uniform(0.3, 11);
    s.dispatch.loads.events = {{0.5, s.dispatch.loads.loads}};
    const auto path = (std::filesystem::temp_directory_path() / "fxted_scenario_roundtrip.json").string();
    save_scenario(s, path);
    EXPECT_EQ(to_json(load_scenario(path)), to_json(s));
    std::filesystem::remove(path);
}

TEST(DataDir, MissingCaseIsReported) {
    EXPECT_THROW(case_path("does-not-exist.json"), MissingDataError);
}
