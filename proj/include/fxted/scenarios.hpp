#pragma once

#include "fxted/dynamics.hpp"
#include "fxted/error.hpp"
#include "fxted/graph.hpp"
#include "fxted/model.hpp"
#include "fxted/protocol.hpp"
#include "fxted/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#ifndef FXTED_DATA_DIR
#define FXTED_DATA_DIR "data"
#endif

namespace fxted {

/// Directory holding the shipped case files: $FXT_DATA_DIR, else the build-time default.
inline std::filesystem::path data_dir() {
    if (const char* env = std::getenv("FXT_DATA_DIR"); env && *env) return env;
    return FXTED_DATA_DIR;
}

inline std::filesystem::path case_path(const std::string& file) {
    auto p = data_dir() / file;
    if (!std::filesystem::exists(p)) throw MissingDataError(p.string() + ": case file not found");
    return p;
}

/// Scales every load by the same factor so the total equals `total`.
inline std::vector<double> scale_to_total(const std::vector<double>& base, double total) {
    const double sum = sum_in_order(base);
    if (!(sum > 0.0)) throw ValidationError("cannot scale loads with a non-positive total");
    std::vector<double> out(base.size());
    for (std::size_t k = 0; k < base.size(); ++k) out[k] = base[k] * (total / sum);
    return out;
}

/// Largest boundary-layer width the sign term needs so one Euler step of the
/// linearised coupling cannot overshoot: 2 alpha_max p dt times a Laplacian norm bound.
inline double suggested_smoothing(const std::vector<GeneratorParams>& params, const TopologySchedule& schedule,
                                  const Gains& gains) {
    double alpha_max = 0.0;
    for (const auto& g : params) alpha_max = std::max(alpha_max, g.alpha);
    std::size_t max_degree = 0;
    for (const auto& topo : schedule.topologies())
        for (std::size_t i = 0; i < topo.size(); ++i) max_degree = std::max(max_degree, topo.degree(i));
    return 2.0 * alpha_max * gains.p * gains.dt * 2.0 * static_cast<double>(max_degree);
}

/// Random dispatch vectors summing to `total`.
template <class Rng>
std::vector<std::vector<double>> random_initial_dispatches(std::size_t n, std::size_t count, double total, Rng& rng) {
    std::exponential_distribution<double> share(1.0);
    std::vector<std::vector<double>> out;
    for (std::size_t c = 0; c < count; ++c) {
        std::vector<double> w(n);
        for (auto& x : w) x = share(rng);
        const double s = sum_in_order(w);
        for (auto& x : w) x = x / s * total;
        // put the rounding residue on the last entry so the sum is exact in order
        double head = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) head += w[i];
        w[n - 1] = total - head;
        out.push_back(std::move(w));
    }
    return out;
}

inline Gains case_study_gains() {
    Gains g;
    g.p = 1485.0;
    g.mu1 = g.nu1 = 0.8;
    g.mu2 = g.nu2 = 1.2;
    g.dt = 1e-5;
    return g;
}

inline constexpr double kCase57Demand = 141.13;
inline constexpr double kSwitchInterval = 0.0025;

/// 57-bus case, constrained, with the communication graph redrawn every 2.5 ms from
/// seeded random connected graphs and several random starting dispatches.
inline Scenario scenario_switching_57(std::uint64_t seed = 57) {
    Scenario s;
    s.name = "iv-a-switching-57";
    const auto path = case_path("case57.json");
    s.case_ref = path.string();
    s.dispatch = load_case(s.case_ref);
    s.dispatch.loads.loads = scale_to_total(s.dispatch.loads.loads, kCase57Demand);
    s.seed = seed;
    s.t_end = 1.0;
    s.mode = Mode::constrained;
    s.gains = case_study_gains();

    std::mt19937_64 rng(seed);
    const auto phases = static_cast<std::size_t>(std::llround(s.t_end / kSwitchInterval));
    s.schedule = random_switching_schedule(s.size(), phases, kSwitchInterval, 0.4, rng);
    s.gains.smoothing_eps = suggested_smoothing(s.dispatch.generators, s.schedule, s.gains);
    s.initial_P = random_initial_dispatches(s.size(), 4, total_demand(s.dispatch.loads, 0.0), rng);
    s.noise.seed = seed;
    validate(s);
    return s;
}

/// Demand sequence for the time-varying study. Which total follows which event is an
/// interpretation: the text only says the demand alternates between the two values.
inline const std::vector<std::pair<double, double>>& case57_demand_events() {
    static const std::vector<std::pair<double, double>> events{
        {0.66, 69.83}, {1.1, 212.81}, {1.31, 69.83}, {1.75, 212.81}};
    return events;
}

/// 57-bus case with truncated Gaussian disturbance (variance 0.01) and four
/// proportional load steps.
inline Scenario scenario_timevarying_noise_57(std::uint64_t seed = 57) {
    Scenario s;
    s.name = "iv-b-timevarying-noise-57";
    const auto path = case_path("case57.json");
    s.case_ref = path.string();
    s.dispatch = load_case(s.case_ref);
    const auto base = s.dispatch.loads.loads;
    s.dispatch.loads.loads = scale_to_total(base, kCase57Demand);
    for (const auto& [t, total] : case57_demand_events())
        s.dispatch.loads.events.push_back({t, scale_to_total(base, total)});
    s.seed = seed;
    s.t_end = 15.0;  // the last step plus the settling bound, rounded up
    s.tol = 1e-2;  // the disturbance keeps lambda jittering near 1e-3
    s.mode = Mode::constrained;
    s.gains = case_study_gains();
    s.schedule = TopologySchedule::fixed(Topology::ring(s.size()));
    s.gains.smoothing_eps = suggested_smoothing(s.dispatch.generators, s.schedule, s.gains);
    s.noise = NoiseModel::gaussian(std::sqrt(0.01), seed);
    validate(s);
    return s;
}

/// 30-bus case at 250 MW, fixed ring topology, discrete iteration with h = 0.1.
inline Scenario scenario_comparison_30() {
    Scenario s;
    s.name = "iv-c-comparison-30";
    const auto path = case_path("case30.json");
    s.case_ref = path.string();
    s.dispatch = load_case(s.case_ref);
    s.dispatch.loads.loads = scale_to_total(s.dispatch.loads.loads, 250.0);
    s.schedule = TopologySchedule::fixed(Topology::ring(s.size()));
    s.mode = Mode::discrete;
    s.discrete.h = 0.1;
    s.discrete.tol = 1e-3;
    s.t_end = 1.0;
    validate(s);
    return s;
}

/// Seeded random instance for property suites. Unconstrained instances have no limits;
/// constrained ones draw finite limits and a demand strictly inside [sum p_min, sum p_max].
/// The horizon is the settling bound T1 + T2; the sign term gets the suggested boundary layer.
inline Scenario random_scenario(std::size_t n, std::uint64_t seed, bool constrained) {
    if (n == 0) throw ValidationError("random_scenario needs at least one generator");
    std::mt19937_64 rng(seed);
    auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };

    Scenario s;
    s.name = "random-n" + std::to_string(n) + "-s" + std::to_string(seed) + (constrained ? "-c" : "-u");
    s.seed = seed;
    s.mode = constrained ? Mode::constrained : Mode::unconstrained;
    auto& gens = s.dispatch.generators;
    for (std::size_t i = 0; i < n; ++i) {
        GeneratorParams g;
        g.alpha = uni(0.1, 2.0);
        g.beta = uni(0.0, 10.0);
        g.gamma = uni(0.0, 5.0);
        if (constrained) {
            g.p_min = uni(0.0, 10.0);
            g.p_max = g.p_min + uni(5.0, 40.0);
        }
        gens.push_back(g);
    }
    const double p_tot = constrained ? sum_p_min(gens) + uni(0.05, 0.95) * (sum_p_max(gens) - sum_p_min(gens))
                                     : uni(20.0, 200.0);
    std::exponential_distribution<double> share(1.0);
    std::vector<double> w(n);
    for (auto& x : w) x = share(rng);
    s.dispatch.loads.loads = scale_to_total(w, p_tot);
    s.dispatch.assignment = Assignment::round_robin(n, n);
    s.dispatch.name = s.name;
    s.dispatch.source = "random";

    s.schedule = TopologySchedule::fixed(random_connected_topology(n, 0.5, rng));
    std::vector<double> lambda0(n);
    for (auto& l : lambda0) l = uni(-100.0, 100.0);
    s.lambda0 = lambda0;

    s.noise.seed = seed;
    s.gains.p = std::max(1.0, settling_bounds(gens, s.schedule, s.gains, disturbance_bound(s.noise, gens)).p_min_gain);
    s.gains.smoothing_eps = suggested_smoothing(gens, s.schedule, s.gains);
    const auto b = settling_bounds(gens, s.schedule, s.gains, 0.0);
    s.t_end = std::ceil(b.total() / s.gains.dt) * s.gains.dt;
    validate(s);
    return s;
}

} // namespace fxted
