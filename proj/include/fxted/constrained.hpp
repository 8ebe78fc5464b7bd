#pragma once

#include "fxted/dynamics.hpp"
#include "fxted/error.hpp"
#include "fxted/graph.hpp"
#include "fxted/model.hpp"
#include "fxted/oracle.hpp"
#include "fxted/protocol.hpp"
#include "fxted/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace fxted {

/// Generators found outside their limits (and not yet saturated), each paired
/// with the limit it crossed.
inline std::vector<PinnedGenerator> detect_violations(const std::vector<double>& P,
                                                      const std::vector<GeneratorParams>& params,
                                                      const std::vector<PinnedGenerator>& theta) {
    std::vector<bool> pinned(params.size(), false);
    for (const auto& t : theta) pinned[t.index] = true;
    std::vector<PinnedGenerator> omega;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (pinned[i]) continue;
        if (P[i] < params[i].p_min) omega.push_back({i, params[i].p_min});
        else if (P[i] > params[i].p_max) omega.push_back({i, params[i].p_max});
    }
    return omega;
}

/// Free generators follow lambda; saturated ones sit at their recorded limit.
inline std::vector<double> saturate_and_dispatch(double lambda, const std::vector<GeneratorParams>& params,
                                                 const std::vector<PinnedGenerator>& theta) {
    std::vector<double> P(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) P[i] = params[i].dispatch_at(lambda);
    for (const auto& t : theta) P[t.index] = t.power;
    return P;
}

/// Which of the newly violating generators enter the saturated set each round.
enum class SaturationRule {
    /// Only the side (above max / below min) with the larger total violation; both on a tie.
    dominant_side,
    /// Every violator at once.
    all_violators,
};

inline const char* to_string(SaturationRule r) {
    return r == SaturationRule::all_violators ? "all_violators" : "dominant_side";
}

inline std::vector<PinnedGenerator> select_saturations(const std::vector<PinnedGenerator>& omega,
                                                       const std::vector<double>& P,
                                                       const std::vector<GeneratorParams>& params,
                                                       SaturationRule rule) {
    if (rule == SaturationRule::all_violators) return omega;
    double above = 0.0, below = 0.0;
    for (const auto& v : omega) {
        if (v.power == params[v.index].p_max) above += P[v.index] - v.power;
        else below += v.power - P[v.index];
    }
    std::vector<PinnedGenerator> out;
    for (const auto& v : omega) {
        const bool is_above = v.power == params[v.index].p_max;
        if ((is_above && above >= below) || (!is_above && below >= above)) out.push_back(v);
    }
    return out;
}

/// (y_i, z_i) = ((lambda - 2 a_i P_i - b_i)/(2 a_i), 0) for saturated i, (0, 1/(2 a_i)) otherwise.
struct ConsensusPair {
    std::vector<double> y;
    std::vector<double> z;
};

inline ConsensusPair init_consensus_pair(double lambda, const std::vector<GeneratorParams>& params,
                                         const std::vector<PinnedGenerator>& theta) {
    ConsensusPair c{std::vector<double>(params.size(), 0.0), std::vector<double>(params.size(), 0.0)};
    for (std::size_t i = 0; i < params.size(); ++i) c.z[i] = 1.0 / (2.0 * params[i].alpha);
    for (const auto& t : theta) {
        const auto& g = params[t.index];
        c.y[t.index] = (lambda - g.marginal(t.power)) / (2.0 * g.alpha);
        c.z[t.index] = 0.0;
    }
    return c;
}

struct ConsensusRun {
    std::vector<double> values;
    double time = 0.0;
    long long steps = 0;
};

/// Fixed-time average consensus: lambda_dot_i = p sum_j a_ij [sign + sgn^mu1 + sgn^mu2](x_j - x_i)
/// under the schedule. The node mean is invariant, so all nodes settle on it.
///
/// Integration uses its own step, small enough for the sgn^mu1 chatter to stay below
/// `tol`, with a boundary layer on the sign term sized so the linearised update contracts.
/// Throws NotConvergedError if the spread is still above `tol` at twice the T2 bound.
inline ConsensusRun average_consensus_fxt(const std::vector<double>& values, const TopologySchedule& schedule,
                                          const Gains& gains, double tol = 1e-9) {
    validate(gains);
    const std::size_t n = values.size();
    if (schedule.node_count() != n) throw ValidationError("consensus input size does not match topology");
    ConsensusRun run{values, 0.0, 0};
    if (n <= 1 || consensus_error(values) <= tol) return run;

    const std::vector<GeneratorParams> unit(n, GeneratorParams{0.5, 0.0, 0.0, 0.0, kInf});
    const double t2 = settling_bounds(unit, schedule, gains, 0.0).T2;

    std::size_t max_degree = 1;
    for (const auto& g : schedule.topologies())
        for (std::size_t i = 0; i < n; ++i) max_degree = std::max(max_degree, g.degree(i));
    const double lap_bound = 2.0 * static_cast<double>(max_degree);
    const double range = consensus_error(values);
    const double stiff = gains.p * lap_bound * (1.0 + std::pow(range, gains.mu2 - 1.0));
    const double dt = std::min(gains.dt, 0.01 / stiff);
    Gains g = gains;
    g.dt = dt;
    g.smoothing_eps = 2.0 * gains.p * lap_bound * dt;

    std::vector<detail::EdgeList> edges;
    for (const auto& topo : schedule.topologies()) edges.push_back(topo.edges());
    std::vector<double> delta(n);
    const auto limit = static_cast<long long>(std::ceil(2.0 * t2 / dt));
    for (long long k = 0; k < limit; ++k) {
        const auto& phase = schedule.phases()[schedule.phase_index_at_step(k, dt)];
        std::fill(delta.begin(), delta.end(), 0.0);
        for (auto [i, j] : edges[phase.topology_index]) {
            const double f = coupling(run.values[j] - run.values[i], g);
            delta[i] += f;
            delta[j] -= f;
        }
        for (std::size_t i = 0; i < n; ++i) run.values[i] += dt * delta[i];
        run.steps = k + 1;
        run.time = static_cast<double>(k + 1) * dt;
        if (consensus_error(run.values) <= tol) return run;
    }
    throw NotConvergedError("average consensus spread " + std::to_string(consensus_error(run.values)) +
                            " above tolerance at 2*T2 = " + std::to_string(2.0 * t2) + " s");
}

inline double mean_of(const std::vector<double>& v) { return sum_in_order(v) / static_cast<double>(v.size()); }

/// A network-wide average: returns each node's value after consensus.
using AverageConsensus = std::function<std::vector<double>(const std::vector<double>&)>;

struct SaturationRound {
    std::vector<PinnedGenerator> omega;  // entered this round
    std::vector<PinnedGenerator> theta;  // after this round
    double y_c = 0.0;
    double z_c = 0.0;
    double lambda = 0.0;
    std::vector<double> P;
};

struct SaturationResult {
    DispatchSolution solution;
    std::vector<SaturationRound> rounds;
};

/// The saturation loop. Starts from the unconstrained consensus (lambda_tilde, P),
/// grows the saturated set, and re-derives lambda from lambda_tilde via two
/// network averages (y over saturated, z over free units).
inline SaturationResult saturation_rounds(const std::vector<GeneratorParams>& params, double lambda_tilde,
                                          std::vector<double> P, const AverageConsensus& average,
                                          SaturationRule rule = SaturationRule::dominant_side) {
    SaturationResult out;
    std::vector<PinnedGenerator> theta;
    double lambda = lambda_tilde;
    for (;;) {
        const auto omega = detect_violations(P, params, theta);
        if (omega.empty()) break;
        SaturationRound round;
        round.omega = select_saturations(omega, P, params, rule);
        theta.insert(theta.end(), round.omega.begin(), round.omega.end());
        std::sort(theta.begin(), theta.end(),
                  [](const PinnedGenerator& a, const PinnedGenerator& b) { return a.index < b.index; });
        round.theta = theta;
        P = saturate_and_dispatch(lambda, params, theta);

        const ConsensusPair pair = init_consensus_pair(lambda_tilde, params, theta);
        round.y_c = mean_of(average(pair.y));
        round.z_c = mean_of(average(pair.z));
        if (!(round.z_c > 0.0) || theta.size() == params.size())
            throw AllSaturatedError("every generator is saturated after round " + std::to_string(out.rounds.size() + 1));
        lambda = lambda_tilde + round.y_c / round.z_c;
        P = saturate_and_dispatch(lambda, params, theta);
        round.lambda = lambda;
        round.P = P;
        out.rounds.push_back(std::move(round));
    }
    out.solution.lambda_star = lambda;
    out.solution.P_star = P;
    for (const auto& t : theta) {
        out.solution.saturated.push_back(t.index);
        if (t.power == params[t.index].p_max) out.solution.at_max.push_back(t.index);
    }
    return out;
}

/// Post-hoc check of a dispatch against the optimality conditions and the oracle.
struct KktAudit {
    KktReport kkt;
    double oracle_deviation = 0.0;  // max_i |P_i - P*_i| in MW
    bool passed = true;
};

inline KktAudit audit_dispatch(const std::vector<GeneratorParams>& params, double p_tot, const DispatchSolution& s,
                               double tol = 1e-3) {
    KktAudit a;
    a.kkt = kkt_report(params, p_tot, s);
    const auto ref = constrained_optimum(params, p_tot);
    for (std::size_t i = 0; i < params.size(); ++i)
        a.oracle_deviation = std::max(a.oracle_deviation, std::abs(s.P_star[i] - ref.P_star[i]));
    a.passed = a.kkt.worst() <= tol && a.oracle_deviation <= tol;
    return a;
}

struct Algorithm1Options {
    SaturationRule rule = SaturationRule::dominant_side;
    /// The unconstrained run keeps going 1 s past first convergence so lambda_tilde is
    /// well inside the tolerance band before the saturation rounds amplify it by 1/(2 alpha).
    SimulationOptions simulation{1.0, std::nullopt};
    double consensus_tol = 1e-9;
};

struct Algorithm1Result {
    DispatchSolution solution;
    Trace trace;  // the unconstrained run
    double lambda_tilde = 0.0;
    std::vector<SaturationRound> rounds;
    KktAudit audit;
};

/// Fixed-time constrained dispatch: the continuous protocol settles the unconstrained
/// problem, then saturation rounds correct lambda with fixed-time average consensus.
inline Algorithm1Result algorithm1(const Scenario& scenario, const Algorithm1Options& opts = {}) {
    Algorithm1Result r;
    r.trace = simulate(scenario, opts.simulation);
    const auto& params = scenario.dispatch.generators;
    r.lambda_tilde = weighted_lambda_mean(r.trace.final_state.lambda, params);

    AverageConsensus average = [&](const std::vector<double>& v) {
        return average_consensus_fxt(v, scenario.schedule, scenario.gains, opts.consensus_tol).values;
    };
    auto sat = saturation_rounds(params, r.lambda_tilde, r.trace.final_state.P, average, opts.rule);
    r.solution = std::move(sat.solution);
    r.rounds = std::move(sat.rounds);
    const double p_tot = total_demand(scenario.dispatch.loads, r.trace.final_state.t);
    r.audit = audit_dispatch(params, p_tot, r.solution);
    return r;
}

} // namespace fxted
