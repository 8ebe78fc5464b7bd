#pragma once

#include "fxted/error.hpp"
#include "fxted/graph.hpp"
#include "fxted/model.hpp"
#include "fxted/oracle.hpp"
#include "fxted/protocol.hpp"
#include "fxted/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace fxted {

/// Consistency error e_i = P_i - (lambda_i - beta_i) / (2 alpha_i).
inline double consistency_error(const GeneratorParams& g, double p, double lambda) {
    return p - g.dispatch_at(lambda);
}

inline double max_consistency_error(const SystemState& s, const std::vector<GeneratorParams>& params) {
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i)
        worst = std::max(worst, std::abs(consistency_error(params[i], s.P[i], s.lambda[i])));
    return worst;
}

/// max_ij |lambda_i - lambda_j|.
inline double consensus_error(const std::vector<double>& lambda) {
    if (lambda.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(lambda.begin(), lambda.end());
    return *hi - *lo;
}

/// Inverse-cost weighted mean Gamma * sum lambda_i / (2 alpha_i), Gamma = 1 / sum 1/(2 alpha_i).
inline double weighted_lambda_mean(const std::vector<double>& lambda, const std::vector<GeneratorParams>& params) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        num += lambda[i] / (2.0 * params[i].alpha);
        den += 1.0 / (2.0 * params[i].alpha);
    }
    return num / den;
}

/// V = 1/2 sum (1/(2 alpha_i)) (lambda_i - lambda_bar)^2.
inline double lyapunov_V(const SystemState& s, const std::vector<GeneratorParams>& params) {
    const double bar = weighted_lambda_mean(s.lambda, params);
    double v = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double d = s.lambda[i] - bar;
        v += d * d / (2.0 * params[i].alpha);
    }
    return 0.5 * v;
}

struct Derivative {
    std::vector<double> dP;
    std::vector<double> dlambda;
};

/// Coupling p * [sign + sgn^mu1 + sgn^mu2](x), odd in x.
inline double coupling(double x, const Gains& g) noexcept {
    return g.p * (sign_term(x, g.smoothing_eps) + sgn_mu(x, g.mu1) + sgn_mu(x, g.mu2));
}

namespace detail {

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

inline void rhs_into(const SystemState& s, const EdgeList& edges, const std::vector<GeneratorParams>& params,
                     const Gains& gains, const std::vector<double>& noise, Derivative& d) {
    const std::size_t n = params.size();
    d.dP.assign(noise.begin(), noise.end());
    d.dlambda.resize(n);
    for (auto [i, j] : edges) {
        const double f = coupling(s.lambda[j] - s.lambda[i], gains);
        d.dP[i] += f;
        d.dP[j] -= f;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double e = consistency_error(params[i], s.P[i], s.lambda[i]);
        d.dlambda[i] = 2.0 * params[i].alpha * (d.dP[i] + sgn_mu(e, gains.nu1) + sgn_mu(e, gains.nu2));
    }
}

} // namespace detail

/// Right-hand side of the dispatch / incremental-cost update laws. The disturbance
/// enters dP_i and reaches dlambda_i through it.
inline Derivative rhs(const SystemState& s, const Topology& topology, const std::vector<GeneratorParams>& params,
                      const Gains& gains, const std::vector<double>& noise) {
    Derivative d;
    detail::rhs_into(s, topology.edges(), params, gains, noise, d);
    return d;
}

inline Derivative rhs(const SystemState& s, const Topology& topology, const std::vector<GeneratorParams>& params,
                      const Gains& gains) {
    return rhs(s, topology, params, gains, std::vector<double>(params.size(), 0.0));
}

/// One explicit Euler step of length gains.dt starting at s.t. Topology switches are
/// snapped forward to the step grid; load events in (t, t + dt] are applied after the step.
inline SystemState step(const SystemState& s, const TopologySchedule& schedule, const DispatchCase& dispatch,
                        const Gains& gains, NoiseSampler& noise) {
    const double dt = gains.dt;
    const auto k = static_cast<long long>(std::llround(s.t / dt));
    const auto& phase = schedule.phases()[schedule.phase_index_at_step(k, dt)];
    const auto& topology = schedule.topologies()[phase.topology_index];

    std::vector<double> w(dispatch.size());
    noise.sample(w);
    Derivative d;
    detail::rhs_into(s, topology.edges(), dispatch.generators, gains, w, d);

    SystemState next = s;
    for (std::size_t i = 0; i < dispatch.size(); ++i) {
        next.P[i] += dt * d.dP[i];
        next.lambda[i] += dt * d.dlambda[i];
    }
    next.t = static_cast<double>(k + 1) * dt;
    for (const auto& e : dispatch.loads.events) {
        const long long ek = TopologySchedule::snap_to_grid(e.time, dt);
        if (ek == k + 1) {
            apply_demand_change(next.P, dispatch.loads.demands_at(s.t), e.demands, dispatch.assignment);
        }
    }
    return next;
}

struct SettlingBounds {
    double T1 = 0.0;
    double T2 = 0.0;
    double p_min_gain = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double Delta = 0.0;
    double lambda2 = 0.0;

    double total() const noexcept { return T1 + T2; }
};

/// Upper bound on the disturbance term that drives the consensus error, from a
/// noise model's clip bound w: w * (1 + Gamma / (2 alpha_min)).
inline double disturbance_bound(const NoiseModel& noise, const std::vector<GeneratorParams>& params) {
    const double w = noise.clip_bound();
    if (w == 0.0) return 0.0;
    double alpha_min = kInf;
    for (const auto& g : params) alpha_min = std::min(alpha_min, g.alpha);
    const double gamma = 1.0 / inverse_weight_sum(params);
    return w * (1.0 + gamma / (2.0 * alpha_min));
}

/// Consistency-phase bound T1, consensus-phase bound T2 (with lambda2 taken as the
/// smallest algebraic connectivity over the schedule) and the gain needed to
/// dominate a disturbance of size Delta.
inline SettlingBounds settling_bounds(const std::vector<GeneratorParams>& params, const TopologySchedule& schedule,
                                      const Gains& gains, double Delta) {
    validate(gains);
    if (!(Delta >= 0.0)) throw ValidationError("Delta must be non-negative");
    const double n = static_cast<double>(params.size());
    double alpha_min = kInf, alpha_max = 0.0;
    for (const auto& g : params) {
        alpha_min = std::min(alpha_min, g.alpha);
        alpha_max = std::max(alpha_max, g.alpha);
    }

    SettlingBounds b;
    b.Delta = Delta;
    b.T1 = 2.0 / (std::pow(2.0, (1.0 + gains.nu1) / 2.0) * (1.0 - gains.nu1)) +
           2.0 * std::pow(n, (gains.nu2 - 1.0) / 2.0) / (std::pow(2.0, (1.0 + gains.nu2) / 2.0) * (gains.nu2 - 1.0));

    b.lambda2 = lambda2_star(schedule);
    if (std::isinf(b.lambda2)) {
        b.c1 = b.c2 = kInf;
        b.T2 = 0.0;
        b.p_min_gain = 0.0;
        return b;
    }
    const double base = b.lambda2 * alpha_min;
    b.c1 = gains.p * std::pow(2.0, gains.mu1) * std::pow(base, (1.0 + gains.mu1) / 2.0);
    b.c2 = gains.p * std::pow(2.0, gains.mu2) / std::pow(n, gains.mu2 - 1.0) * std::pow(base, (1.0 + gains.mu2) / 2.0);
    b.T2 = 2.0 / (b.c1 * (1.0 - gains.mu1)) + 2.0 / (b.c2 * (gains.mu2 - 1.0));
    b.p_min_gain = 2.0 * Delta * std::sqrt(n * alpha_max / (b.lambda2 * alpha_min));
    return b;
}

inline SettlingBounds settling_bounds(const Scenario& s) {
    return settling_bounds(s.dispatch.generators, s.schedule, s.gains, disturbance_bound(s.noise, s.dispatch.generators));
}

struct TraceSample {
    double t = 0.0;
    std::vector<double> lambda;
    std::vector<double> P;
    double consensus_err = 0.0;
    double balance_residual = 0.0;
    double V = 0.0;
};

/// A load event as the simulator applied it, and when consensus (to the run's
/// tolerance) was next observed at or after it.
struct EventRecord {
    double time = 0.0;
    double demand = 0.0;
    std::optional<double> reentry_time;  // lambda spread back within tol
    std::optional<double> settled_time;  // spread and every |e_i| within tol
};

struct Trace {
    std::size_t generators = 0;
    std::vector<TraceSample> samples;
    std::optional<double> consensus_time;    // first consensus_err <= tol
    std::optional<double> consistency_time;  // first max|e_i| <= tol
    std::optional<double> convergence_time;  // first time both hold together
    std::vector<EventRecord> events;
    double max_balance_residual = 0.0;  // over every step, not just samples
    SystemState final_state;
    double tol = 1e-3;
};

struct SimulationOptions {
    /// Stop this long after joint convergence (after the last load event, if any);
    /// negative runs to t_end.
    double hold_after_convergence = -1.0;
    /// Overrides the scenario's starting dispatch (one of Scenario::initial_P, say).
    std::optional<std::vector<double>> initial_P;
};

/// Initial state: dispatch from the load assignment (or override), incremental
/// cost from lambda0 or, absent that, consistent with the dispatch (e_i = 0).
inline SystemState initial_state(const Scenario& s, const std::optional<std::vector<double>>& P_override = {}) {
    SystemState st;
    st.P = P_override ? *P_override
                      : initial_dispatch(s.dispatch.loads.demands_at(0.0), s.dispatch.assignment, s.size());
    if (s.lambda0) {
        st.lambda = *s.lambda0;
    } else {
        st.lambda.resize(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) st.lambda[i] = s.dispatch.generators[i].marginal(st.P[i]);
    }
    st.t = 0.0;
    return st;
}

/// Integrates the continuous protocol with fixed-step Euler from t = 0 to t_end.
inline Trace simulate(const Scenario& scenario, const SimulationOptions& opts = {}) {
    validate(scenario);
    const auto& params = scenario.dispatch.generators;
    const auto& loads = scenario.dispatch.loads;
    const std::size_t n = scenario.size();
    const double dt = scenario.gains.dt;
    const double tol = scenario.tol;
    const auto steps = static_cast<long long>(std::llround(scenario.t_end / dt));

    std::vector<detail::EdgeList> edges;
    for (const auto& g : scenario.schedule.topologies()) edges.push_back(g.edges());
    std::vector<long long> phase_step;
    for (const auto& p : scenario.schedule.phases()) phase_step.push_back(TopologySchedule::snap_to_grid(p.start_time, dt));
    std::vector<long long> event_step;
    for (const auto& e : loads.events) event_step.push_back(TopologySchedule::snap_to_grid(e.time, dt));

    Trace trace;
    trace.generators = n;
    trace.tol = tol;
    SystemState s = initial_state(scenario, opts.initial_P);
    std::vector<double> demands = loads.demands_at(0.0);
    double p_tot = sum_in_order(demands);

    NoiseSampler sampler(scenario.noise);
    std::vector<double> w(n, 0.0);
    Derivative d;

    auto record = [&](double cerr, double resid) {
        TraceSample ts;
        ts.t = s.t;
        ts.lambda = s.lambda;
        ts.P = s.P;
        ts.consensus_err = cerr;
        ts.balance_residual = resid;
        ts.V = lyapunov_V(s, params);
        trace.samples.push_back(std::move(ts));
    };

    auto observe = [&](long long k) {
        const double cerr = consensus_error(s.lambda);
        const double eerr = max_consistency_error(s, params);
        const double resid = std::abs(sum_in_order(s.P) - p_tot);
        trace.max_balance_residual = std::max(trace.max_balance_residual, resid);
        if (!trace.consensus_time && cerr <= tol) trace.consensus_time = s.t;
        if (!trace.consistency_time && eerr <= tol) trace.consistency_time = s.t;
        if (!trace.convergence_time && cerr <= tol && eerr <= tol) trace.convergence_time = s.t;
        for (auto& ev : trace.events) {
            if (!ev.reentry_time && cerr <= tol) ev.reentry_time = s.t;
            if (!ev.settled_time && cerr <= tol && eerr <= tol) ev.settled_time = s.t;
        }
        if (k % static_cast<long long>(scenario.sample_stride) == 0 || k == steps) record(cerr, resid);
    };

    std::size_t phase = 0;
    std::size_t next_event = 0;
    while (next_event < event_step.size() && event_step[next_event] <= 0) ++next_event;
    observe(0);

    for (long long k = 0; k < steps; ++k) {
        while (phase + 1 < phase_step.size() && phase_step[phase + 1] <= k) ++phase;
        const auto& topo_edges = edges[scenario.schedule.phases()[phase].topology_index];
        sampler.sample(w);
        detail::rhs_into(s, topo_edges, params, scenario.gains, w, d);
        for (std::size_t i = 0; i < n; ++i) {
            s.P[i] += dt * d.dP[i];
            s.lambda[i] += dt * d.dlambda[i];
        }
        s.t = static_cast<double>(k + 1) * dt;
        while (next_event < event_step.size() && event_step[next_event] <= k + 1) {
            const auto& e = loads.events[next_event];
            apply_demand_change(s.P, demands, e.demands, scenario.dispatch.assignment);
            demands = e.demands;
            p_tot = sum_in_order(demands);
            trace.events.push_back({e.time, p_tot, std::nullopt, std::nullopt});
            ++next_event;
        }
        observe(k + 1);
        const auto& settled = trace.events.empty() ? trace.convergence_time : trace.events.back().settled_time;
        if (opts.hold_after_convergence >= 0.0 && next_event == event_step.size() && settled &&
            s.t >= *settled + opts.hold_after_convergence) {
            if (trace.samples.back().t != s.t) record(consensus_error(s.lambda), std::abs(sum_in_order(s.P) - p_tot));
            break;
        }
    }
    trace.final_state = s;
    return trace;
}

/// How the lambda spread behaved after one load event, read off the samples.
struct EventRecovery {
    double time = 0.0;
    double max_excursion = 0.0;            // largest sampled spread before the next event
    std::optional<double> recovered_time;  // from here to the next event the spread stays within band
};

inline std::vector<EventRecovery> event_recovery(const Trace& trace, double band) {
    std::vector<EventRecovery> out;
    for (std::size_t e = 0; e < trace.events.size(); ++e) {
        EventRecovery r;
        r.time = trace.events[e].time;
        const double until = e + 1 < trace.events.size() ? trace.events[e + 1].time : kInf;
        std::optional<double> candidate;
        for (const auto& smp : trace.samples) {
            if (smp.t < r.time || smp.t >= until) continue;
            r.max_excursion = std::max(r.max_excursion, smp.consensus_err);
            if (smp.consensus_err > band) candidate.reset();
            else if (!candidate) candidate = smp.t;
        }
        r.recovered_time = candidate;
        out.push_back(r);
    }
    return out;
}

} // namespace fxted
