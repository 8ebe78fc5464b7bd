#pragma once

#include "fxted/constrained.hpp"
#include "fxted/dynamics.hpp"
#include "fxted/error.hpp"
#include "fxted/graph.hpp"
#include "fxted/linalg.hpp"
#include "fxted/model.hpp"
#include "fxted/oracle.hpp"
#include "fxted/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace fxted {

/// Step-gain schedule for finite-time average consensus: c_k = 1 / s_k cycling over
/// the distinct nonzero eigenvalues s_1 < ... < s_K of the chosen matrix.
struct FacaPlan {
    FacaSpectrum source = FacaSpectrum::laplacian;
    Matrix laplacian;
    std::vector<double> eigenvalues;

    std::size_t size() const noexcept { return eigenvalues.size(); }
    /// Gain for the update taking iteration k to k + 1 (k counts from 0).
    double gain(std::size_t k) const { return 1.0 / eigenvalues[k % eigenvalues.size()]; }
};

/// Plan from the graph Laplacian; K rounds of x <- (I - c_k L) x give the exact average.
inline FacaPlan make_faca_plan(const Topology& g) {
    if (!is_connected(g)) throw DisconnectedTopologyError("topology is not connected");
    FacaPlan plan;
    plan.source = FacaSpectrum::laplacian;
    plan.laplacian = laplacian(g);
    plan.eigenvalues = spectrum(plan.laplacian).distinct_nonzero;
    return plan;
}

/// Plan for incremental costs scaled by 2 alpha_i: the spectrum of D^1/2 L D^1/2 with
/// D = diag(2 alpha). This is what makes the lambda iteration settle in K steps when
/// the alphas differ.
inline FacaPlan make_weighted_faca_plan(const Topology& g, const std::vector<GeneratorParams>& params) {
    if (params.size() != g.size()) throw ValidationError("generator count does not match topology");
    if (!is_connected(g)) throw DisconnectedTopologyError("topology is not connected");
    FacaPlan plan;
    plan.source = FacaSpectrum::weighted;
    plan.laplacian = laplacian(g);
    const std::size_t n = g.size();
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m(i, j) = std::sqrt(2.0 * params[i].alpha) * plan.laplacian(i, j) * std::sqrt(2.0 * params[j].alpha);
    plan.eigenvalues = spectrum(m).distinct_nonzero;
    return plan;
}

inline FacaPlan make_faca_plan(const Topology& g, const std::vector<GeneratorParams>& params, FacaSpectrum which) {
    return which == FacaSpectrum::weighted ? make_weighted_faca_plan(g, params) : make_faca_plan(g);
}

/// K rounds of Laplacian averaging. Every node ends on the initial mean.
inline std::vector<double> faca_consensus(std::vector<double> x, const FacaPlan& plan) {
    if (plan.source != FacaSpectrum::laplacian) throw ValidationError("average consensus needs a Laplacian plan");
    if (x.size() != plan.laplacian.rows()) throw ValidationError("consensus input size does not match topology");
    for (std::size_t k = 0; k < plan.size(); ++k) {
        const auto lx = multiply(plan.laplacian, x);
        const double c = plan.gain(k);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= c * lx[i];
    }
    return x;
}

/// Finite-time compensation of the consistency error: z / (1 + h |z|).
inline double z_step(double z, double h) noexcept { return z / (1.0 + h * std::abs(z)); }

struct DiscreteState {
    std::vector<double> lambda;
    std::vector<double> P;
    std::size_t k = 0;
};

inline std::vector<double> consistency_errors(const DiscreteState& s, const std::vector<GeneratorParams>& params) {
    std::vector<double> z(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) z[i] = consistency_error(params[i], s.P[i], s.lambda[i]);
    return z;
}

/// One iteration:
///   lambda_i <- 2 a_i [ (W lambda)_i - lambda_i + P_i + b_i/(2 a_i) - z_step(z_i) ]
///   P_i      <- -c (L lambda)_i + P_i
/// with W = I - c L and c the plan gain for this iteration.
inline DiscreteState discrete_update(const DiscreteState& s, const FacaPlan& plan,
                                     const std::vector<GeneratorParams>& params, double h) {
    const std::size_t n = params.size();
    const double c = plan.gain(s.k);
    const auto l_lambda = multiply(plan.laplacian, s.lambda);
    DiscreteState next;
    next.lambda.resize(n);
    next.P.resize(n);
    next.k = s.k + 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double two_a = 2.0 * params[i].alpha;
        const double z = consistency_error(params[i], s.P[i], s.lambda[i]);
        const double w_lambda = s.lambda[i] - c * l_lambda[i];
        next.lambda[i] = two_a * (w_lambda - s.lambda[i] + s.P[i] + params[i].beta / two_a - z_step(z, h));
        next.P[i] = s.P[i] - c * l_lambda[i];
    }
    return next;
}

struct DiscreteSample {
    std::size_t k = 0;
    std::vector<double> lambda;
    std::vector<double> P;
    double max_abs_z = 0.0;
    double consensus_err = 0.0;
};

struct DiscreteResult {
    DispatchSolution solution;
    std::vector<DiscreteSample> samples;
    std::size_t iterations = 0;
    std::size_t plan_size = 0;
    double lambda_tilde = 0.0;
    std::vector<SaturationRound> rounds;
    KktAudit audit;
};

inline std::size_t default_max_iterations(std::size_t plan_size, double h, double tol) {
    return static_cast<std::size_t>(10.0 * (static_cast<double>(plan_size) + 1.0 / (h * tol)));
}

/// Runs the discrete iteration until lambda agrees and every |z_i| is within tol, then
/// applies the saturation rounds with Laplacian averaging.
inline DiscreteResult discrete_solve(const Scenario& scenario, SaturationRule rule = SaturationRule::dominant_side) {
    validate(scenario);
    if (scenario.noise.enabled()) throw ValidationError("discrete mode does not take a disturbance");
    const auto& phases = scenario.schedule.phases();
    for (const auto& ph : phases)
        if (ph.topology_index != phases.front().topology_index)
            throw ValidationError("discrete mode needs a fixed topology");
    if (!scenario.dispatch.loads.events.empty()) throw ValidationError("discrete mode does not take load events");

    const auto& topo = scenario.schedule.topologies()[phases.front().topology_index];
    const auto& params = scenario.dispatch.generators;
    const auto& ds = scenario.discrete;
    if (!(ds.h > 0.0)) throw ValidationError("h must be positive");
    if (!(ds.tol > 0.0)) throw ValidationError("discrete tol must be positive");
    const FacaPlan plan = make_faca_plan(topo, params, ds.plan);
    const FacaPlan averaging = make_faca_plan(topo);

    DiscreteResult r;
    r.plan_size = plan.size();
    const SystemState s0 = initial_state(scenario);
    DiscreteState s{s0.lambda, s0.P, 0};
    const std::size_t limit = ds.max_iters ? ds.max_iters : default_max_iterations(plan.size(), ds.h, ds.tol);

    auto record = [&] {
        DiscreteSample smp{s.k, s.lambda, s.P, 0.0, consensus_error(s.lambda)};
        for (double z : consistency_errors(s, params)) smp.max_abs_z = std::max(smp.max_abs_z, std::abs(z));
        r.samples.push_back(smp);
        return smp.max_abs_z <= ds.tol && smp.consensus_err <= ds.tol;
    };
    while (!record()) {
        if (s.k >= limit)
            throw MaxIterationsError("discrete iteration did not converge in " + std::to_string(limit) + " iterations");
        s = discrete_update(s, plan, params, ds.h);
    }
    r.iterations = s.k;

    r.lambda_tilde = weighted_lambda_mean(s.lambda, params);
    std::vector<double> P(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) P[i] = params[i].dispatch_at(r.lambda_tilde);
    AverageConsensus average = [&](const std::vector<double>& v) { return faca_consensus(v, averaging); };
    auto sat = saturation_rounds(params, r.lambda_tilde, P, average, rule);
    r.solution = std::move(sat.solution);
    r.rounds = std::move(sat.rounds);
    r.audit = audit_dispatch(params, total_demand(scenario.dispatch.loads, 0.0), r.solution);
    return r;
}

} // namespace fxted
