#pragma once

#include "fxted/error.hpp"
#include "fxted/json_util.hpp"
#include "fxted/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace fxted {

/// Optimal incremental cost and dispatch, with the generators pinned at a limit.
struct DispatchSolution {
    double lambda_star = 0.0;
    std::vector<double> P_star;
    std::vector<std::size_t> saturated;  // ascending
    std::vector<std::size_t> at_max;     // subset of saturated

    bool is_saturated(std::size_t i) const {
        return std::binary_search(saturated.begin(), saturated.end(), i);
    }
    bool is_at_max(std::size_t i) const { return std::binary_search(at_max.begin(), at_max.end(), i); }
};

/// A generator held at one of its limits.
struct PinnedGenerator {
    std::size_t index;
    double power;
    friend bool operator==(const PinnedGenerator&, const PinnedGenerator&) = default;
};

inline double inverse_weight_sum(const std::vector<GeneratorParams>& gens) {
    double s = 0.0;
    for (const auto& g : gens) s += 1.0 / (2.0 * g.alpha);
    return s;
}

/// Lambda of the problem without capacity limits: (P_tot + sum beta/2a) / sum 1/2a.
inline double unconstrained_lambda(const std::vector<GeneratorParams>& gens, double p_tot) {
    double num = p_tot, den = 0.0;
    for (const auto& g : gens) {
        num += g.beta / (2.0 * g.alpha);
        den += 1.0 / (2.0 * g.alpha);
    }
    return num / den;
}

inline DispatchSolution unconstrained_optimum(const std::vector<GeneratorParams>& gens, double p_tot) {
    DispatchSolution s;
    s.lambda_star = unconstrained_lambda(gens, p_tot);
    for (const auto& g : gens) s.P_star.push_back(g.dispatch_at(s.lambda_star));
    return s;
}

/// Shifts the unconstrained lambda so the free generators absorb what the pinned
/// ones no longer produce. Throws AllSaturatedError when nobody is left free.
inline double lambda_correction(const std::vector<GeneratorParams>& gens, const std::vector<PinnedGenerator>& theta,
                                double lambda_tilde) {
    std::vector<bool> pinned(gens.size(), false);
    double num = 0.0;
    for (const auto& t : theta) {
        const auto& g = gens[t.index];
        pinned[t.index] = true;
        num += (lambda_tilde - g.marginal(t.power)) / (2.0 * g.alpha);
    }
    double den = 0.0;
    for (std::size_t i = 0; i < gens.size(); ++i)
        if (!pinned[i]) den += 1.0 / (2.0 * gens[i].alpha);
    if (den == 0.0) throw AllSaturatedError("every generator is saturated; no free set remains");
    return lambda_tilde + num / den;
}

namespace detail {

inline double clipped_dispatch(const GeneratorParams& g, double lambda) {
    return std::clamp(g.dispatch_at(lambda), g.p_min, g.p_max);
}

inline double clipped_total(const std::vector<GeneratorParams>& gens, double lambda) {
    double s = 0.0;
    for (const auto& g : gens) s += clipped_dispatch(g, lambda);
    return s;
}

inline void throw_if_infeasible(const std::vector<GeneratorParams>& gens, double p_tot) {
    if (gens.empty()) throw InfeasibleError("no generators");
    if (!demand_feasible(gens, p_tot))
        throw InfeasibleError("demand " + std::to_string(p_tot) + " MW outside [" + std::to_string(sum_p_min(gens)) +
                              ", " + std::to_string(sum_p_max(gens)) + "]");
}

} // namespace detail

/// The unique KKT point of the capacity-limited problem.
///
/// The active set is located on the incremental-cost axis: the clipped total
/// sum_i clip((lambda - beta_i) / 2 alpha_i, p_min_i, p_max_i) is piecewise linear and
/// non-decreasing with breakpoints at each generator's marginal cost at its limits.
/// The segment where it crosses P_tot fixes which generators are free; lambda then
/// solves the balance on that free set. Ties at a limit keep the generator free.
inline DispatchSolution constrained_optimum(const std::vector<GeneratorParams>& gens, double p_tot) {
    detail::throw_if_infeasible(gens, p_tot);

    std::vector<double> breaks;
    for (const auto& g : gens) {
        breaks.push_back(g.marginal(g.p_min));
        if (std::isfinite(g.p_max)) breaks.push_back(g.marginal(g.p_max));
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    // Segment (lo, hi) of the lambda axis that contains the solution.
    double lo = -kInf, hi = kInf;
    std::size_t k = 0;
    while (k < breaks.size() && detail::clipped_total(gens, breaks[k]) < p_tot) ++k;
    if (k == breaks.size()) {
        lo = breaks.back();
    } else if (k == 0) {
        lo = hi = breaks[0];
    } else {
        lo = breaks[k - 1];
        hi = breaks[k];
    }
    if (k < breaks.size() && detail::clipped_total(gens, breaks[k]) == p_tot) lo = hi = breaks[k];

    DispatchSolution s;
    s.P_star.assign(gens.size(), 0.0);
    double pinned_power = 0.0, num = 0.0, den = 0.0;
    std::vector<bool> free(gens.size(), false);
    for (std::size_t i = 0; i < gens.size(); ++i) {
        const auto& g = gens[i];
        const double m_min = g.marginal(g.p_min);
        const double m_max = std::isfinite(g.p_max) ? g.marginal(g.p_max) : kInf;
        if (lo == hi) {
            if (m_min < lo && lo < m_max) free[i] = true;
        } else if (m_min <= lo && hi <= m_max) {
            free[i] = true;
        }
        if (free[i]) {
            num += g.beta / (2.0 * g.alpha);
            den += 1.0 / (2.0 * g.alpha);
        } else {
            const bool at_max = m_max <= lo;
            s.P_star[i] = at_max ? g.p_max : g.p_min;
            pinned_power += s.P_star[i];
            s.saturated.push_back(i);
            if (at_max) s.at_max.push_back(i);
        }
    }

    if (den > 0.0) {
        s.lambda_star = (p_tot - pinned_power + num) / den;
        for (std::size_t i = 0; i < gens.size(); ++i)
            if (free[i]) s.P_star[i] = gens[i].dispatch_at(s.lambda_star);
    } else {
        // Every unit sits at a limit: any lambda inside the segment satisfies the KKT branches.
        s.lambda_star = lo;
    }
    return s;
}

/// Grid enumeration over the feasible simplex, refined by shrinking the grid 3x
/// around the incumbent. Independent check of constrained_optimum for N <= 4.
inline DispatchSolution brute_force_optimum(const std::vector<GeneratorParams>& gens, double p_tot, double grid,
                                            double final_grid = 1e-5) {
    detail::throw_if_infeasible(gens, p_tot);
    const std::size_t n = gens.size();
    if (n > 4) throw ValidationError("brute_force_optimum supports at most 4 generators");
    if (!(grid > 0.0)) throw ValidationError("grid must be positive");

    std::vector<double> lower(n), upper(n);
    const double min_total = sum_p_min(gens);
    for (std::size_t i = 0; i < n; ++i) {
        lower[i] = gens[i].p_min;
        upper[i] = std::min(gens[i].p_max, p_tot - (min_total - gens[i].p_min));
    }

    std::vector<double> best;
    double best_cost = kInf;
    std::vector<double> x(n);

    auto consider = [&] {
        double used = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) used += x[i];
        x[n - 1] = p_tot - used;
        if (x[n - 1] < gens[n - 1].p_min || x[n - 1] > gens[n - 1].p_max) return;
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += cost(gens[i], x[i]);
        if (c < best_cost) {
            best_cost = c;
            best = x;
        }
    };

    // Candidate values per free coordinate: a grid over [lo, hi] plus both ends.
    auto axis = [](double lo, double hi, double h) {
        std::vector<double> v;
        for (double t = lo; t < hi; t += h) v.push_back(t);
        v.push_back(hi);
        return v;
    };

    auto search = [&](const std::vector<double>& lo, const std::vector<double>& hi, double h) {
        std::vector<std::vector<double>> axes;
        for (std::size_t i = 0; i + 1 < n; ++i) axes.push_back(axis(lo[i], hi[i], h));
        std::vector<std::size_t> idx(axes.size(), 0);
        for (;;) {
            for (std::size_t i = 0; i < axes.size(); ++i) x[i] = axes[i][idx[i]];
            consider();
            std::size_t d = 0;
            while (d < axes.size() && ++idx[d] == axes[d].size()) idx[d++] = 0;
            if (d == axes.size()) break;
        }
    };

    search(lower, upper, grid);
    if (best.empty()) throw InfeasibleError("grid found no feasible point; refine the grid");
    double h = grid;
    while (h >= final_grid) {
        std::vector<double> lo(n), hi(n);
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = std::max(lower[i], best[i] - 2.0 * h);
            hi[i] = std::min(upper[i], best[i] + 2.0 * h);
        }
        h /= 3.0;
        search(lo, hi, h);
    }

    DispatchSolution s;
    s.P_star = best;
    // Report lambda from the free generators, as the KKT equality branch defines it.
    double lam_sum = 0.0;
    int free_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& g = gens[i];
        const double tol = 10.0 * final_grid;
        if (best[i] <= g.p_min + tol) {
            s.saturated.push_back(i);
        } else if (best[i] >= g.p_max - tol) {
            s.saturated.push_back(i);
            s.at_max.push_back(i);
        } else {
            lam_sum += g.marginal(best[i]);
            ++free_count;
        }
    }
    s.lambda_star = free_count > 0 ? lam_sum / free_count : kInf;
    return s;
}

/// Largest violation of the capacity-limited optimality conditions, each measured in its own units.
struct KktReport {
    double balance = 0.0;      // |sum P - P_tot|
    double stationarity = 0.0; // max over free units of |2 a P + b - lambda|
    double complementarity = 0.0; // max over pinned units of the wrong-sign marginal gap
    double bounds = 0.0;       // max limit overshoot
    double worst() const { return std::max({balance, stationarity, complementarity, bounds}); }
};

/// Classification follows the solution's own saturated / at_max sets.
inline KktReport kkt_report(const std::vector<GeneratorParams>& gens, double p_tot, const DispatchSolution& s) {
    KktReport r;
    double total = 0.0;
    for (std::size_t i = 0; i < gens.size(); ++i) {
        const auto& g = gens[i];
        const double p = s.P_star[i];
        total += p;
        r.bounds = std::max({r.bounds, g.p_min - p, p - g.p_max});
        const double m = g.marginal(p);
        if (!s.is_saturated(i)) {
            r.stationarity = std::max(r.stationarity, std::abs(m - s.lambda_star));
        } else if (s.is_at_max(i)) {
            r.bounds = std::max(r.bounds, std::abs(p - g.p_max));
            r.complementarity = std::max(r.complementarity, m - s.lambda_star);
        } else {
            r.bounds = std::max(r.bounds, std::abs(p - g.p_min));
            r.complementarity = std::max(r.complementarity, s.lambda_star - m);
        }
    }
    r.balance = std::abs(total - p_tot);
    return r;
}

inline json to_json(const DispatchSolution& s) {
    return json{{"lambda_star", s.lambda_star}, {"P_star", s.P_star}, {"saturated", s.saturated},
                {"at_max", s.at_max}};
}

} // namespace fxted
