#pragma once

#include "fxted/error.hpp"
#include "fxted/json_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace fxted {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Quadratic cost alpha*P^2 + beta*P + gamma with capacity limits (MW).
struct GeneratorParams {
    double alpha = 1.0;  // $/MW^2
    double beta = 0.0;   // $/MW
    double gamma = 0.0;  // $
    double p_min = 0.0;
    double p_max = kInf;

    /// Incremental cost 2*alpha*P + beta.
    double marginal(double p) const noexcept { return 2.0 * alpha * p + beta; }
    /// Dispatch at which the incremental cost equals `lambda`.
    double dispatch_at(double lambda) const noexcept { return (lambda - beta) / (2.0 * alpha); }

    friend bool operator==(const GeneratorParams&, const GeneratorParams&) = default;
};

inline double cost(const GeneratorParams& g, double p) noexcept {
    return g.alpha * p * p + g.beta * p + g.gamma;
}

inline void validate(const GeneratorParams& g, std::size_t index) {
    const std::string who = "generator " + std::to_string(index);
    if (!(g.alpha > 0.0) || !std::isfinite(g.alpha)) throw ValidationError(who + ": alpha must be positive");
    if (!(g.beta >= 0.0) || !std::isfinite(g.beta)) throw ValidationError(who + ": beta must be non-negative");
    if (!(g.gamma >= 0.0) || !std::isfinite(g.gamma)) throw ValidationError(who + ": gamma must be non-negative");
    if (!(g.p_min >= 0.0) || !std::isfinite(g.p_min)) throw ValidationError(who + ": p_min must be non-negative");
    if (!(g.p_min < g.p_max)) throw ValidationError(who + ": p_min must be below p_max");
}

struct LoadEvent {
    double time;
    std::vector<double> demands;
    friend bool operator==(const LoadEvent&, const LoadEvent&) = default;
};

/// Per-load demands (MW), piecewise constant in time and right-continuous at events.
struct LoadSchedule {
    std::vector<double> loads;
    std::vector<LoadEvent> events;

    std::size_t load_count() const noexcept { return loads.size(); }

    const std::vector<double>& demands_at(double t) const {
        const std::vector<double>* current = &loads;
        for (const auto& e : events) {
            if (e.time <= t) current = &e.demands;
            else break;
        }
        return *current;
    }

    friend bool operator==(const LoadSchedule&, const LoadSchedule&) = default;
};

inline double sum_in_order(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

inline double total_demand(const LoadSchedule& loads, double t) {
    return sum_in_order(loads.demands_at(t));
}

inline void validate(const LoadSchedule& s) {
    auto check = [&](const std::vector<double>& d, const std::string& who) {
        if (d.size() != s.loads.size()) throw ValidationError(who + ": demand list does not match load count");
        for (double x : d)
            if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError(who + ": demands must be non-negative");
    };
    check(s.loads, "loads");
    for (std::size_t k = 0; k < s.events.size(); ++k) {
        check(s.events[k].demands, "load event " + std::to_string(k));
        if (k > 0 && !(s.events[k].time > s.events[k - 1].time))
            throw ValidationError("load event times must be strictly increasing");
        if (!(s.events[k].time >= 0.0)) throw ValidationError("load event times must be non-negative");
    }
}

/// Load k is served (communicates its demand) to generator assign[k].
struct Assignment {
    std::vector<std::size_t> assign;

    static Assignment round_robin(std::size_t loads, std::size_t generators) {
        Assignment a;
        for (std::size_t k = 0; k < loads; ++k) a.assign.push_back(k % generators);
        return a;
    }

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

inline void validate(const Assignment& a, std::size_t loads, std::size_t generators) {
    if (a.assign.size() != loads) throw ValidationError("assignment must list one generator per load");
    for (std::size_t g : a.assign)
        if (g >= generators) throw ValidationError("assignment references generator " + std::to_string(g));
}

struct SystemState {
    std::vector<double> P;
    std::vector<double> lambda;
    double t = 0.0;
};

/// P_i(0) = sum of the demands assigned to generator i, summed in load order.
inline std::vector<double> initial_dispatch(const std::vector<double>& demands, const Assignment& a,
                                            std::size_t generators) {
    std::vector<double> p(generators, 0.0);
    for (std::size_t k = 0; k < demands.size(); ++k) p[a.assign[k]] += demands[k];
    return p;
}

inline std::vector<double> initial_dispatch(const LoadSchedule& loads, const Assignment& a, std::size_t generators) {
    return initial_dispatch(loads.loads, a, generators);
}

/// Moves each load's demand change onto its assigned generator.
inline void apply_demand_change(std::vector<double>& P, const std::vector<double>& before,
                                const std::vector<double>& after, const Assignment& a) {
    for (std::size_t k = 0; k < before.size(); ++k) P[a.assign[k]] += after[k] - before[k];
}

/// A generator fleet plus its demand: the input of one dispatch problem.
struct DispatchCase {
    std::string name;
    std::string source;
    std::vector<GeneratorParams> generators;
    LoadSchedule loads;
    Assignment assignment;

    std::size_t size() const noexcept { return generators.size(); }

    friend bool operator==(const DispatchCase&, const DispatchCase&) = default;
};

inline double sum_p_min(const std::vector<GeneratorParams>& gens) {
    double s = 0.0;
    for (const auto& g : gens) s += g.p_min;
    return s;
}

inline double sum_p_max(const std::vector<GeneratorParams>& gens) {
    double s = 0.0;
    for (const auto& g : gens) s += g.p_max;
    return s;
}

inline bool demand_feasible(const std::vector<GeneratorParams>& gens, double p_tot) {
    return sum_p_min(gens) <= p_tot && p_tot <= sum_p_max(gens);
}

/// Throws InfeasibleError unless every demand level (base and after each event) fits the fleet's limits.
inline void check_feasible(const DispatchCase& c) {
    auto check = [&](const std::vector<double>& d, const std::string& when) {
        const double p_tot = sum_in_order(d);
        if (!demand_feasible(c.generators, p_tot))
            throw InfeasibleError("demand " + std::to_string(p_tot) + " MW " + when +
                                  " lies outside [sum p_min, sum p_max] = [" +
                                  std::to_string(sum_p_min(c.generators)) + ", " +
                                  std::to_string(sum_p_max(c.generators)) + "]");
    };
    check(c.loads.loads, "at t=0");
    for (const auto& e : c.loads.events) check(e.demands, "at t=" + std::to_string(e.time));
}

inline void validate(const DispatchCase& c) {
    if (c.generators.empty()) throw ValidationError("case has no generators");
    for (std::size_t i = 0; i < c.generators.size(); ++i) validate(c.generators[i], i);
    validate(c.loads);
    validate(c.assignment, c.loads.load_count(), c.generators.size());
}

// --- JSON -------------------------------------------------------------------

inline GeneratorParams generator_from_json(const json& j, const std::string& where) {
    GeneratorParams g;
    g.alpha = detail::number_field(j, "alpha", where);
    g.beta = detail::number_field(j, "beta", where);
    g.gamma = detail::number_field(j, "gamma", where);
    g.p_min = detail::number_field(j, "p_min", where);
    g.p_max = detail::limit_field(j, "p_max", where, kInf);
    return g;
}

inline json to_json(const GeneratorParams& g) {
    return json{{"alpha", g.alpha}, {"beta", g.beta}, {"gamma", g.gamma}, {"p_min", g.p_min},
                {"p_max", detail::limit_value(g.p_max)}};
}

inline std::vector<double> number_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError(where + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(detail::number(j[k], where + "[" + std::to_string(k) + "]"));
    return out;
}

inline LoadSchedule load_schedule_from_json(const json& j, const std::string& where) {
    LoadSchedule s;
    s.loads = number_list(detail::field(j, "loads", where), where + ".loads");
    if (auto it = j.find("events"); it != j.end()) {
        if (!it->is_array()) throw ParseError(where + ".events: expected an array");
        for (std::size_t k = 0; k < it->size(); ++k) {
            const std::string w = where + ".events[" + std::to_string(k) + "]";
            LoadEvent e;
            e.time = detail::number_field((*it)[k], "t", w);
            e.demands = number_list(detail::field((*it)[k], "demands", w), w + ".demands");
            s.events.push_back(std::move(e));
        }
    }
    return s;
}

inline json to_json(const LoadSchedule& s) {
    json events = json::array();
    for (const auto& e : s.events) events.push_back({{"t", e.time}, {"demands", e.demands}});
    return json{{"loads", s.loads}, {"events", events}};
}

inline Assignment assignment_from_json(const json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError(where + ": expected an array of generator indices");
    Assignment a;
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (!j[k].is_number_unsigned())
            throw ParseError(where + "[" + std::to_string(k) + "]: expected a generator index");
        a.assign.push_back(j[k].get<std::size_t>());
    }
    return a;
}

/// Parses and validates a case object. Missing "assignment" defaults to load k -> generator k mod N.
inline DispatchCase case_from_json(const json& j, const std::string& where = "case") {
    DispatchCase c;
    if (auto it = j.find("name"); it != j.end() && it->is_string()) c.name = it->get<std::string>();
    if (auto it = j.find("source"); it != j.end() && it->is_string()) c.source = it->get<std::string>();
    const json& gens = detail::field(j, "generators", where);
    if (!gens.is_array()) throw ParseError(where + ".generators: expected an array");
    for (std::size_t i = 0; i < gens.size(); ++i)
        c.generators.push_back(generator_from_json(gens[i], where + ".generators[" + std::to_string(i) + "]"));
    if (j.contains("loads")) c.loads = load_schedule_from_json(j, where);
    if (auto it = j.find("assignment"); it != j.end())
        c.assignment = assignment_from_json(*it, where + ".assignment");
    else
        c.assignment = Assignment::round_robin(c.loads.load_count(), c.generators.size());
    validate(c);
    return c;
}

inline json to_json(const DispatchCase& c) {
    json gens = json::array();
    for (const auto& g : c.generators) gens.push_back(to_json(g));
    json j = to_json(c.loads);
    j["name"] = c.name;
    j["source"] = c.source;
    j["generators"] = gens;
    j["assignment"] = c.assignment.assign;
    return j;
}

inline DispatchCase load_case(const std::string& path) {
    return case_from_json(detail::read_json_file(path), path);
}

inline void save_case(const DispatchCase& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(path + ": cannot open for writing");
    out << to_json(c).dump(2) << '\n';
    if (!out) throw Error(path + ": write failed");
}

} // namespace fxted
