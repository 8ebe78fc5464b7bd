#pragma once

#include "fxted/error.hpp"
#include "fxted/graph.hpp"
#include "fxted/json_util.hpp"
#include "fxted/model.hpp"
#include "fxted/protocol.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace fxted {

enum class Mode { unconstrained, constrained, discrete };

inline const char* to_string(Mode m) {
    switch (m) {
    case Mode::constrained: return "constrained";
    case Mode::discrete: return "discrete";
    case Mode::unconstrained: break;
    }
    return "unconstrained";
}

inline Mode mode_from_string(const std::string& s) {
    if (s == "unconstrained") return Mode::unconstrained;
    if (s == "constrained") return Mode::constrained;
    if (s == "discrete") return Mode::discrete;
    throw ValidationError("unknown mode '" + s + "'");
}

/// Which spectrum supplies the FACA step gains c_k in the discrete dispatch recursion.
enum class FacaSpectrum {
    weighted,   // D^{1/2} L D^{1/2}, D = diag(2 alpha): exact consensus in K steps for any alpha
    laplacian,  // L itself: exact only when every alpha equals 0.5
};

inline const char* to_string(FacaSpectrum s) { return s == FacaSpectrum::laplacian ? "laplacian" : "weighted"; }

inline FacaSpectrum faca_spectrum_from_string(const std::string& s) {
    if (s == "weighted") return FacaSpectrum::weighted;
    if (s == "laplacian") return FacaSpectrum::laplacian;
    throw ValidationError("unknown FACA plan '" + s + "'");
}

struct DiscreteSettings {
    double h = 0.1;
    double tol = 1e-3;
    std::size_t max_iters = 0;  // 0: 10 * (K + 1/(h tol))
    FacaSpectrum plan = FacaSpectrum::weighted;

    friend bool operator==(const DiscreteSettings&, const DiscreteSettings&) = default;
};

/// Everything needed to run one experiment.
struct Scenario {
    std::string name;
    std::string case_ref;  // path of the case file as written; empty when the case is inline
    DispatchCase dispatch;
    TopologySchedule schedule;
    Gains gains;
    NoiseModel noise;
    Mode mode = Mode::unconstrained;
    double t_end = 1.0;
    std::uint64_t seed = 0;
    double tol = 1e-3;
    std::size_t sample_stride = 100;
    std::optional<std::vector<double>> lambda0;
    std::vector<std::vector<double>> initial_P;  // alternative starting dispatches
    DiscreteSettings discrete;

    std::size_t size() const noexcept { return dispatch.size(); }
};

inline void validate(const Scenario& s) {
    validate(s.dispatch);
    validate(s.gains);
    validate(s.noise);
    const std::size_t n = s.size();
    if (s.schedule.phases().empty()) throw ValidationError("scenario has no topology schedule");
    if (s.schedule.node_count() != n)
        throw ValidationError("topology has " + std::to_string(s.schedule.node_count()) + " nodes but case has " +
                              std::to_string(n) + " generators");
    if (!(s.t_end > 0.0)) throw ValidationError("t_end must be positive");
    if (!(s.tol > 0.0)) throw ValidationError("tol must be positive");
    if (s.sample_stride == 0) throw ValidationError("sample_stride must be positive");
    if (s.lambda0 && s.lambda0->size() != n) throw ValidationError("lambda0 must have one entry per generator");
    const double p_tot = total_demand(s.dispatch.loads, 0.0);
    for (const auto& p0 : s.initial_P) {
        if (p0.size() != n) throw ValidationError("initial_P entries must have one value per generator");
        if (std::abs(sum_in_order(p0) - p_tot) > 1e-9 * std::max(1.0, std::abs(p_tot)))
            throw ValidationError("initial_P entries must sum to the initial demand");
    }
    if (!(s.discrete.h > 0.0)) throw ValidationError("discrete.h must be positive");
    if (!(s.discrete.tol > 0.0)) throw ValidationError("discrete.tol must be positive");
    if (s.mode != Mode::unconstrained) check_feasible(s.dispatch);
}

// --- JSON -------------------------------------------------------------------

inline Topology topology_from_json(const json& j, const std::string& where) {
    const json& nj = detail::field(j, "n", where);
    if (!nj.is_number_unsigned()) throw ParseError(where + ".n: expected a node count");
    const json& ej = detail::field(j, "edges", where);
    if (!ej.is_array()) throw ParseError(where + ".edges: expected an array of [i,j] pairs");
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t k = 0; k < ej.size(); ++k) {
        const json& e = ej[k];
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned())
            throw ParseError(where + ".edges[" + std::to_string(k) + "]: expected [i,j]");
        edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    return Topology::from_edges(nj.get<std::size_t>(), edges);
}

inline json to_json(const Topology& g) {
    json edges = json::array();
    for (auto [i, j] : g.edges()) edges.push_back({i, j});
    return json{{"n", g.size()}, {"edges", edges}};
}

/// Accepts a bare topology (static schedule) or {topologies, phases:[{t, topology}]}
/// where `topology` is an index into `topologies` or an inline topology.
inline TopologySchedule schedule_from_json(const json& j, const std::string& where) {
    if (!j.contains("phases")) return TopologySchedule::fixed(topology_from_json(j, where));
    std::vector<Topology> graphs;
    if (auto it = j.find("topologies"); it != j.end()) {
        if (!it->is_array()) throw ParseError(where + ".topologies: expected an array");
        for (std::size_t k = 0; k < it->size(); ++k)
            graphs.push_back(topology_from_json((*it)[k], where + ".topologies[" + std::to_string(k) + "]"));
    }
    const json& pj = j["phases"];
    if (!pj.is_array()) throw ParseError(where + ".phases: expected an array");
    std::vector<TopologySchedule::Phase> phases;
    for (std::size_t k = 0; k < pj.size(); ++k) {
        const std::string w = where + ".phases[" + std::to_string(k) + "]";
        const double t = detail::number_field(pj[k], "t", w);
        const json& tj = detail::field(pj[k], "topology", w);
        if (tj.is_number_unsigned()) {
            phases.push_back({t, tj.get<std::size_t>()});
        } else {
            graphs.push_back(topology_from_json(tj, w + ".topology"));
            phases.push_back({t, graphs.size() - 1});
        }
    }
    return TopologySchedule(std::move(graphs), std::move(phases));
}

inline json to_json(const TopologySchedule& s) {
    json graphs = json::array();
    for (const auto& g : s.topologies()) graphs.push_back(to_json(g));
    json phases = json::array();
    for (const auto& p : s.phases()) phases.push_back({{"t", p.start_time}, {"topology", p.topology_index}});
    return json{{"topologies", graphs}, {"phases", phases}};
}

inline Gains gains_from_json(const json& j, const std::string& where) {
    Gains g;
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    g.p = detail::number_field(j, "p", where);
    if (j.contains("mu1")) g.mu1 = detail::number_field(j, "mu1", where);
    if (j.contains("mu2")) g.mu2 = detail::number_field(j, "mu2", where);
    if (j.contains("nu1")) g.nu1 = detail::number_field(j, "nu1", where);
    if (j.contains("nu2")) g.nu2 = detail::number_field(j, "nu2", where);
    if (j.contains("dt")) g.dt = detail::number_field(j, "dt", where);
    if (j.contains("smoothing_eps")) g.smoothing_eps = detail::number_field(j, "smoothing_eps", where);
    return g;
}

inline json to_json(const Gains& g) {
    return json{{"p", g.p},     {"mu1", g.mu1}, {"mu2", g.mu2},
                {"nu1", g.nu1}, {"nu2", g.nu2}, {"smoothing_eps", g.smoothing_eps}};
}

inline NoiseModel noise_from_json(const json& j, const std::string& where, std::uint64_t default_seed) {
    NoiseModel n;
    n.seed = default_seed;
    const json& kind = detail::field(j, "kind", where);
    if (!kind.is_string()) throw ParseError(where + ".kind: expected a string");
    n.kind = noise_kind_from_string(kind.get<std::string>());
    if (j.contains("bound")) n.bound = detail::number_field(j, "bound", where);
    if (j.contains("sigma")) n.sigma = detail::number_field(j, "sigma", where);
    if (j.contains("variance")) n.sigma = std::sqrt(detail::number_field(j, "variance", where));
    if (auto it = j.find("seed"); it != j.end()) {
        if (!it->is_number_unsigned()) throw ParseError(where + ".seed: expected an unsigned integer");
        n.seed = it->get<std::uint64_t>();
    }
    return n;
}

inline json to_json(const NoiseModel& n) {
    json j{{"kind", to_string(n.kind)}, {"seed", n.seed}};
    if (n.kind == NoiseModel::Kind::uniform) j["bound"] = n.bound;
    if (n.kind == NoiseModel::Kind::truncated_gaussian) j["sigma"] = n.sigma;
    return j;
}

/// Relative case paths resolve against `base_dir` (the scenario file's directory).
inline Scenario scenario_from_json(const json& j, const std::filesystem::path& base_dir = {},
                                   const std::string& where = "scenario") {
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    Scenario s;
    if (auto it = j.find("name"); it != j.end() && it->is_string()) s.name = it->get<std::string>();
    if (auto it = j.find("seed"); it != j.end()) {
        if (!it->is_number_unsigned()) throw ParseError(where + ".seed: expected an unsigned integer");
        s.seed = it->get<std::uint64_t>();
    }

    const json& cj = detail::field(j, "case", where);
    if (cj.is_string()) {
        s.case_ref = cj.get<std::string>();
        std::filesystem::path p(s.case_ref);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        s.dispatch = load_case(p.string());
    } else {
        s.dispatch = case_from_json(cj, where + ".case");
    }
    if (auto it = j.find("loads"); it != j.end()) {
        s.dispatch.loads = load_schedule_from_json(*it, where + ".loads");
        s.dispatch.assignment = Assignment::round_robin(s.dispatch.loads.load_count(), s.dispatch.size());
    }
    if (auto it = j.find("assignment"); it != j.end())
        s.dispatch.assignment = assignment_from_json(*it, where + ".assignment");

    s.schedule = schedule_from_json(detail::field(j, "topology_schedule", where), where + ".topology_schedule");
    s.gains = gains_from_json(detail::field(j, "gains", where), where + ".gains");
    if (j.contains("dt")) s.gains.dt = detail::number_field(j, "dt", where);
    if (auto it = j.find("noise"); it != j.end() && !it->is_null())
        s.noise = noise_from_json(*it, where + ".noise", s.seed);
    else
        s.noise.seed = s.seed;
    if (auto it = j.find("mode"); it != j.end()) {
        if (!it->is_string()) throw ParseError(where + ".mode: expected a string");
        s.mode = mode_from_string(it->get<std::string>());
    }
    s.t_end = detail::number_field(j, "t_end", where);
    if (j.contains("tol")) s.tol = detail::number_field(j, "tol", where);
    if (auto it = j.find("sample_stride"); it != j.end()) {
        if (!it->is_number_unsigned()) throw ParseError(where + ".sample_stride: expected a positive integer");
        s.sample_stride = it->get<std::size_t>();
    }
    if (auto it = j.find("lambda0"); it != j.end() && !it->is_null())
        s.lambda0 = number_list(*it, where + ".lambda0");
    if (auto it = j.find("initial_P"); it != j.end()) {
        if (!it->is_array()) throw ParseError(where + ".initial_P: expected an array of dispatch vectors");
        for (std::size_t k = 0; k < it->size(); ++k)
            s.initial_P.push_back(number_list((*it)[k], where + ".initial_P[" + std::to_string(k) + "]"));
    }
    if (auto it = j.find("discrete"); it != j.end()) {
        const std::string w = where + ".discrete";
        if (it->contains("h")) s.discrete.h = detail::number_field(*it, "h", w);
        if (it->contains("tol")) s.discrete.tol = detail::number_field(*it, "tol", w);
        if (auto m = it->find("max_iters"); m != it->end()) {
            if (!m->is_number_unsigned()) throw ParseError(w + ".max_iters: expected an unsigned integer");
            s.discrete.max_iters = m->get<std::size_t>();
        }
        if (auto pl = it->find("plan"); pl != it->end()) {
            if (!pl->is_string()) throw ParseError(w + ".plan: expected a string");
            s.discrete.plan = faca_spectrum_from_string(pl->get<std::string>());
        }
    }
    validate(s);
    return s;
}

inline json to_json(const Scenario& s) {
    json j;
    j["name"] = s.name;
    if (s.case_ref.empty()) j["case"] = to_json(s.dispatch);
    else j["case"] = s.case_ref;
    j["loads"] = to_json(s.dispatch.loads);
    j["assignment"] = s.dispatch.assignment.assign;
    j["topology_schedule"] = to_json(s.schedule);
    j["gains"] = to_json(s.gains);
    j["noise"] = to_json(s.noise);
    j["mode"] = to_string(s.mode);
    j["t_end"] = s.t_end;
    j["dt"] = s.gains.dt;
    j["seed"] = s.seed;
    j["tol"] = s.tol;
    j["sample_stride"] = s.sample_stride;
    if (s.lambda0) j["lambda0"] = *s.lambda0;
    if (!s.initial_P.empty()) j["initial_P"] = s.initial_P;
    j["discrete"] = {{"h", s.discrete.h},
                     {"tol", s.discrete.tol},
                     {"max_iters", s.discrete.max_iters},
                     {"plan", to_string(s.discrete.plan)}};
    return j;
}

inline Scenario load_scenario(const std::string& path) {
    const json j = detail::read_json_file(path);
    return scenario_from_json(j, std::filesystem::path(path).parent_path(), path);
}

inline void save_scenario(const Scenario& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(path + ": cannot open for writing");
    out << to_json(s).dump(2) << '\n';
    if (!out) throw Error(path + ": write failed");
}

} // namespace fxted
