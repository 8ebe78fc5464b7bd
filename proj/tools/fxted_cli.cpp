// fxted: run dispatch scenarios from the command line.
//
// Exit codes: 0 pass, 1 input error, 2 convergence failure.

#include "fxted/fxted.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace fxted;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitInput = 1;
constexpr int kExitConvergence = 2;

struct Options {
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::optional<double> tol;
    std::string format = "csv";
    std::size_t trials = 1;

    // discrete
    std::optional<double> h;
    std::optional<std::size_t> max_iters;
    std::optional<std::string> plan;

    std::string rule = "dominant_side";
};

fs::path output_dir(const Options& o) {
    fs::path dir = o.out_dir;
    if (dir.empty()) {
        const char* env = std::getenv("FXT_OUT_DIR");
        dir = (env && *env) ? fs::path(env) : fs::path(".");
    }
    fs::create_directories(dir);
    return dir;
}

std::string trace_ext(const Options& o) { return o.format == "json" ? ".json" : ".csv"; }

// Flags override scenario fields.
void apply_overrides(Scenario& s, const Options& o) {
    if (o.seed) {
        s.seed = *o.seed;
        s.noise.seed = *o.seed;
    }
    if (o.dt) {
        // keep the boundary layer in proportion to the step
        if (s.gains.smoothing_eps > 0.0) s.gains.smoothing_eps *= *o.dt / s.gains.dt;
        s.gains.dt = *o.dt;
    }
    if (o.tol) {
        s.tol = *o.tol;
        s.discrete.tol = *o.tol;
    }
    if (o.h) s.discrete.h = *o.h;
    if (o.max_iters) s.discrete.max_iters = *o.max_iters;
    if (o.plan) s.discrete.plan = faca_spectrum_from_string(*o.plan);
    validate(s);
}

SaturationRule rule_from(const Options& o) {
    if (o.rule == "dominant_side") return SaturationRule::dominant_side;
    if (o.rule == "all_violators") return SaturationRule::all_violators;
    throw ValidationError("unknown saturation rule '" + o.rule + "'");
}

int exit_for(const RunSummary& s) { return s.pass ? kExitPass : kExitConvergence; }

void emit(const RunSummary& s, const fs::path& path) {
    const json j = to_json(s);
    write_json(j, path.string());
    std::cout << j.dump(2) << '\n';
}

json events_json(const Trace& trace, double band) {
    json a = json::array();
    const auto rec = event_recovery(trace, band);
    for (std::size_t e = 0; e < trace.events.size(); ++e) {
        const auto& ev = trace.events[e];
        a.push_back({{"time", ev.time},
                     {"demand", ev.demand},
                     {"max_excursion", rec[e].max_excursion},
                     {"recovered_time", rec[e].recovered_time ? json(*rec[e].recovered_time) : json(nullptr)},
                     {"settled_time", ev.settled_time ? json(*ev.settled_time) : json(nullptr)}});
    }
    return a;
}

// --- continuous, unconstrained ----------------------------------------------

RunSummary simulate_summary(const Scenario& s, const Trace& trace) {
    const auto& params = s.dispatch.generators;
    const double p_tot = total_demand(s.dispatch.loads, trace.final_state.t);
    const auto ref = unconstrained_optimum(params, p_tot);
    const auto b = settling_bounds(s);

    RunSummary r;
    r.scenario = s.name;
    r.mode = "simulate";
    r.seed = s.seed;
    r.first_convergence_time = trace.convergence_time;
    r.bound = b.total();
    r.oracle_lambda = ref.lambda_star;
    r.oracle_P = ref.P_star;
    r.lambda = weighted_lambda_mean(trace.final_state.lambda, params);
    r.P = trace.final_state.P;
    for (double l : trace.final_state.lambda) r.max_deviation = std::max(r.max_deviation, std::abs(l - ref.lambda_star));
    r.tolerance = s.tol;
    r.converged = trace.convergence_time.has_value();
    r.details = {{"bounds", to_json(b)},
                 {"gains", to_json(s.gains)},
                 {"max_balance_residual", trace.max_balance_residual},
                 {"events", events_json(trace, s.tol)}};
    r.finalize();
    return r;
}

// --- continuous, constrained -------------------------------------------------

RunSummary constrained_summary(const Scenario& s, const Algorithm1Result& a) {
    const auto& params = s.dispatch.generators;
    const double p_tot = total_demand(s.dispatch.loads, a.trace.final_state.t);
    const auto ref = constrained_optimum(params, p_tot);
    const auto b = settling_bounds(s);

    RunSummary r;
    r.scenario = s.name;
    r.mode = "constrained";
    r.seed = s.seed;
    r.first_convergence_time = a.trace.convergence_time;
    r.bound = b.total();
    r.oracle_lambda = ref.lambda_star;
    r.oracle_P = ref.P_star;
    r.lambda = a.solution.lambda_star;
    r.P = a.solution.P_star;
    r.max_deviation = a.audit.oracle_deviation;
    r.tolerance = s.tol;
    r.converged = a.trace.convergence_time.has_value();
    r.details = {{"bounds", to_json(b)},
                 {"gains", to_json(s.gains)},
                 {"lambda_tilde", a.lambda_tilde},
                 {"rounds", a.rounds.size()},
                 {"audit", to_json(a.audit)},
                 {"max_balance_residual", a.trace.max_balance_residual},
                 {"events", events_json(a.trace, s.tol)}};
    r.finalize();
    return r;
}

json rounds_json(const Algorithm1Result& a) {
    json rounds = json::array();
    for (const auto& round : a.rounds) rounds.push_back(to_json(round));
    return {{"lambda_tilde", a.lambda_tilde},
            {"rounds", rounds},
            {"solution", to_json(a.solution)},
            {"audit", to_json(a.audit)}};
}

// --- discrete ----------------------------------------------------------------

RunSummary discrete_summary(const Scenario& s, const DiscreteResult& d) {
    const double p_tot = total_demand(s.dispatch.loads, 0.0);
    const auto ref = constrained_optimum(s.dispatch.generators, p_tot);
    RunSummary r;
    r.scenario = s.name;
    r.mode = "discrete";
    r.seed = s.seed;
    r.iterations = d.iterations;
    r.oracle_lambda = ref.lambda_star;
    r.oracle_P = ref.P_star;
    r.lambda = d.solution.lambda_star;
    r.P = d.solution.P_star;
    r.max_deviation = d.audit.oracle_deviation;
    // lambda is settled to tol; dispatch error scales with the demand
    r.tolerance = s.discrete.tol * std::max(1.0, p_tot);
    r.converged = true;
    json rounds = json::array();
    for (const auto& round : d.rounds) rounds.push_back(to_json(round));
    r.details = {{"h", s.discrete.h},
                 {"plan", to_string(s.discrete.plan)},
                 {"plan_size", d.plan_size},
                 {"lambda_tilde", d.lambda_tilde},
                 {"rounds", rounds},
                 {"audit", to_json(d.audit)}};
    r.finalize();
    return r;
}

// --- trials ------------------------------------------------------------------

// Runs `count` seeded copies on a small worker pool; results come back in seed order.
template <class Fn>
std::vector<RunSummary> run_trials(const Scenario& base, std::size_t count, Fn run_one) {
    std::vector<RunSummary> results(count);
    std::vector<std::string> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < count; k = next++) {
            Scenario s = base;
            s.seed = base.seed + k;
            s.noise.seed = s.seed;
            s.name = base.name + ".trial" + std::to_string(k);
            try {
                results[k] = run_one(s);
            } catch (const std::exception& e) {
                errors[k] = e.what();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(count, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w + 1 < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (std::size_t k = 0; k < count; ++k)
        if (!errors[k].empty()) throw NotConvergedError("trial " + std::to_string(k) + ": " + errors[k]);
    return results;
}

int report_trials(const std::vector<RunSummary>& results, const fs::path& path) {
    json all = json::array();
    bool pass = true;
    for (const auto& r : results) {
        all.push_back(to_json(r));
        pass = pass && r.pass;
    }
    write_json(all, path.string());
    std::cout << all.dump(2) << '\n';
    return pass ? kExitPass : kExitConvergence;
}

// --- subcommands -------------------------------------------------------------

int cmd_simulate(const std::string& file, const Options& o) {
    Scenario s = load_scenario(file);
    apply_overrides(s, o);
    const auto dir = output_dir(o);
    const auto fmt = trace_format_from_string(o.format);
    auto run_one = [&](const Scenario& sc) {
        const Trace trace = simulate(sc);
        write_trace(trace, fmt, (dir / (sc.name + ".trace" + trace_ext(o))).string());
        return simulate_summary(sc, trace);
    };
    if (o.trials > 1) return report_trials(run_trials(s, o.trials, run_one), dir / (s.name + ".trials.json"));
    const auto r = run_one(s);
    emit(r, dir / (s.name + ".summary.json"));
    return exit_for(r);
}

int cmd_constrained(const std::string& file, const Options& o) {
    Scenario s = load_scenario(file);
    apply_overrides(s, o);
    const auto dir = output_dir(o);
    const auto fmt = trace_format_from_string(o.format);
    Algorithm1Options opts;
    opts.rule = rule_from(o);
    auto run_one = [&](const Scenario& sc) {
        const auto a = algorithm1(sc, opts);
        write_trace(a.trace, fmt, (dir / (sc.name + ".trace" + trace_ext(o))).string());
        write_json(rounds_json(a), (dir / (sc.name + ".rounds.json")).string());
        return constrained_summary(sc, a);
    };
    if (o.trials > 1) return report_trials(run_trials(s, o.trials, run_one), dir / (s.name + ".trials.json"));
    const auto r = run_one(s);
    emit(r, dir / (s.name + ".summary.json"));
    return exit_for(r);
}

int cmd_discrete(const std::string& file, const Options& o) {
    Scenario s = load_scenario(file);
    apply_overrides(s, o);
    const auto dir = output_dir(o);
    const auto d = discrete_solve(s, rule_from(o));
    write_trace(d.samples, s.size(), trace_format_from_string(o.format),
                (dir / (s.name + ".iterations" + trace_ext(o))).string());
    const auto r = discrete_summary(s, d);
    emit(r, dir / (s.name + ".summary.json"));
    return exit_for(r);
}

int cmd_oracle(const std::string& file, double demand, const Options& o) {
    const auto c = load_case(file);
    const auto sol = constrained_optimum(c.generators, demand);
    json j = to_json(sol);
    j["demand"] = demand;
    j["case"] = c.name;
    if (!o.out_dir.empty()) write_json(j, (output_dir(o) / (c.name + ".oracle.json")).string());
    std::cout << j.dump(2) << '\n';
    return kExitPass;
}

int cmd_bounds(const std::string& file, const Options& o) {
    Scenario s = load_scenario(file);
    apply_overrides(s, o);
    json j = to_json(settling_bounds(s));
    j["scenario"] = s.name;
    j["gains"] = to_json(s.gains);
    std::cout << j.dump(2) << '\n';
    return kExitPass;
}

int reproduce_switching(const Options& o) {
    Scenario s = scenario_switching_57(o.seed.value_or(57));
    apply_overrides(s, o);
    const auto dir = output_dir(o);
    const auto fmt = trace_format_from_string(o.format);
    Algorithm1Options opts;
    opts.rule = rule_from(o);

    RunSummary total;
    json runs = json::array();
    bool all_pass = true;
    for (std::size_t k = 0; k < s.initial_P.size(); ++k) {
        opts.simulation.initial_P = s.initial_P[k];
        const auto a = algorithm1(s, opts);
        const std::string stem = s.name + ".p" + std::to_string(k);
        write_trace(a.trace, fmt, (dir / (stem + ".trace" + trace_ext(o))).string());
        write_json(rounds_json(a), (dir / (stem + ".rounds.json")).string());
        auto r = constrained_summary(s, a);
        r.scenario = stem;
        runs.push_back(to_json(r));
        all_pass = all_pass && r.pass;
        if (k == 0 || r.max_deviation > total.max_deviation) total = r;
    }
    total.scenario = s.name;
    total.details = {{"runs", runs}};
    total.pass = all_pass && !s.initial_P.empty();
    emit(total, dir / (s.name + ".summary.json"));
    return exit_for(total);
}

int reproduce_timevarying(const Options& o) {
    Scenario s = scenario_timevarying_noise_57(o.seed.value_or(57));
    apply_overrides(s, o);
    const auto dir = output_dir(o);
    Algorithm1Options opts;
    opts.rule = rule_from(o);
    const auto a = algorithm1(s, opts);
    write_trace(a.trace, trace_format_from_string(o.format), (dir / (s.name + ".trace" + trace_ext(o))).string());
    write_json(rounds_json(a), (dir / (s.name + ".rounds.json")).string());
    auto r = constrained_summary(s, a);
    // every load step must be followed by the spread settling back into the band in time
    bool recovered = a.trace.events.size() == case57_demand_events().size();
    for (const auto& ev : event_recovery(a.trace, s.tol))
        recovered = recovered && ev.recovered_time && *ev.recovered_time - ev.time <= *r.bound;
    r.details["all_events_recovered"] = recovered;
    r.pass = r.pass && recovered;
    emit(r, dir / (s.name + ".summary.json"));
    return exit_for(r);
}

int reproduce_comparison(const Options& o) {
    Scenario s = scenario_comparison_30();
    apply_overrides(s, o);
    const auto dir = output_dir(o);
    const auto d = discrete_solve(s, rule_from(o));
    write_trace(d.samples, s.size(), trace_format_from_string(o.format),
                (dir / (s.name + ".iterations" + trace_ext(o))).string());
    const auto r = discrete_summary(s, d);
    emit(r, dir / (s.name + ".summary.json"));
    return exit_for(r);
}

int cmd_reproduce(const std::string& which, const Options& o) {
    if (which == "iv-a") return reproduce_switching(o);
    if (which == "iv-b") return reproduce_timevarying(o);
    if (which == "iv-c") return reproduce_comparison(o);
    throw ValidationError("unknown case study '" + which + "' (expected iv-a, iv-b or iv-c)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fixed-time distributed economic dispatch"};
    app.require_subcommand(1);
    Options o;

    std::uint64_t seed = 0;
    double dt = 0.0, tol = 0.0, h = 0.0;
    std::size_t max_iters = 0;
    std::string plan;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", o.out_dir, "Output directory (default: $FXT_OUT_DIR or .)");
        sub->add_option("--seed", seed, "Seed for noise and random scenario parts");
        sub->add_option("--dt", dt, "Euler step in seconds")->check(CLI::PositiveNumber);
        sub->add_option("--tol", tol, "Convergence tolerance")->check(CLI::PositiveNumber);
        sub->add_option("--format", o.format, "Trace format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--rule", o.rule, "Saturation rule")->check(CLI::IsMember({"dominant_side", "all_violators"}));
    };

    std::string file, which;
    double demand = 0.0;

    auto* sim = app.add_subcommand("simulate", "Run the continuous protocol on a scenario");
    sim->add_option("scenario", file, "Scenario JSON")->required();
    sim->add_option("--trials", o.trials, "Independent seeded runs")->check(CLI::PositiveNumber);
    add_common(sim);

    auto* con = app.add_subcommand("constrained", "Continuous protocol plus saturation rounds");
    con->add_option("scenario", file, "Scenario JSON")->required();
    con->add_option("--trials", o.trials, "Independent seeded runs")->check(CLI::PositiveNumber);
    add_common(con);

    auto* dis = app.add_subcommand("discrete", "Discrete-time iteration");
    dis->set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
    dis->add_option("scenario", file, "Scenario JSON")->required();
    dis->add_option("--h", h, "Step size h")->check(CLI::PositiveNumber);
    dis->add_option("--max-iters", max_iters, "Iteration cap")->check(CLI::PositiveNumber);
    dis->add_option("--plan", plan, "Step-gain spectrum")->check(CLI::IsMember({"weighted", "laplacian"}));
    add_common(dis);

    auto* ora = app.add_subcommand("oracle", "Centralised optimum for a case");
    ora->add_option("case", file, "Case JSON")->required();
    ora->add_option("--demand", demand, "Total demand in MW")->required();
    ora->add_option("--out", o.out_dir, "Also write <case>.oracle.json here");

    auto* bnd = app.add_subcommand("bounds", "Settling-time bounds and minimum gain");
    bnd->add_option("scenario", file, "Scenario JSON")->required();
    add_common(bnd);

    auto* rep = app.add_subcommand("reproduce", "Run a canned case study");
    rep->add_option("study", which, "iv-a, iv-b or iv-c")->required()->check(CLI::IsMember({"iv-a", "iv-b", "iv-c"}));
    add_common(rep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
    CLI::App* active = app.get_subcommands().front();
    if (active != ora) {
        if (given(active, "--seed")) o.seed = seed;
        if (given(active, "--dt")) o.dt = dt;
        if (given(active, "--tol")) o.tol = tol;
    }
    if (active == dis) {
        if (given(dis, "--h")) o.h = h;
        if (given(dis, "--max-iters")) o.max_iters = max_iters;
        if (given(dis, "--plan")) o.plan = plan;
    }

    try {
        if (active == sim) return cmd_simulate(file, o);
        if (active == con) return cmd_constrained(file, o);
        if (active == dis) return cmd_discrete(file, o);
        if (active == ora) return cmd_oracle(file, demand, o);
        if (active == bnd) return cmd_bounds(file, o);
        if (active == rep) return cmd_reproduce(which, o);
    } catch (const NotConvergedError& e) {
        std::cerr << "fxted: " << e.what() << '\n';
        return kExitConvergence;
    } catch (const MaxIterationsError& e) {
        std::cerr << "fxted: " << e.what() << '\n';
        return kExitConvergence;
    } catch (const AllSaturatedError& e) {
        std::cerr << "fxted: " << e.what() << '\n';
        return kExitConvergence;
    } catch (const std::exception& e) {
        std::cerr << "fxted: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}
