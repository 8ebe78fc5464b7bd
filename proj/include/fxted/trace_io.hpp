#pragma once

#include "fxted/constrained.hpp"
#include "fxted/discrete.hpp"
#include "fxted/dynamics.hpp"
#include "fxted/error.hpp"
#include "fxted/json_util.hpp"
#include "fxted/oracle.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fxted {

enum class TraceFormat { csv, json };

inline TraceFormat trace_format_from_string(const std::string& s) {
    if (s == "csv") return TraceFormat::csv;
    if (s == "json") return TraceFormat::json;
    throw ValidationError("unknown trace format '" + s + "' (expected csv or json)");
}

/// 12 significant digits, the precision every trace and summary is written with.
inline std::string fmt12(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline double round12(double v) { return std::stod(fmt12(v)); }

namespace detail {

inline std::vector<std::string> indexed(const std::string& stem, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(stem + "_" + std::to_string(i));
    return out;
}

inline json rounded(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(round12(x));
    return a;
}

inline void write_csv_row(std::ostream& out, const std::vector<double>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << fmt12(row[c]);
    out << '\n';
}

inline void write_header(std::ostream& out, const std::vector<std::string>& cols) {
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
    out << '\n';
}

inline std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(path + ": cannot open for writing");
    return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw Error(path + ": write failed");
}

} // namespace detail

inline std::vector<std::string> trace_columns(std::size_t n) {
    std::vector<std::string> cols{"t"};
    for (auto& c : detail::indexed("lambda", n)) cols.push_back(c);
    for (auto& c : detail::indexed("P", n)) cols.push_back(c);
    cols.insert(cols.end(), {"consensus_err", "balance_residual", "V"});
    return cols;
}

inline std::vector<std::string> iteration_columns(std::size_t n) {
    std::vector<std::string> cols{"k"};
    for (auto& c : detail::indexed("lambda", n)) cols.push_back(c);
    for (auto& c : detail::indexed("P", n)) cols.push_back(c);
    cols.insert(cols.end(), {"max_abs_z", "consensus_err"});
    return cols;
}

inline json to_json(const TraceSample& s) {
    return {{"t", round12(s.t)},
            {"lambda", detail::rounded(s.lambda)},
            {"P", detail::rounded(s.P)},
            {"consensus_err", round12(s.consensus_err)},
            {"balance_residual", round12(s.balance_residual)},
            {"V", round12(s.V)}};
}

inline json to_json(const DiscreteSample& s) {
    return {{"k", s.k},
            {"lambda", detail::rounded(s.lambda)},
            {"P", detail::rounded(s.P)},
            {"max_abs_z", round12(s.max_abs_z)},
            {"consensus_err", round12(s.consensus_err)}};
}

inline void write_trace(const Trace& trace, TraceFormat format, const std::string& path) {
    auto out = detail::open_for_write(path);
    if (format == TraceFormat::csv) {
        detail::write_header(out, trace_columns(trace.generators));
        for (const auto& s : trace.samples) {
            std::vector<double> row{s.t};
            row.insert(row.end(), s.lambda.begin(), s.lambda.end());
            row.insert(row.end(), s.P.begin(), s.P.end());
            row.insert(row.end(), {s.consensus_err, s.balance_residual, s.V});
            detail::write_csv_row(out, row);
        }
    } else {
        json j = json::array();
        for (const auto& s : trace.samples) j.push_back(to_json(s));
        out << j.dump(1) << '\n';
    }
    detail::finish(out, path);
}

inline void write_trace(const std::vector<DiscreteSample>& samples, std::size_t generators, TraceFormat format,
                        const std::string& path) {
    auto out = detail::open_for_write(path);
    if (format == TraceFormat::csv) {
        detail::write_header(out, iteration_columns(generators));
        for (const auto& s : samples) {
            std::vector<double> row{static_cast<double>(s.k)};
            row.insert(row.end(), s.lambda.begin(), s.lambda.end());
            row.insert(row.end(), s.P.begin(), s.P.end());
            row.insert(row.end(), {s.max_abs_z, s.consensus_err});
            detail::write_csv_row(out, row);
        }
    } else {
        json j = json::array();
        for (const auto& s : samples) j.push_back(to_json(s));
        out << j.dump(1) << '\n';
    }
    detail::finish(out, path);
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return c;
        throw ValidationError("no column '" + name + "'");
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingDataError(path + ": cannot open file");
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) return t;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.header.push_back(cell);
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (row.size() != t.header.size())
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                             " fields, got " + std::to_string(row.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline json to_json(const SettlingBounds& b) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    return {{"T1", num(b.T1)},         {"T2", num(b.T2)}, {"total", num(b.total())},
            {"p_min_gain", num(b.p_min_gain)}, {"c1", num(b.c1)}, {"c2", num(b.c2)},
            {"Delta", num(b.Delta)},    {"lambda2", num(b.lambda2)}};
}

inline json to_json(const PinnedGenerator& p) { return {{"index", p.index}, {"power", p.power}}; }

inline json to_json(const SaturationRound& r) {
    json omega = json::array(), theta = json::array();
    for (const auto& p : r.omega) omega.push_back(to_json(p));
    for (const auto& p : r.theta) theta.push_back(to_json(p));
    return {{"entered", omega}, {"saturated", theta}, {"y_c", r.y_c}, {"z_c", r.z_c}, {"lambda", r.lambda}, {"P", r.P}};
}

inline json to_json(const KktAudit& a) {
    return {{"balance", a.kkt.balance},
            {"stationarity", a.kkt.stationarity},
            {"complementarity", a.kkt.complementarity},
            {"bounds", a.kkt.bounds},
            {"oracle_deviation", a.oracle_deviation},
            {"passed", a.passed}};
}

/// Outcome of one CLI run, written as <name>.summary.json.
struct RunSummary {
    std::string scenario;
    std::string mode;
    std::uint64_t seed = 0;
    std::optional<double> first_convergence_time;
    std::optional<std::size_t> iterations;
    std::optional<double> bound;  // T1 + T2
    double oracle_lambda = 0.0;
    std::vector<double> oracle_P;
    double lambda = 0.0;
    std::vector<double> P;
    double max_deviation = 0.0;
    double tolerance = 0.0;
    bool converged = false;
    bool within_bound = false;
    bool matches_oracle = false;
    bool pass = false;
    json details = json::object();

    /// pass iff the deviation is within tolerance and, for continuous runs, convergence
    /// happened no later than the bound.
    void finalize() {
        matches_oracle = max_deviation <= tolerance;
        within_bound = !bound || (first_convergence_time && *first_convergence_time <= *bound);
        pass = converged && matches_oracle && within_bound;
    }
};

inline json to_json(const RunSummary& s) {
    auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
    return {{"scenario", s.scenario},
            {"mode", s.mode},
            {"seed", s.seed},
            {"first_convergence_time", opt(s.first_convergence_time)},
            {"iterations", opt(s.iterations)},
            {"bound", opt(s.bound)},
            {"oracle", {{"lambda", s.oracle_lambda}, {"P", s.oracle_P}}},
            {"achieved", {{"lambda", s.lambda}, {"P", s.P}}},
            {"max_deviation", s.max_deviation},
            {"tolerance", s.tolerance},
            {"flags",
             {{"converged", s.converged},
              {"within_bound", s.within_bound},
              {"matches_oracle", s.matches_oracle},
              {"pass", s.pass}}},
            {"details", s.details}};
}

inline void write_json(const json& j, const std::string& path) {
    auto out = detail::open_for_write(path);
    out << j.dump(2) << '\n';
    detail::finish(out, path);
}

} // namespace fxted
