#pragma once

#include "fxted/error.hpp"

#include "json.hpp"

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>

namespace fxted {

using json = nlohmann::json;

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline json parse_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + line_col(text, e.byte) + ": " + e.what());
    }
}

inline json read_json_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw MissingDataError(path + ": no such file");
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

inline const json& field(const json& j, std::string_view key, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(where + ": missing field '" + std::string(key) + "'");
    return *it;
}

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ParseError(where + ": expected a number");
    return j.get<double>();
}

inline double number_field(const json& j, std::string_view key, const std::string& where) {
    return number(field(j, key, where), where + "." + std::string(key));
}

/// JSON has no infinity; `null` stands for an unbounded limit.
inline double limit_field(const json& j, std::string_view key, const std::string& where, double if_null) {
    const json& v = field(j, key, where);
    if (v.is_null()) return if_null;
    return number(v, where + "." + std::string(key));
}

inline json limit_value(double v) {
    if (std::isinf(v)) return nullptr;
    return v;
}

} // namespace detail
} // namespace fxted
