#pragma once

#include "samlab/diagnostics.hpp"
#include "samlab/error.hpp"

#include <charconv>
#include <optional>
#include <string>
#include <vector>

namespace samlab::csv {

inline std::string cell(const std::optional<double>& v) { return v ? format_real(*v) : std::string{}; }

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

[[noreturn]] inline void fail(const std::string& source, std::size_t line, const std::string& what) {
    throw ParseError(source + ":" + std::to_string(line) + ": " + what);
}

inline double parse_double(const std::string& s, const std::string& source, std::size_t line) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        fail(source, line, "not a number: '" + s + "'");
    return v;
}

template <typename Int>
Int parse_int(const std::string& s, const std::string& source, std::size_t line) {
    Int v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        fail(source, line, "not an integer: '" + s + "'");
    return v;
}

inline std::optional<double> parse_opt(const std::string& s, const std::string& source, std::size_t line) {
    if (s.empty()) return std::nullopt;
    return parse_double(s, source, line);
}

} // namespace samlab::csv
