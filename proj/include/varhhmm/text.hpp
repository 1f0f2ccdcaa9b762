#ifndef VARHHMM_TEXT_HPP
#define VARHHMM_TEXT_HPP

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "varhhmm/errors.hpp"

namespace varhhmm {

/// Shortest representation that round-trips a double exactly.
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string_view trim_ws(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(const std::string& line) {
    std::vector<std::string_view> out;
    std::string_view rest(line);
    while (true) {
        auto pos = rest.find(',');
        if (pos == std::string_view::npos) {
            out.push_back(trim_ws(rest));
            break;
        }
        out.push_back(trim_ws(rest.substr(0, pos)));
        rest.remove_prefix(pos + 1);
    }
    return out;
}

inline double parse_double_field(std::string_view tok, const std::string& path, size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(path, line, "expected a number, got '" + std::string(tok) + "'");
    if (!std::isfinite(v))
        throw ParseError(path, line, "non-finite value '" + std::string(tok) + "'");
    return v;
}

inline long long parse_ll_field(std::string_view tok, const std::string& path, size_t line) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(path, line, "expected an integer, got '" + std::string(tok) + "'");
    return v;
}

}  // namespace varhhmm

#endif
