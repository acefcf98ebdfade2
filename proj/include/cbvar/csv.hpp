#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <locale>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace cbvar::csv {

/// Full-precision (17 significant digits) rendering; infinities print as
/// "inf" so they survive a round trip through parse_number.
inline std::string num(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(17) << x;
    return os.str();
}

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n\"");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n\"");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.emplace_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Parses a numeric cell. Empty cells and NA markers become NaN; anything
/// else unparseable also yields NaN with `ok` set to false.
inline double parse_number(std::string_view cell, bool* ok = nullptr) {
    if (ok) *ok = true;
    if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == ".")
        return std::numeric_limits<double>::quiet_NaN();
    if (cell == "inf" || cell == "Inf") return std::numeric_limits<double>::infinity();
    std::string tmp(cell);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size()) {
        if (ok) *ok = false;
        return std::numeric_limits<double>::quiet_NaN();
    }
    return v;
}

}  // namespace cbvar::csv
