#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbvar/csv.hpp"
#include "cbvar/error.hpp"
#include "cbvar/hash.hpp"

namespace cbvar {

/// Calendar month.
struct YearMonth {
    int year = 1970;
    int month = 1;  // 1..12

    constexpr int ordinal() const noexcept { return year * 12 + (month - 1); }
    static constexpr YearMonth from_ordinal(int ord) noexcept {
        const int y = ord >= 0 ? ord / 12 : (ord - 11) / 12;
        return {y, ord - y * 12 + 1};
    }
    constexpr YearMonth plus(int months) const noexcept { return from_ordinal(ordinal() + months); }

    friend constexpr bool operator==(YearMonth a, YearMonth b) noexcept {
        return a.ordinal() == b.ordinal();
    }
    friend constexpr auto operator<=>(YearMonth a, YearMonth b) noexcept {
        return a.ordinal() <=> b.ordinal();
    }

    std::string str() const {
        std::ostringstream os;
        os << year << '-' << (month < 10 ? "0" : "") << month;
        return os.str();
    }

    /// Accepts YYYY-MM, YYYY-MM-DD, YYYYMmm and M/D/YYYY (FRED-MD's sasdate).
    static std::optional<YearMonth> parse(std::string_view s) {
        s = csv::trim(s);
        int y = 0, m = 0, d = 0;
        std::string tmp(s);
        char c1 = 0, c2 = 0;
        if (std::sscanf(tmp.c_str(), "%d/%d/%d", &m, &d, &y) == 3) {
        } else if (std::sscanf(tmp.c_str(), "%d%c%d%c%d", &y, &c1, &m, &c2, &d) >= 3 &&
                   (c1 == '-' || c1 == 'M' || c1 == ':')) {
        } else {
            return std::nullopt;
        }
        if (m < 1 || m > 12 || y < 1000 || y > 9999) return std::nullopt;
        return YearMonth{y, m};
    }

    static YearMonth parse_or_throw(std::string_view s) {
        auto ym = parse(s);
        if (!ym) throw ConfigError("invalid year-month: '" + std::string(s) + "'");
        return *ym;
    }
};

enum class Transform { level, log, log100, dlog_ann, signedlog };

inline std::string to_string(Transform t) {
    switch (t) {
        case Transform::level: return "level";
        case Transform::log: return "log";
        case Transform::log100: return "log100";
        case Transform::dlog_ann: return "dlog_ann";
        case Transform::signedlog: return "signedlog";
    }
    return "level";
}

inline Transform parse_transform(std::string_view s) {
    s = csv::trim(s);
    if (s == "level") return Transform::level;
    if (s == "log") return Transform::log;
    if (s == "log100") return Transform::log100;
    if (s == "dlog_ann") return Transform::dlog_ann;
    if (s == "signedlog") return Transform::signedlog;
    throw ConfigError("unknown transform '" + std::string(s) + "'");
}

/// Aligned monthly panel: T x M values with names, transforms and provenance.
struct Dataset {
    std::vector<YearMonth> dates;
    Eigen::MatrixXd values;
    std::vector<std::string> names;
    std::vector<Transform> transforms;
    std::string source;
    std::string source_hash;
    std::vector<std::string> flags;  // notes such as signed-log fallbacks

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }

    std::optional<Eigen::Index> row_of(YearMonth ym) const {
        if (dates.empty()) return std::nullopt;
        const int off = ym.ordinal() - dates.front().ordinal();
        if (off < 0 || off >= static_cast<int>(dates.size())) return std::nullopt;
        return off;
    }

    std::optional<Eigen::Index> column_of(std::string_view name) const {
        for (std::size_t j = 0; j < names.size(); ++j)
            if (names[j] == name) return static_cast<Eigen::Index>(j);
        return std::nullopt;
    }

    /// Rows [begin, end).
    Dataset slice(Eigen::Index begin, Eigen::Index end) const {
        Dataset out = *this;
        out.dates.assign(dates.begin() + begin, dates.begin() + end);
        out.values = values.middleRows(begin, end - begin);
        return out;
    }

    /// Builds a dataset from a bare matrix with consecutive months starting at `start`.
    static Dataset from_matrix(const Eigen::MatrixXd& values, std::vector<std::string> names = {},
                               YearMonth start = {2000, 1}) {
        Dataset d;
        d.values = values;
        for (Eigen::Index t = 0; t < values.rows(); ++t)
            d.dates.push_back(start.plus(static_cast<int>(t)));
        if (names.empty())
            for (Eigen::Index j = 0; j < values.cols(); ++j) names.push_back("y" + std::to_string(j + 1));
        d.names = std::move(names);
        d.transforms.assign(d.names.size(), Transform::level);
        d.source = "in-memory";
        return d;
    }
};

/// Ordered variable set of one of the model sizes.
struct ModelSizeSpec {
    std::string name;
    std::vector<std::string> variables;

    static ModelSizeSpec small() { return {"small", {"UNRATE", "CPIAUCSL", "FEDFUNDS"}}; }
    static ModelSizeSpec medium() {
        auto s = small();
        s.name = "medium";
        for (const char* v : {"NONBORRES", "M2REAL", "TOTRESNS"}) s.variables.emplace_back(v);
        return s;
    }
    static ModelSizeSpec large() {
        auto s = medium();
        s.name = "large";
        for (const char* v : {"INDPRO", "RPI", "S.P.500", "CUMFNS", "T10YFFM", "AWHMAN", "M1SL",
                              "EXUSUKx", "HOUST"})
            s.variables.emplace_back(v);
        return s;
    }

    /// "small" | "medium" | "large" | "custom:<file>" (comma or newline separated names).
    static ModelSizeSpec parse(const std::string& arg) {
        if (arg == "small") return small();
        if (arg == "medium") return medium();
        if (arg == "large") return large();
        if (arg.rfind("custom:", 0) == 0) {
            ModelSizeSpec s{"custom", {}};
            std::string text;
            try {
                text = read_file(arg.substr(7));
            } catch (const DataError& e) {
                throw ConfigError(e.what());
            }
            for (char& c : text)
                if (c == '\n' || c == '\r') c = ',';
            for (auto& v : csv::split(text))
                if (!v.empty() && v[0] != '#') s.variables.push_back(v);
            if (s.variables.empty()) throw ConfigError("custom model size file lists no variables");
            return s;
        }
        throw ConfigError("unknown model size '" + arg + "'");
    }
};

/// Default transformation per FRED mnemonic; unknown series stay in levels.
inline Transform default_transform(std::string_view name) {
    static const std::map<std::string, Transform, std::less<>> table = {
        {"UNRATE", Transform::level},     {"CPIAUCSL", Transform::dlog_ann},
        {"FEDFUNDS", Transform::level},   {"NONBORRES", Transform::log},
        {"M2REAL", Transform::log},       {"TOTRESNS", Transform::log},
        {"INDPRO", Transform::log},       {"RPI", Transform::log},
        {"S.P.500", Transform::log},      {"CUMFNS", Transform::level},
        {"T10YFFM", Transform::level},    {"AWHMAN", Transform::level},
        {"M1SL", Transform::log},         {"EXUSUKx", Transform::log},
        {"HOUST", Transform::log},
    };
    auto it = table.find(name);
    return it == table.end() ? Transform::level : it->second;
}

/// Reads `name = transform` lines ('#' and ';' start comments, [sections] ignored).
inline std::map<std::string, Transform> parse_transform_config(const std::string& text) {
    std::map<std::string, Transform> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto cut = line.find_first_of("#;");
        std::string_view body = csv::trim(std::string_view(line).substr(0, cut));
        if (body.empty() || body.front() == '[') continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("transform config line " + std::to_string(lineno) + ": expected name = transform");
        out[std::string(csv::trim(body.substr(0, eq)))] = parse_transform(body.substr(eq + 1));
    }
    return out;
}

namespace detail {

/// Untransformed CSV contents, full date range.
inline Dataset read_raw_csv(const std::string& path) {
    const std::string text = read_file(path);
    Dataset d;
    d.source = path;
    d.source_hash = sha256_hex(text);
    std::istringstream in(text);
    std::string line;
    bool have_header = false;
    std::vector<std::vector<double>> rows;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view body = csv::trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto cells = csv::split(line);
        if (!have_header) {
            if (cells.size() < 2) throw DataError(path + ": header needs a date column and at least one series");
            d.names.assign(cells.begin() + 1, cells.end());
            have_header = true;
            continue;
        }
        if (cells[0].rfind("Transform", 0) == 0) continue;  // FRED-MD tcode row
        auto ym = YearMonth::parse(cells[0]);
        if (!ym) throw DataError(path + ":" + std::to_string(lineno) + ": unparseable date '" + cells[0] + "'");
        if (cells.size() != d.names.size() + 1)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(d.names.size() + 1) + " cells");
        if (!d.dates.empty() && ym->ordinal() != d.dates.back().ordinal() + 1)
            throw DataError(path + ":" + std::to_string(lineno) + ": dates must be monthly-contiguous (" +
                            d.dates.back().str() + " followed by " + ym->str() + ")");
        d.dates.push_back(*ym);
        std::vector<double> row;
        for (std::size_t j = 1; j < cells.size(); ++j) {
            bool ok = true;
            row.push_back(csv::parse_number(cells[j], &ok));
            if (!ok)
                throw DataError(path + ":" + std::to_string(lineno) + ": non-numeric value '" + cells[j] + "'");
        }
        rows.push_back(std::move(row));
    }
    if (!have_header) throw DataError(path + ": empty file");
    d.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d.names.size()));
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t j = 0; j < rows[t].size(); ++j)
            d.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rows[t][j];
    d.transforms.assign(d.names.size(), Transform::level);
    return d;
}

inline double signed_log(double x) { return std::copysign(std::log1p(std::abs(x)), x); }

}  // namespace detail

/// Applies `t` to a raw series. NaN propagates; dlog_ann leaves row 0 NaN.
inline Eigen::VectorXd apply_transform(const Eigen::VectorXd& x, Transform t) {
    const Eigen::Index n = x.size();
    Eigen::VectorXd out(n);
    switch (t) {
        case Transform::level: return x;
        case Transform::log:
            for (Eigen::Index i = 0; i < n; ++i) out(i) = std::log(x(i));
            return out;
        case Transform::log100:
            for (Eigen::Index i = 0; i < n; ++i) out(i) = 100.0 * std::log(x(i));
            return out;
        case Transform::signedlog:
            for (Eigen::Index i = 0; i < n; ++i) out(i) = detail::signed_log(x(i));
            return out;
        case Transform::dlog_ann:
            if (n > 0) out(0) = std::numeric_limits<double>::quiet_NaN();
            for (Eigen::Index i = 1; i < n; ++i) out(i) = 1200.0 * (std::log(x(i)) - std::log(x(i - 1)));
            return out;
    }
    return out;
}

struct LoadOptions {
    std::optional<YearMonth> start;
    std::optional<YearMonth> end;
    std::map<std::string, Transform> overrides;
    /// Extra series placed in position 0, in levels (e.g. an uncertainty index).
    std::optional<std::string> prepend;
};

/// Loads a CSV panel, selects the model size's variables in order, applies
/// transforms and windows to [start, end].
inline Dataset load_csv(const std::string& path, const ModelSizeSpec& spec, const LoadOptions& opt = {}) {
    Dataset raw = detail::read_raw_csv(path);
    if (raw.dates.empty()) throw DataError(path + ": no data rows");

    std::vector<std::string> wanted;
    if (opt.prepend) wanted.push_back(*opt.prepend);
    wanted.insert(wanted.end(), spec.variables.begin(), spec.variables.end());

    Dataset d;
    d.source = raw.source;
    d.source_hash = raw.source_hash;
    d.dates = raw.dates;
    d.values.resize(raw.rows(), static_cast<Eigen::Index>(wanted.size()));
    for (std::size_t j = 0; j < wanted.size(); ++j) {
        const auto& name = wanted[j];
        auto col = raw.column_of(name);
        if (!col) throw DataError(path + ": missing column '" + name + "'");
        Transform t = (opt.prepend && j == 0) ? Transform::level : default_transform(name);
        if (auto it = opt.overrides.find(name); it != opt.overrides.end()) t = it->second;
        Eigen::VectorXd x = raw.values.col(*col);
        if (t == Transform::log && name == "NONBORRES" && (x.array() <= 0.0).any()) {
            t = Transform::signedlog;
            d.flags.push_back("NONBORRES has non-positive values; signed-log sign(x)*log(1+|x|) applied");
        } else if (t == Transform::log || t == Transform::log100 || t == Transform::dlog_ann) {
            for (Eigen::Index i = 0; i < x.size(); ++i)
                if (!std::isnan(x(i)) && x(i) <= 0.0)
                    throw DataError(name + " has non-positive value at " + raw.dates[i].str() +
                                    "; cannot apply " + to_string(t));
        }
        d.values.col(static_cast<Eigen::Index>(j)) = apply_transform(x, t);
        d.names.push_back(name);
        d.transforms.push_back(t);
    }

    // Without an explicit start the window begins at the first complete row,
    // which skips the month lost to differencing.
    YearMonth first = d.dates.front();
    if (opt.start) {
        first = *opt.start;
    } else {
        for (Eigen::Index t = 0; t < d.rows(); ++t)
            if (d.values.row(t).allFinite()) {
                first = d.dates[static_cast<std::size_t>(t)];
                break;
            }
    }
    const YearMonth last = opt.end.value_or(d.dates.back());
    if (last < first) throw ConfigError("window end " + last.str() + " precedes start " + first.str());
    auto b = d.row_of(first);
    auto e = d.row_of(last);
    if (!b || !e)
        throw DataError("window " + first.str() + ":" + last.str() + " outside data range " +
                        d.dates.front().str() + ":" + d.dates.back().str());
    Dataset w = d.slice(*b, *e + 1);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index t = 0; t < w.rows(); ++t)
            if (!std::isfinite(w.values(t, j)))
                throw DataError("missing value for " + w.names[static_cast<std::size_t>(j)] + " at " +
                                w.dates[static_cast<std::size_t>(t)].str());
    return w;
}

/// Writes the normalized dataset: header "date,<names>", one row per month,
/// 17 significant digits.
inline void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "date";
    for (const auto& n : d.names) out << ',' << n;
    out << '\n';
    for (Eigen::Index t = 0; t < d.rows(); ++t) {
        out << d.dates[static_cast<std::size_t>(t)].str();
        for (Eigen::Index j = 0; j < d.cols(); ++j) out << ',' << csv::num(d.values(t, j));
        out << '\n';
    }
}

/// Reads a normalized dataset back without applying transforms.
inline Dataset read_csv(const std::string& path) {
    Dataset d = detail::read_raw_csv(path);
    for (Eigen::Index j = 0; j < d.cols(); ++j)
        for (Eigen::Index t = 0; t < d.rows(); ++t)
            if (!std::isfinite(d.values(t, j)))
                throw DataError("missing value for " + d.names[static_cast<std::size_t>(j)] + " at " +
                                d.dates[static_cast<std::size_t>(t)].str());
    return d;
}

/// One recursive forecast origin: the expanding estimation sample and the
/// realized values that follow it.
struct ForecastSplit {
    YearMonth origin;           // last month of the estimation sample
    Dataset train;
    Eigen::MatrixXd realized;   // rows h = 1..available, all variables
    int available = 0;          // number of realized steps ahead
};

/// Expanding-window splits. Origins run from `first_estimation_end` up to
/// the month before `evaluation_end`; realized values are kept up to
/// `max_horizon` steps ahead but never past `evaluation_end`.
inline std::vector<ForecastSplit> recursive_windows(const Dataset& data, YearMonth first_estimation_end,
                                                    YearMonth evaluation_end, int max_horizon = 12) {
    if (data.dates.empty()) throw DataError("empty dataset");
    auto first = data.row_of(first_estimation_end);
    auto last = data.row_of(evaluation_end);
    if (!first || !last)
        throw DataError("recursive window " + first_estimation_end.str() + ":" + evaluation_end.str() +
                        " exceeds data range " + data.dates.front().str() + ":" + data.dates.back().str());
    if (*last <= *first)
        throw ConfigError("evaluation end " + evaluation_end.str() + " must follow first estimation end " +
                          first_estimation_end.str());
    std::vector<ForecastSplit> out;
    out.reserve(static_cast<std::size_t>(*last - *first));
    for (Eigen::Index o = *first; o < *last; ++o) {
        ForecastSplit s;
        s.origin = data.dates[static_cast<std::size_t>(o)];
        s.train = data.slice(0, o + 1);
        s.available = static_cast<int>(std::min<Eigen::Index>(max_horizon, *last - o));
        s.realized = data.values.middleRows(o + 1, s.available);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace cbvar
