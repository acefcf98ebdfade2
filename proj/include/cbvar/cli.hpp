#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbvar/core.hpp"
#include "cbvar/csv.hpp"
#include "cbvar/dataset.hpp"
#include "cbvar/error.hpp"
#include "cbvar/hash.hpp"
#include "cbvar/montecarlo.hpp"
#include "cbvar/parallel.hpp"
#include "cbvar/priors.hpp"
#include "cbvar/rng.hpp"
#include "cbvar/selection.hpp"
#include "cbvar/simstudy.hpp"

#ifndef CBVAR_VERSION
#define CBVAR_VERSION "0.0.0"
#endif

namespace cbvar::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = CBVAR_VERSION;

/// Everything that determines a run's outputs. `threads` and `out` are
/// deliberately left out of the manifest: results do not depend on them.
struct RunConfig {
    std::string command;
    std::string data;
    std::string size = "small";
    int lags = 0;  // 0 = command default (13 for data commands, 12 for simstudy)
    std::string alpha = "inf";
    std::string lambda = "auto";
    std::vector<int> horizons{1, 3, 12};
    std::size_t draws = 2000;
    std::uint64_t seed = 1;
    std::string window;
    std::string first_origin = "2001-06";
    std::string cut;
    std::string benchmark;
    std::string transforms;
    std::string prepend;
    std::vector<std::string> focus;
    std::string shock = "0";
    int irf_horizon = 24;
    int replications = 50;
    int sim_length = 480;
    double tau = 0.01;

    std::string out = "out";
    unsigned threads = 1;

    int effective_lags() const { return lags > 0 ? lags : (command == "simstudy" ? 12 : 13); }
};

inline json to_json(const RunConfig& c) {
    return json{{"command", c.command},   {"data", c.data},
                {"size", c.size},         {"lags", c.effective_lags()},
                {"alpha", c.alpha},       {"lambda", c.lambda},
                {"horizons", c.horizons}, {"draws", c.draws},
                {"seed", c.seed},         {"window", c.window},
                {"first_origin", c.first_origin},
                {"cut", c.cut},           {"benchmark", c.benchmark},
                {"transforms", c.transforms},
                {"prepend", c.prepend},   {"focus", c.focus},
                {"shock", c.shock},       {"irf_horizon", c.irf_horizon},
                {"replications", c.replications},
                {"sim_length", c.sim_length},
                {"tau", c.tau}};
}

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    try {
        c.command = j.at("command").get<std::string>();
        c.data = j.value("data", c.data);
        c.size = j.value("size", c.size);
        c.lags = j.value("lags", c.lags);
        c.alpha = j.value("alpha", c.alpha);
        c.lambda = j.value("lambda", c.lambda);
        c.horizons = j.value("horizons", c.horizons);
        c.draws = j.value("draws", c.draws);
        c.seed = j.value("seed", c.seed);
        c.window = j.value("window", c.window);
        c.first_origin = j.value("first_origin", c.first_origin);
        c.cut = j.value("cut", c.cut);
        c.benchmark = j.value("benchmark", c.benchmark);
        c.transforms = j.value("transforms", c.transforms);
        c.prepend = j.value("prepend", c.prepend);
        c.focus = j.value("focus", c.focus);
        c.shock = j.value("shock", c.shock);
        c.irf_horizon = j.value("irf_horizon", c.irf_horizon);
        c.replications = j.value("replications", c.replications);
        c.sim_length = j.value("sim_length", c.sim_length);
        c.tau = j.value("tau", c.tau);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed run configuration: ") + e.what());
    }
    return c;
}

/// What a command produced, for the caller to report.
struct RunSummary {
    std::vector<std::string> files;  // relative to the output directory
    std::vector<std::string> messages;
};

namespace detail {

inline std::string read_text(const fs::path& p) { return read_file(p.string()); }

inline void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    out << text;
}

inline json matrix_json(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::optional<YearMonth> parse_month(const std::string& s, const char* what) {
    if (csv::trim(s).empty()) return std::nullopt;
    auto ym = YearMonth::parse(csv::trim(s));
    if (!ym) throw ConfigError(std::string(what) + ": cannot parse date '" + s + "' (expected YYYY-MM)");
    return ym;
}

/// "START:END" with either side optional.
inline std::pair<std::optional<YearMonth>, std::optional<YearMonth>> parse_window(const std::string& w) {
    if (csv::trim(w).empty()) return {};
    const auto colon = w.find(':');
    if (colon == std::string::npos) throw ConfigError("--window must look like START:END, got '" + w + "'");
    return {parse_month(w.substr(0, colon), "--window"), parse_month(w.substr(colon + 1), "--window")};
}

inline Dataset load_data(const RunConfig& cfg) {
    if (cfg.data.empty()) throw ConfigError("--data is required for '" + cfg.command + "'");
    LoadOptions opt;
    std::tie(opt.start, opt.end) = parse_window(cfg.window);
    if (!cfg.transforms.empty()) {
        std::string text;
        try {
            text = read_file(cfg.transforms);
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
        opt.overrides = parse_transform_config(text);
    }
    if (!cfg.prepend.empty()) opt.prepend = cfg.prepend;
    return load_csv(cfg.data, ModelSizeSpec::parse(cfg.size), opt);
}

inline std::vector<double> lambda_grid(const RunConfig& cfg) {
    if (cfg.lambda == "auto") return default_lambda_grid();
    bool ok = true;
    const double l = csv::parse_number(cfg.lambda, &ok);
    if (!ok || !(l > 0.0) || !std::isfinite(l))
        throw ConfigError("--lambda must be 'auto' or a positive number, got '" + cfg.lambda + "'");
    return {l};
}

/// One model fit with the requested alpha, which may be "bic".
struct ModelFit {
    std::string requested;
    AlphaFit fit;
    std::optional<AlphaGrid> curve;
};

inline ModelFit fit_model(const VarDesign& design, const PriorBuilder& builder, const std::string& alpha,
                          const std::vector<double>& lgrid, double tau) {
    ModelFit m;
    m.requested = std::string(csv::trim(alpha));
    if (m.requested == "bic") {
        m.curve = evaluate_alpha_grid(design, builder, lgrid, default_alpha_grid(), tau);
        m.fit = fit_alpha(design, builder, lgrid, select_alpha_knee(*m.curve), tau);
    } else {
        m.fit = fit_alpha(design, builder, lgrid, parse_alpha(m.requested), tau);
    }
    return m;
}

/// Best-effort curve over the default grid; failures are skipped.
inline AlphaGrid diagnostic_curve(const VarDesign& design, const PriorBuilder& builder,
                                  const std::vector<double>& lgrid, double tau) {
    AlphaGrid g;
    g.values = default_alpha_grid();
    for (double a : g.values) {
        try {
            const auto f = fit_alpha(design, builder, lgrid, a, tau);
            g.points.push_back(f.fit);
            g.lambdas.push_back(f.lambda.lambda_star);
        } catch (const NumericError& e) {
            g.failures.push_back(alpha_label(a) + ": " + e.what());
        }
    }
    return g;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto& v : csv::split(s))
        if (!v.empty()) out.push_back(v);
    return out;
}

inline Eigen::Index resolve_variable(const Dataset& d, const std::string& ref) {
    if (auto c = d.column_of(ref)) return *c;
    bool ok = true;
    const double x = csv::parse_number(ref, &ok);
    if (ok && x >= 0 && x < static_cast<double>(d.cols()) && x == std::floor(x)) return static_cast<Eigen::Index>(x);
    throw ConfigError("unknown variable '" + ref + "'");
}

/// UNRATE, CPIAUCSL and FEDFUNDS when all present, otherwise the first three.
inline std::vector<Eigen::Index> focus_variables(const Dataset& d, const std::vector<std::string>& requested) {
    std::vector<Eigen::Index> out;
    if (!requested.empty()) {
        for (const auto& r : requested) out.push_back(resolve_variable(d, r));
        return out;
    }
    for (const char* n : {"UNRATE", "CPIAUCSL", "FEDFUNDS"})
        if (auto c = d.column_of(n)) out.push_back(*c);
    if (out.size() == 3) return out;
    out.clear();
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(3, d.cols()); ++j) out.push_back(j);
    return out;
}

inline json data_json(const Dataset& d) {
    std::vector<std::string> tr;
    for (auto t : d.transforms) tr.push_back(to_string(t));
    return json{{"path", d.source},
                {"sha256", d.source_hash},
                {"start", d.dates.front().str()},
                {"end", d.dates.back().str()},
                {"rows", d.rows()},
                {"variables", d.names},
                {"transforms", tr},
                {"flags", d.flags}};
}

inline std::string replay_command() { return "cbvar replay manifest.json --out <dir>"; }

inline void write_manifest(const fs::path& dir, const RunConfig& cfg, const json& input, RunSummary& s) {
    json outputs = json::object();
    for (const auto& f : s.files) outputs[f] = sha256_file((dir / f).string());
    json m{{"tool", "cbvar"},
           {"version", kVersion},
           {"command", cfg.command},
           {"config", to_json(cfg)},
           {"input", input},
           {"outputs", outputs},
           {"replay", replay_command()}};
    write_text(dir / "manifest.json", m.dump(2) + "\n");
    s.files.push_back("manifest.json");
}

inline void write_alpha_curve_file(const AlphaGrid& g, const fs::path& p) { write_alpha_curve(g, p.string()); }

}  // namespace detail

/// Fits one model on the requested window and writes posterior.json,
/// alpha_curve.csv and forecast.csv.
inline RunSummary cmd_estimate(const RunConfig& cfg, const fs::path& dir) {
    RunSummary s;
    const Dataset data = detail::load_data(cfg);
    const int p = cfg.effective_lags();
    const VarDesign design = build_design(data, p);
    const PriorBuilder builder(data, p);
    const auto lgrid = detail::lambda_grid(cfg);
    const detail::ModelFit m = detail::fit_model(design, builder, cfg.alpha, lgrid, cfg.tau);
    const AlphaGrid curve = m.curve ? *m.curve : detail::diagnostic_curve(design, builder, lgrid, cfg.tau);
    const auto& f = m.fit;

    json lml = json::array();
    for (double v : f.lambda.log_ml) lml.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    json post{{"alpha_requested", m.requested},
              {"alpha", alpha_label(f.rate.alpha)},
              {"zeta", f.rate.zeta},
              {"T_effective", design.T_effective()},
              {"lags", p},
              {"variables", design.var_names},
              {"lambda", f.lambda.lambda_star},
              {"kappa", f.prior.kappa},
              {"xi", f.prior.xi},
              {"lambda_grid", f.lambda.grid},
              {"log_marginal_likelihood", lml},
              {"df", f.posterior.df},
              {"A_bar", detail::matrix_json(f.posterior.A_bar)},
              {"V_bar", detail::matrix_json(f.posterior.V_bar)},
              {"S_bar", detail::matrix_json(f.posterior.S_bar)},
              {"logdet_V_bar", f.posterior.logdet_V_bar},
              {"logdet_S_bar", f.posterior.logdet_S_bar},
              {"jittered", f.posterior.jittered},
              {"sigma_hat", std::vector<double>(builder.sigma_hat().begin(), builder.sigma_hat().end())},
              {"fit", {{"mf", f.fit.mf}, {"mc", f.fit.mc}, {"tau", f.fit.tau}}}};
    if (m.curve) post["alpha_star"] = alpha_label(f.rate.alpha);
    detail::write_text(dir / "posterior.json", post.dump(2) + "\n");
    s.files.push_back("posterior.json");

    detail::write_alpha_curve_file(curve, dir / "alpha_curve.csv");
    s.files.push_back("alpha_curve.csv");

    const PosteriorDraws draws = sample_posterior(f.posterior, cfg.draws, rng::derive(cfg.seed, {1}), cfg.threads);
    const ForecastResult fc = forecast(draws, data.values, p, cfg.horizons, rng::derive(cfg.seed, {2}),
                                       cfg.threads, data.names);
    write_forecast_csv(fc, (dir / "forecast.csv").string());
    s.files.push_back("forecast.csv");

    if (m.curve) s.messages.push_back("alpha* = " + alpha_label(f.rate.alpha));
    s.messages.push_back("lambda* = " + csv::num(f.lambda.lambda_star));
    detail::write_manifest(dir, cfg, detail::data_json(data), s);
    return s;
}

/// Evaluates the (MF, MC) curve and reports the knee.
inline RunSummary cmd_select_alpha(const RunConfig& cfg, const fs::path& dir) {
    RunSummary s;
    const Dataset data = detail::load_data(cfg);
    const int p = cfg.effective_lags();
    const VarDesign design = build_design(data, p);
    const PriorBuilder builder(data, p);
    const AlphaGrid g = evaluate_alpha_grid(design, builder, detail::lambda_grid(cfg), default_alpha_grid(), cfg.tau);
    const double star = select_alpha_knee(g);
    detail::write_alpha_curve_file(g, dir / "alpha_curve.csv");
    s.files.push_back("alpha_curve.csv");
    json sel{{"alpha_star", alpha_label(star)}, {"failures", g.failures}};
    json pts = json::array();
    for (std::size_t i = 0; i < g.points.size(); ++i)
        pts.push_back({{"alpha", alpha_label(g.points[i].alpha)},
                       {"lambda", g.lambdas[i]},
                       {"mf", g.points[i].mf},
                       {"mc", g.points[i].mc}});
    sel["points"] = pts;
    detail::write_text(dir / "selection.json", sel.dump(2) + "\n");
    s.files.push_back("selection.json");
    s.messages.push_back("alpha* = " + alpha_label(star));
    detail::write_manifest(dir, cfg, detail::data_json(data), s);
    return s;
}

namespace detail {

/// Per-origin score row as written to scores.csv.
struct ScoreRow {
    std::string origin;
    int horizon = 0;
    std::string target;
    std::string variable;
    double point = 0.0;
    double realized = 0.0;
    double abs_error = 0.0;
    double lpl = 0.0;

    auto key() const { return std::tie(origin, horizon, variable); }
};

inline void write_scores(const std::vector<ScoreRow>& rows, const fs::path& p) {
    std::ostringstream out;
    out << "# absolute scores per origin; point = predictive median, "
           "lpl = log N(realized | predictive mean, predictive variance)\n";
    out << "origin,horizon,target,variable,point,realized,abs_error,lpl\n";
    for (const auto& r : rows)
        out << r.origin << ',' << r.horizon << ',' << r.target << ',' << r.variable << ',' << csv::num(r.point)
            << ',' << csv::num(r.realized) << ',' << csv::num(r.abs_error) << ',' << csv::num(r.lpl) << '\n';
    write_text(p, out.str());
}

inline std::vector<ScoreRow> read_scores(const fs::path& p) {
    std::istringstream in(read_text(p));
    std::vector<ScoreRow> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        const auto c = csv::split(line);
        if (c.size() != 8) throw DataError(p.string() + ": malformed score row '" + line + "'");
        ScoreRow r;
        r.origin = c[0];
        r.horizon = std::stoi(c[1]);
        r.target = c[2];
        r.variable = c[3];
        r.point = csv::parse_number(c[4]);
        r.realized = csv::parse_number(c[5]);
        r.abs_error = csv::parse_number(c[6]);
        r.lpl = csv::parse_number(c[7]);
        rows.push_back(std::move(r));
    }
    return rows;
}

struct Benchmark {
    std::string label;
    std::vector<ScoreRow> rows;
};

inline Benchmark load_benchmark(const std::string& manifest_path) {
    json m;
    try {
        m = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw ConfigError("benchmark manifest " + manifest_path + " is not valid JSON: " + e.what());
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    if (m.value("command", "") != "backtest")
        throw ConfigError("benchmark manifest " + manifest_path + " is not from a backtest run");
    const auto& c = m.at("config");
    Benchmark b;
    b.label = manifest_path + " (size=" + c.value("size", "?") + ", alpha=" + c.value("alpha", "?") +
              ", lags=" + std::to_string(c.value("lags", 0)) + ")";
    b.rows = read_scores(fs::path(manifest_path).parent_path() / "scores.csv");
    return b;
}

/// Aggregates (mean abs error, mean lpl, count) per (horizon, variable).
struct Cell {
    double abs_error = 0.0;
    double lpl = 0.0;
    int n = 0;
};
using CellMap = std::map<std::pair<int, std::string>, Cell>;

inline CellMap aggregate(const std::vector<ScoreRow>& rows, const std::optional<YearMonth>& cut) {
    CellMap m;
    for (const auto& r : rows) {
        if (cut && *cut < YearMonth::parse_or_throw(r.target)) continue;
        auto& c = m[{r.horizon, r.variable}];
        c.abs_error += r.abs_error;
        c.lpl += r.lpl;
        ++c.n;
    }
    for (auto& [k, c] : m) {
        c.abs_error /= c.n;
        c.lpl /= c.n;
    }
    return m;
}

inline void write_summary_tables(const std::vector<ScoreRow>& rows, const std::optional<Benchmark>& bench,
                                 const std::optional<YearMonth>& cut, const std::string& suffix,
                                 const fs::path& dir, RunSummary& s) {
    const CellMap mine = aggregate(rows, cut);
    const std::optional<CellMap> theirs = bench ? std::optional(aggregate(bench->rows, cut)) : std::nullopt;
    const std::string period = cut ? "targets up to " + cut->str() : "all targets";
    const std::string bdef = bench ? "# benchmark: " + bench->label : "# benchmark: none (absolute scores only)";

    std::ostringstream mae, lpl;
    mae << bdef << "; ratio = model MAE / benchmark MAE; " << period << '\n';
    lpl << bdef << "; difference = model mean LPL - benchmark mean LPL; " << period << '\n';
    mae << "horizon,variable,n,mae" << (bench ? ",benchmark_mae,ratio" : "") << '\n';
    lpl << "horizon,variable,n,lpl" << (bench ? ",benchmark_lpl,difference" : "") << '\n';
    for (const auto& [key, c] : mine) {
        mae << key.first << ',' << key.second << ',' << c.n << ',' << csv::num(c.abs_error);
        lpl << key.first << ',' << key.second << ',' << c.n << ',' << csv::num(c.lpl);
        if (theirs) {
            const Cell& b = theirs->at(key);
            mae << ',' << csv::num(b.abs_error) << ',' << csv::num(c.abs_error / b.abs_error);
            lpl << ',' << csv::num(b.lpl) << ',' << csv::num(c.lpl - b.lpl);
        }
        mae << '\n';
        lpl << '\n';
    }
    write_text(dir / ("mae" + suffix + ".csv"), mae.str());
    write_text(dir / ("lpl" + suffix + ".csv"), lpl.str());
    s.files.push_back("mae" + suffix + ".csv");
    s.files.push_back("lpl" + suffix + ".csv");
}

/// Running sums of LPL per (horizon, variable) and over all focus variables
/// ("all"), in origin order.
inline void write_cumulative(const std::vector<ScoreRow>& rows, const std::optional<Benchmark>& bench,
                             const fs::path& dir, RunSummary& s) {
    std::map<std::tuple<std::string, int, std::string>, double> blpl;
    if (bench)
        for (const auto& r : bench->rows) {
            blpl[{r.origin, r.horizon, r.variable}] = r.lpl;
            blpl[{r.origin, r.horizon, "all"}] += r.lpl;
        }
    std::map<std::tuple<std::string, int, std::string>, double> totals;
    std::vector<std::tuple<std::string, int, std::string>> order;
    for (const auto& r : rows) {
        order.emplace_back(r.origin, r.horizon, r.variable);
        totals[{r.origin, r.horizon, r.variable}] = r.lpl;
        auto [it, inserted] = totals.try_emplace({r.origin, r.horizon, "all"}, 0.0);
        it->second += r.lpl;
        if (inserted) order.emplace_back(r.origin, r.horizon, "all");
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<1>(a), std::get<2>(a), std::get<0>(a)) <
               std::tie(std::get<1>(b), std::get<2>(b), std::get<0>(b));
    });
    std::ostringstream out;
    out << (bench ? "# benchmark: " + bench->label : std::string("# benchmark: none"))
        << "; cumulative sums of LPL over origins; difference = model - benchmark\n";
    out << "origin,horizon,variable,lpl,cumulative" << (bench ? ",benchmark_cumulative,difference" : "") << '\n';
    std::map<std::pair<int, std::string>, std::pair<double, double>> run;
    for (const auto& k : order) {
        auto& acc = run[{std::get<1>(k), std::get<2>(k)}];
        const double v = totals.at(k);
        acc.first += v;
        out << std::get<0>(k) << ',' << std::get<1>(k) << ',' << std::get<2>(k) << ',' << csv::num(v) << ','
            << csv::num(acc.first);
        if (bench) {
            acc.second += blpl.at(k);
            out << ',' << csv::num(acc.second) << ',' << csv::num(acc.first - acc.second);
        }
        out << '\n';
    }
    write_text(dir / "lpl_cumulative.csv", out.str());
    s.files.push_back("lpl_cumulative.csv");
}

}  // namespace detail

/// Recursive out-of-sample evaluation: one fit per expanding window (lambda
/// re-optimized each time), predictive simulation, MAE and LPL scores.
inline RunSummary cmd_backtest(const RunConfig& cfg, const fs::path& dir) {
    RunSummary s;
    const Dataset data = detail::load_data(cfg);
    const int p = cfg.effective_lags();
    const auto lgrid = detail::lambda_grid(cfg);
    const auto focus = detail::focus_variables(data, cfg.focus);
    if (cfg.horizons.empty()) throw ConfigError("no forecast horizons requested");
    const int max_h = *std::max_element(cfg.horizons.begin(), cfg.horizons.end());
    const auto first = detail::parse_month(cfg.first_origin, "--first-origin");
    if (!first) throw ConfigError("--first-origin is required for backtests");
    const auto cut = detail::parse_month(cfg.cut, "--cut");
    const auto splits = recursive_windows(data, *first, data.dates.back(), max_h);
    std::optional<detail::Benchmark> bench;
    if (!cfg.benchmark.empty()) bench = detail::load_benchmark(cfg.benchmark);

    struct OriginResult {
        std::vector<detail::ScoreRow> rows;
        double alpha = kInf;
        double lambda = 0.0;
    };
    std::vector<OriginResult> results(splits.size());
    parallel_for(splits.size(), cfg.threads, [&](std::size_t i) {
        const auto& sp = splits[i];
        const VarDesign design = build_design(sp.train, p);
        const PriorBuilder builder(sp.train, p);
        const auto m = detail::fit_model(design, builder, cfg.alpha, lgrid, cfg.tau);
        const auto tag = static_cast<std::uint64_t>(sp.origin.ordinal());
        const PosteriorDraws draws = sample_posterior(m.fit.posterior, cfg.draws, rng::derive(cfg.seed, {tag, 1}));
        const ForecastResult fc =
            forecast(draws, sp.train.values, p, cfg.horizons, rng::derive(cfg.seed, {tag, 2}), 1, data.names);
        auto& out = results[i];
        out.alpha = m.fit.rate.alpha;
        out.lambda = m.fit.lambda.lambda_star;
        for (const auto& sc : score_forecasts(fc, sp.realized, focus)) {
            detail::ScoreRow r;
            r.origin = sp.origin.str();
            r.horizon = sc.horizon;
            r.target = sp.origin.plus(sc.horizon).str();
            r.variable = data.names[static_cast<std::size_t>(sc.variable)];
            r.point = sc.point;
            r.realized = sc.realized;
            r.abs_error = sc.abs_error;
            r.lpl = sc.lpl;
            out.rows.push_back(std::move(r));
        }
    });

    std::vector<detail::ScoreRow> rows;
    std::ostringstream hyper;
    hyper << "# hyperparameters used at each origin (alpha requested: " << cfg.alpha << ")\n";
    hyper << "origin,alpha,lambda\n";
    for (std::size_t i = 0; i < splits.size(); ++i) {
        hyper << splits[i].origin.str() << ',' << alpha_label(results[i].alpha) << ','
              << csv::num(results[i].lambda) << '\n';
        rows.insert(rows.end(), results[i].rows.begin(), results[i].rows.end());
    }

    if (bench) {
        auto keys = [](const std::vector<detail::ScoreRow>& v) {
            std::vector<std::tuple<std::string, int, std::string>> k;
            for (const auto& r : v) k.emplace_back(r.origin, r.horizon, r.variable);
            std::sort(k.begin(), k.end());
            return k;
        };
        if (keys(rows) != keys(bench->rows))
            throw ConfigError("benchmark run " + cfg.benchmark +
                              " does not cover the same origins, horizons and variables");
    }

    detail::write_scores(rows, dir / "scores.csv");
    s.files.push_back("scores.csv");
    detail::write_text(dir / "hyperparameters.csv", hyper.str());
    s.files.push_back("hyperparameters.csv");
    detail::write_summary_tables(rows, bench, std::nullopt, "", dir, s);
    if (cut) detail::write_summary_tables(rows, bench, cut, "_precut", dir, s);
    detail::write_cumulative(rows, bench, dir, s);
    s.messages.push_back(std::to_string(splits.size()) + " origins from " + splits.front().origin.str() + " to " +
                         splits.back().origin.str());
    detail::write_manifest(dir, cfg, detail::data_json(data), s);
    return s;
}

/// Recursively identified impulse responses for one shock and one or more
/// alphas (comma separated, "bic" allowed). Every alpha uses the same seed.
inline RunSummary cmd_irf(const RunConfig& cfg, const fs::path& dir) {
    RunSummary s;
    const Dataset data = detail::load_data(cfg);
    const int p = cfg.effective_lags();
    const VarDesign design = build_design(data, p);
    const PriorBuilder builder(data, p);
    const auto lgrid = detail::lambda_grid(cfg);
    const Eigen::Index shock = detail::resolve_variable(data, cfg.shock);
    const auto alphas = detail::split_list(cfg.alpha);
    if (alphas.empty()) throw ConfigError("no alpha values given");
    if (cfg.irf_horizon < 0) throw ConfigError("IRF horizon must be non-negative");

    std::ostringstream out;
    out << "# impulse responses to a one-standard-deviation shock in " << data.names[static_cast<std::size_t>(shock)]
        << " (recursive identification, variable order as listed), " << cfg.draws
        << " draws per alpha; no benchmark\n";
    out << "alpha,horizon,variable,statistic,value\n";
    for (const auto& a : alphas) {
        const auto m = detail::fit_model(design, builder, a, lgrid, cfg.tau);
        const PosteriorDraws draws = sample_posterior(m.fit.posterior, cfg.draws, cfg.seed, cfg.threads);
        const IrfSet set = irf(draws, shock, cfg.irf_horizon, p, data.names);
        std::string label = alpha_label(m.fit.rate.alpha);
        if (m.requested == "bic") label = "bic=" + label;
        write_irf_rows(out, set, label + ",");
        s.messages.push_back("alpha " + label + ": lambda* = " + csv::num(m.fit.lambda.lambda_star));
    }
    detail::write_text(dir / "irf_quantiles.csv", out.str());
    s.files.push_back("irf_quantiles.csv");
    detail::write_manifest(dir, cfg, detail::data_json(data), s);
    return s;
}

inline RunSummary cmd_simstudy(const RunConfig& cfg, const fs::path& dir) {
    RunSummary s;
    StudyConfig sc;
    sc.replications = cfg.replications;
    sc.n_draws = cfg.draws;
    sc.seed = cfg.seed;
    sc.threads = cfg.threads;
    sc.p_est = cfg.effective_lags();
    sc.T_sim = cfg.sim_length;
    sc.tau = cfg.tau;
    sc.lambda_grid = detail::lambda_grid(cfg);
    if (sc.T_sim <= sc.p_est + 2) throw ConfigError("simulation length too short for the lag order");
    const StudyResult r = run_study(sc);
    write_study_table(r, (dir / "table1.csv").string());
    write_study_raw(r, (dir / "table1_raw.csv").string());
    s.files = {"table1.csv", "table1_raw.csv"};
    for (std::size_t d = 0; d < r.row_labels.size(); ++d)
        if (r.flagged[d])
            s.messages.push_back(r.row_labels[d] + ": only " + std::to_string(r.successes[d]) +
                                 " replications succeeded");
    const DgpSpec ref = DgpSpec::example1();
    json input{{"path", "simulated"},
               {"T_sim", sc.T_sim},
               {"burn_in", ref.burn_in},
               {"rc_sd", ref.rc_sd},
               {"exo_count", ref.exo_count},
               {"exo_var", ref.exo_var},
               {"exo_loading_sd", ref.exo_loading_sd},
               {"sv_rho", ref.sv_rho},
               {"t_dof", ref.t_dof}};
    detail::write_manifest(dir, cfg, input, s);
    return s;
}

/// Dispatches on cfg.command after creating the output directory.
inline RunSummary run(const RunConfig& cfg) {
    const fs::path dir(cfg.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + cfg.out + ": " + ec.message());
    if (cfg.draws < 1) throw ConfigError("--draws must be at least 1");
    if (cfg.command == "estimate") return cmd_estimate(cfg, dir);
    if (cfg.command == "select-alpha") return cmd_select_alpha(cfg, dir);
    if (cfg.command == "backtest") return cmd_backtest(cfg, dir);
    if (cfg.command == "irf") return cmd_irf(cfg, dir);
    if (cfg.command == "simstudy") return cmd_simstudy(cfg, dir);
    throw ConfigError("unknown command '" + cfg.command + "'");
}

/// Re-runs the configuration stored in a manifest. The input file must
/// still hash to the recorded value.
inline RunSummary replay(const std::string& manifest_path, const std::string& out, unsigned threads) {
    json m;
    try {
        m = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw ConfigError("manifest " + manifest_path + " is not valid JSON: " + e.what());
    }
    if (!m.contains("config")) throw ConfigError("manifest " + manifest_path + " has no config");
    RunConfig cfg = config_from_json(m["config"]);
    cfg.out = out;
    cfg.threads = threads;
    const auto& input = m.value("input", json::object());
    if (input.contains("sha256") && !cfg.data.empty()) {
        const std::string now = sha256_file(cfg.data);
        if (now != input["sha256"].get<std::string>())
            throw DataError("input " + cfg.data + " changed since the manifest was written");
    }
    return run(cfg);
}

}  // namespace cbvar::cli
