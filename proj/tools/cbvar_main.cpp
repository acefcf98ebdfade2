#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cbvar/cli.hpp"

namespace {

void add_common(CLI::App& sub, cbvar::cli::RunConfig& c, bool needs_data) {
    auto* data = sub.add_option("--data", c.data, "Input CSV (date column plus FRED mnemonics)");
    if (needs_data) data->required();
    sub.add_option("--size", c.size, "small | medium | large | custom:FILE")->capture_default_str();
    sub.add_option("--lags", c.lags, "Lag order (default 13; 12 for simstudy)");
    sub.add_option("--alpha", c.alpha, "Coarsening: number, inf or bic")->capture_default_str();
    sub.add_option("--lambda", c.lambda, "Minnesota tightness: auto or a number")->capture_default_str();
    sub.add_option("--horizons", c.horizons, "Forecast horizons")->delimiter(',')->capture_default_str();
    sub.add_option("--draws", c.draws, "Posterior draws")->capture_default_str();
    sub.add_option("--seed", c.seed, "Master seed")->capture_default_str();
    sub.add_option("--window", c.window, "Data window START:END (YYYY-MM, either side optional)");
    sub.add_option("--transforms", c.transforms, "File of 'NAME = transform' overrides");
    sub.add_option("--prepend", c.prepend, "Extra column placed first, in levels");
    sub.add_option("--tau", c.tau, "Effective-coefficient threshold")->capture_default_str();
    sub.add_option("--out", c.out, "Output directory")->capture_default_str();
    sub.add_option("--threads", c.threads, "Worker threads (0 = all cores); results do not depend on it")
        ->capture_default_str();
}

void fail(const std::string& kind, const std::string& message) {
    std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    cbvar::cli::RunConfig cfg;
    std::string manifest;

    CLI::App app{"Coarsened Bayesian VARs: estimation, alpha selection, backtests, IRFs, simulation study"};
    app.set_version_flag("--version", std::string(cbvar::cli::kVersion));
    app.require_subcommand(1);

    auto* est = app.add_subcommand("estimate", "Fit one model; writes posterior.json, alpha_curve.csv, forecast.csv");
    add_common(*est, cfg, true);

    auto* sel = app.add_subcommand("select-alpha", "Evaluate the fit/complexity curve and pick alpha at its knee");
    add_common(*sel, cfg, true);

    auto* bt = app.add_subcommand("backtest", "Recursive out-of-sample forecast evaluation");
    add_common(*bt, cfg, true);
    bt->add_option("--first-origin", cfg.first_origin, "Last month of the first estimation sample")
        ->capture_default_str();
    bt->add_option("--cut", cfg.cut, "Also write tables restricted to targets up to this month (e.g. 2019-12)");
    bt->add_option("--benchmark", cfg.benchmark, "manifest.json of a benchmark backtest");
    bt->add_option("--focus", cfg.focus, "Scored variables (default UNRATE,CPIAUCSL,FEDFUNDS or the first three)")
        ->delimiter(',');

    auto* ir = app.add_subcommand("irf", "Impulse responses for one shock and a list of alphas");
    add_common(*ir, cfg, true);
    ir->add_option("--shock", cfg.shock, "Shocked variable (name or 0-based index)")->capture_default_str();
    ir->add_option("--irf-horizon", cfg.irf_horizon, "Last IRF horizon")->capture_default_str();

    auto* sim = app.add_subcommand("simstudy", "Monte Carlo study over the nine simulation designs");
    add_common(*sim, cfg, false);
    sim->add_option("--replications", cfg.replications, "Replications per design")->capture_default_str();
    sim->add_option("--sim-length", cfg.sim_length, "Simulated sample length after burn-in")->capture_default_str();

    auto* rep = app.add_subcommand("replay", "Re-run the configuration recorded in a manifest");
    rep->add_option("manifest", manifest, "manifest.json")->required();
    rep->add_option("--out", cfg.out, "Output directory")->required();
    rep->add_option("--threads", cfg.threads, "Worker threads")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        cbvar::cli::RunSummary summary;
        if (rep->parsed()) {
            summary = cbvar::cli::replay(manifest, cfg.out, cfg.threads);
        } else {
            cfg.command = app.get_subcommands().front()->get_name();
            summary = cbvar::cli::run(cfg);
        }
        for (const auto& m : summary.messages) std::cout << m << '\n';
        for (const auto& f : summary.files) std::cout << "wrote " << cfg.out << '/' << f << '\n';
        return 0;
    } catch (const cbvar::ConfigError& e) {
        fail("config", e.what());
        return 2;
    } catch (const cbvar::DataError& e) {
        fail("data", e.what());
        return 3;
    } catch (const cbvar::NumericError& e) {
        fail("numeric", e.what());
        return 4;
    } catch (const std::exception& e) {
        fail("internal", e.what());
        return 1;
    }
}
