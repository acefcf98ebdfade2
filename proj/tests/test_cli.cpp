#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "cbvar/cli.hpp"
#include "support.hpp"

using namespace cbvar;
using namespace testing_support;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
    const auto o = scratch / "stdout.txt", e = scratch / "stderr.txt";
    const std::string cmd = std::string(CBVAR_CLI_PATH) + " " + args + " > " + o.string() + " 2> " + e.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(o.string());
    r.err = read_file(e.string());
    return r;
}

/// Writes `y` as a monthly CSV plus a custom size file naming its columns.
std::pair<std::string, std::string> write_panel(const fs::path& dir, const MatrixXd& y,
                                                std::vector<std::string> names = {}) {
    const Dataset d = Dataset::from_matrix(y, names, {1990, 1});
    write_csv(d, (dir / "data.csv").string());
    std::ofstream(dir / "vars.txt") << [&] {
        std::string s;
        for (const auto& n : d.names) s += n + "\n";
        return s;
    }();
    return {(dir / "data.csv").string(), "custom:" + (dir / "vars.txt").string()};
}

MatrixXd json_matrix(const json& j) {
    MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return m;
}

/// Data rows of a CSV (comments and header dropped), split into cells.
std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
    std::istringstream in(read_file(p.string()));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        rows.push_back(csv::split(line));
    }
    return rows;
}

MatrixXd t3_sample(std::uint64_t seed, int T = 480) {
    auto spec = DgpSpec::example1(MeanFamily::VAR, ShockFamily::T3, seed);
    spec.T_sim = T;
    return simulate_dgp(spec).values;
}

MatrixXd random_walk(int T, int M, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    MatrixXd y(T, M);
    for (Eigen::Index j = 0; j < M; ++j) y(0, j) = 10.0 * n(rng);
    for (Eigen::Index t = 1; t < T; ++t)
        for (Eigen::Index j = 0; j < M; ++j) y(t, j) = y(t - 1, j) + n(rng);
    return y;
}

}  // namespace

TEST(CliEstimate, MatchesLibraryApi) {
    const auto dir = scratch_dir("cli_api");
    const MatrixXd y = t3_sample(1, 200);
    const auto [data, size] = write_panel(dir, y);
    const auto r = run_cli("estimate --data " + data + " --size " + size +
                               " --lags 2 --alpha inf --lambda 0.2 --draws 50 --out " + (dir / "out").string(),
                           dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const json post = json::parse(read_file((dir / "out" / "posterior.json").string()));

    const Dataset d = load_csv(data, ModelSizeSpec::parse(size));
    const auto design = build_design(d, 2);
    const auto fit = fit_alpha(design, PriorBuilder(d, 2), {0.2}, kInf);
    EXPECT_EQ(json_matrix(post["A_bar"]), fit.posterior.A_bar);
    EXPECT_EQ(json_matrix(post["S_bar"]), fit.posterior.S_bar);
    EXPECT_EQ(post["df"].get<double>(), fit.posterior.df);
    EXPECT_EQ(post["lambda"].get<double>(), 0.2);
    for (const char* f : {"alpha_curve.csv", "forecast.csv", "manifest.json"})
        EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
}

TEST(CliEstimate, BicSelectsAGridValue) {
    const auto dir = scratch_dir("cli_bic");
    const auto [data, size] = write_panel(dir, t3_sample(2));
    const auto r = run_cli("estimate --data " + data + " --size " + size +
                               " --lags 12 --alpha bic --draws 100 --out " + (dir / "out").string(),
                           dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const json post = json::parse(read_file((dir / "out" / "posterior.json").string()));
    const std::string star = post["alpha_star"];
    bool in_grid = false;
    for (double a : default_alpha_grid()) in_grid = in_grid || alpha_label(a) == star;
    EXPECT_TRUE(in_grid) << star;
    EXPECT_NE(r.out.find("alpha* = " + star), std::string::npos);
}

TEST(CliManifest, RerunAndReplayAreByteIdentical) {
    const auto dir = scratch_dir("cli_rerun");
    const auto [data, size] = write_panel(dir, t3_sample(3, 150));
    const std::string common = "estimate --data " + data + " --size " + size + " --lags 2 --draws 300 --seed 9";
    ASSERT_EQ(run_cli(common + " --out " + (dir / "a").string(), dir).code, 0);
    ASSERT_EQ(run_cli(common + " --threads 3 --out " + (dir / "b").string(), dir).code, 0);
    const auto replayed = run_cli("replay " + (dir / "a" / "manifest.json").string() + " --threads 2 --out " +
                                      (dir / "c").string(),
                                  dir);
    ASSERT_EQ(replayed.code, 0) << replayed.err;
    for (const char* f : {"posterior.json", "alpha_curve.csv", "forecast.csv", "manifest.json"}) {
        const auto a = sha256_file((dir / "a" / f).string());
        EXPECT_EQ(a, sha256_file((dir / "b" / f).string())) << f;
        EXPECT_EQ(a, sha256_file((dir / "c" / f).string())) << f;
    }
    const json m = json::parse(read_file((dir / "a" / "manifest.json").string()));
    EXPECT_EQ(m["input"]["sha256"], sha256_file(data));
    EXPECT_EQ(m["outputs"]["forecast.csv"], sha256_file((dir / "a" / "forecast.csv").string()));
    EXPECT_FALSE(m["version"].get<std::string>().empty());

    std::ofstream(data, std::ios::app) << "\n";
    const auto stale = run_cli("replay " + (dir / "a" / "manifest.json").string() + " --out " + (dir / "d").string(), dir);
    EXPECT_EQ(stale.code, 3);
}

namespace {

std::map<std::string, std::vector<std::string>> by_key(const fs::path& p) {
    std::map<std::string, std::vector<std::string>> out;
    for (auto& r : csv_rows(p)) out[r[0] + "/" + r[1]] = r;
    return out;
}

}  // namespace

TEST(CliBacktest, SelfBenchmarkAndPrecutTables) {
    const auto dir = scratch_dir("cli_self");
    const auto [data, size] = write_panel(dir, t3_sample(4, 180));
    const std::string common = "backtest --data " + data + " --size " + size +
                               " --lags 2 --draws 200 --horizons 1,3 --first-origin 2003-06 --cut 2004-06";
    ASSERT_EQ(run_cli(common + " --out " + (dir / "base").string(), dir).code, 0);
    const auto r = run_cli(common + " --benchmark " + (dir / "base" / "manifest.json").string() + " --out " +
                               (dir / "self").string(),
                           dir);
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"mae.csv", "mae_precut.csv"})
        for (const auto& row : csv_rows(dir / "self" / f)) EXPECT_EQ(row.at(5), "1") << f;
    for (const char* f : {"lpl.csv", "lpl_precut.csv"})
        for (const auto& row : csv_rows(dir / "self" / f)) EXPECT_EQ(row.at(5), "0") << f;
    for (const auto& row : csv_rows(dir / "self" / "lpl_cumulative.csv")) EXPECT_EQ(csv::parse_number(row.back()), 0.0);

    // 2003-06 .. 2004-11 are the 18 origins; h = 1 targets up to 2004-06 cover 12 of them.
    const auto all = by_key(dir / "base" / "mae.csv");
    const auto pre = by_key(dir / "base" / "mae_precut.csv");
    EXPECT_EQ(all.at("1/y1")[2], "18");
    EXPECT_EQ(pre.at("1/y1")[2], "12");
    EXPECT_EQ(pre.at("3/y1")[2], "10");
    EXPECT_EQ(csv_rows(dir / "base" / "hyperparameters.csv").size(), 18u);
    EXPECT_EQ(read_file((dir / "base" / "mae.csv").string()).rfind("# benchmark: none", 0), 0u);

    const auto mismatch = run_cli("backtest --data " + data + " --size " + size +
                                      " --lags 2 --draws 200 --horizons 1,3 --first-origin 2004-01 --benchmark " +
                                      (dir / "base" / "manifest.json").string() + " --out " + (dir / "bad").string(),
                                  dir);
    EXPECT_EQ(mismatch.code, 2);
    EXPECT_NE(mismatch.err.find("\"error\":\"config\""), std::string::npos);
}

TEST(CliBacktest, RandomWalkDataMatchesRandomWalkOracle) {
    const auto dir = scratch_dir("cli_rw");
    const MatrixXd y = random_walk(300, 3, 21);
    const auto [data, size] = write_panel(dir, y, {"UNRATE", "CPIAUCSL_LEVEL", "FEDFUNDS"});
    const auto r = run_cli("backtest --data " + data + " --size " + size +
                               " --alpha inf --draws 1000 --horizons 1 --first-origin 2004-12 --out " +
                               (dir / "out").string(),
                           dir);
    ASSERT_EQ(r.code, 0) << r.err;
    // Oracle: the exact random-walk forecast y_{t+1|t} = y_t at the same origins.
    const Dataset d = Dataset::from_matrix(y, {}, {1990, 1});
    const Eigen::Index first = *d.row_of({2004, 12});
    for (const auto& row : csv_rows(dir / "out" / "mae.csv")) {
        const Eigen::Index j = row[1] == "UNRATE" ? 0 : row[1] == "CPIAUCSL_LEVEL" ? 1 : 2;
        double oracle = 0.0;
        int n = 0;
        for (Eigen::Index o = first; o + 1 < y.rows(); ++o, ++n) oracle += std::abs(y(o + 1, j) - y(o, j));
        oracle /= n;
        EXPECT_EQ(std::stoi(row[2]), n);
        EXPECT_NEAR(csv::parse_number(row[3]) / oracle, 1.0, 0.05) << row[1];
    }
}

TEST(CliIrf, TwoAlphaBlocksShareHorizons) {
    const auto dir = scratch_dir("cli_irf2");
    const auto [data, size] = write_panel(dir, t3_sample(5, 200));
    const auto r = run_cli("irf --data " + data + " --size " + size +
                               " --lags 2 --alpha 50,inf --shock y2 --irf-horizon 6 --draws 200 --out " +
                               (dir / "out").string(),
                           dir);
    ASSERT_EQ(r.code, 0) << r.err;
    std::map<std::string, std::set<int>> horizons;
    for (const auto& row : csv_rows(dir / "out" / "irf_quantiles.csv")) horizons[row[0]].insert(std::stoi(row[1]));
    ASSERT_EQ(horizons.size(), 2u);
    EXPECT_EQ(horizons.at("50"), horizons.at("inf"));
    EXPECT_EQ(horizons.at("inf").size(), 7u);
    EXPECT_NE(read_file((dir / "out" / "irf_quantiles.csv").string()).find("shock in y2"), std::string::npos);
}

TEST(CliIrf, ScalarModelGivesAutoregressivePath) {
    const auto dir = scratch_dir("cli_irf1");
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n;
    MatrixXd y(150, 1);
    y(0, 0) = 0.0;
    for (Eigen::Index t = 1; t < 150; ++t) y(t, 0) = 0.6 * y(t - 1, 0) + n(rng);
    const auto [data, size] = write_panel(dir, y);
    const int draws = 201;
    const auto r = run_cli("irf --data " + data + " --size " + size +
                               " --lags 1 --alpha inf --lambda 0.5 --shock 0 --irf-horizon 8 --seed 4 --draws " +
                               std::to_string(draws) + " --out " + (dir / "out").string(),
                           dir);
    ASSERT_EQ(r.code, 0) << r.err;
    // With one lag each draw's path is sigma * a^h; the median of 201 draws
    // is the 101st order statistic.
    const Dataset d = load_csv(data, ModelSizeSpec::parse(size));
    const auto fit = fit_alpha(build_design(d, 1), PriorBuilder(d, 1), {0.5}, kInf);
    const auto pd = sample_posterior(fit.posterior, draws, 4);
    std::map<int, double> q50;
    for (const auto& row : csv_rows(dir / "out" / "irf_quantiles.csv"))
        if (row[3] == "q50") q50[std::stoi(row[1])] = csv::parse_number(row[4]);
    ASSERT_EQ(q50.size(), 9u);
    for (int h = 0; h <= 8; ++h) {
        std::vector<double> paths;
        for (std::size_t i = 0; i < pd.n_draws(); ++i) {
            double v = pd.Sigma_chol[i](0, 0);
            for (int k = 0; k < h; ++k) v *= pd.A[i](1, 0);
            paths.push_back(v);
        }
        std::nth_element(paths.begin(), paths.begin() + 100, paths.end());
        EXPECT_NEAR(q50.at(h), paths[100], 1e-12 * std::max(1.0, std::abs(paths[100]))) << h;
    }
}

TEST(CliErrors, ExitCodesAndStructuredMessages) {
    const auto dir = scratch_dir("cli_errors");
    const auto [data, size] = write_panel(dir, t3_sample(7, 120));
    const auto out = " --out " + (dir / "o").string();

    auto r = run_cli("estimate --size small" + out, dir);
    EXPECT_EQ(r.code, 2);
    r = run_cli("estimate --data " + data + " --size " + size + " --alpha banana" + out, dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("\"error\":\"config\""), std::string::npos);
    r = run_cli("estimate --data " + (dir / "missing.csv").string() + " --size " + size + out, dir);
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("\"error\":\"data\""), std::string::npos);
    r = run_cli("estimate --data " + data + " --size small" + out, dir);
    EXPECT_EQ(r.code, 3);
    r = run_cli("estimate --data " + data + " --size " + size + " --lags 2 --lambda 1e-300" + out, dir);
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("\"error\":\"numeric\""), std::string::npos);
    EXPECT_EQ(run_cli("--help", dir).code, 0);
    EXPECT_EQ(run_cli("frobnicate", dir).code, 2);
}

TEST(CliSimstudy, WritesTablesAndManifest) {
    const auto dir = scratch_dir("cli_sim");
    const auto r = run_cli("simstudy --replications 1 --sim-length 150 --lags 2 --draws 100 --out " +
                               (dir / "out").string(),
                           dir);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(csv_rows(dir / "out" / "table1.csv").size(), 9u);
    const json m = json::parse(read_file((dir / "out" / "manifest.json").string()));
    EXPECT_EQ(m["input"]["exo_loading_sd"], 0.2);
    EXPECT_EQ(m["config"]["lags"], 2);
}

TEST(CliIrf, CoarsenedModelTracksTrueResponsesUnderHeavyTails) {
    const auto spec = DgpSpec::example1();
    const MatrixXd truth = true_irf(spec, 12);
    const int shock = 1;
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto dir = scratch_dir("cli_ex1_" + std::to_string(seed));
        const auto [data, size] = write_panel(dir, t3_sample(100 + seed));
        const auto r = run_cli("irf --data " + data + " --size " + size + " --lags 12 --alpha inf,bic --shock " +
                                   std::to_string(shock) + " --irf-horizon 12 --draws 1000 --seed " +
                                   std::to_string(seed) + " --out " + (dir / "out").string(),
                               dir);
        ASSERT_EQ(r.code, 0) << r.err;
        std::map<std::string, double> mae;
        for (const auto& row : csv_rows(dir / "out" / "irf_quantiles.csv")) {
            if (row[3] != "q50") continue;
            const int h = std::stoi(row[1]);
            if (h == 0) continue;
            const int v = row[2] == "y1" ? 0 : row[2] == "y2" ? 1 : 2;
            const std::string label = row[0].rfind("bic", 0) == 0 ? "bic" : row[0];
            mae[label] += std::abs(csv::parse_number(row[4]) - truth(h, 3 * shock + v)) / 36.0;
        }
        wins += mae.at("bic") < mae.at("inf");
    }
    EXPECT_GE(wins, 16);
}
