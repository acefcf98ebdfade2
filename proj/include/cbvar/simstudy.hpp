#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbvar/core.hpp"
#include "cbvar/csv.hpp"
#include "cbvar/dataset.hpp"
#include "cbvar/error.hpp"
#include "cbvar/montecarlo.hpp"
#include "cbvar/parallel.hpp"
#include "cbvar/priors.hpp"
#include "cbvar/rng.hpp"
#include "cbvar/selection.hpp"

namespace cbvar {

enum class MeanFamily { VAR, RC, EXO };
enum class ShockFamily { GAUSS, T3, SV };

inline std::string to_string(MeanFamily f) {
    switch (f) {
        case MeanFamily::VAR: return "VAR";
        case MeanFamily::RC: return "RC";
        case MeanFamily::EXO: return "EXO";
    }
    return "VAR";
}

inline std::string to_string(ShockFamily f) {
    switch (f) {
        case ShockFamily::GAUSS: return "GAUSS";
        case ShockFamily::T3: return "T3";
        case ShockFamily::SV: return "SV";
    }
    return "GAUSS";
}

/// One simulation design: the three-variable VAR(2) calibrated to US
/// unemployment, inflation and the short rate, with a conditional-mean
/// variant and a shock distribution.
struct DgpSpec {
    MeanFamily mean_family = MeanFamily::VAR;
    ShockFamily shock_family = ShockFamily::GAUSS;
    Eigen::Matrix3d A1;
    Eigen::Matrix3d A2;
    Eigen::Matrix3d Q;  // lower-triangular impact matrix
    int T_sim = 480;
    int burn_in = 100;
    double rc_sd = 0.035;
    int exo_count = 30;
    double exo_var = 4.0;
    double exo_loading_sd = 0.2;  // large enough for the omitted factors to dominate
    double sv_rho = 0.8;
    double sv_innov_var = 1.0;
    double t_dof = 3.0;
    std::uint64_t seed = 0;

    static DgpSpec example1(MeanFamily mean = MeanFamily::VAR, ShockFamily shock = ShockFamily::GAUSS,
                            std::uint64_t seed = 0) {
        DgpSpec s;
        s.mean_family = mean;
        s.shock_family = shock;
        s.seed = seed;
        s.A1 << 1.60, 0.09, 0.32,
               -0.16, 1.54, -0.49,
                0.02, 0.00, 1.01;
        s.A2 << -0.61, -0.09, -0.22,
                 0.16, -0.57, 0.53,
                -0.02, 0.04, -0.12;
        s.Q << 0.30, 0.00, 0.00,
               0.00, 0.28, 0.00,
               0.17, -0.28, 0.65;
        return s;
    }

    std::string label() const { return to_string(mean_family) + "/" + to_string(shock_family); }
};

/// All nine (mean family x shock family) designs in table order.
inline std::vector<DgpSpec> all_dgps() {
    std::vector<DgpSpec> out;
    for (auto m : {MeanFamily::VAR, MeanFamily::RC, MeanFamily::EXO})
        for (auto s : {ShockFamily::GAUSS, ShockFamily::T3, ShockFamily::SV}) out.push_back(DgpSpec::example1(m, s));
    return out;
}

namespace detail {

inline std::optional<MatrixXd> simulate_once(const DgpSpec& spec, Rng& rng) {
    constexpr int M = 3;
    const int total = spec.burn_in + spec.T_sim;
    std::normal_distribution<double> normal;
    std::student_t_distribution<double> student(spec.t_dof);

    MatrixXd B;
    if (spec.mean_family == MeanFamily::EXO) {
        B.resize(M, spec.exo_count);
        for (Eigen::Index c = 0; c < B.cols(); ++c)
            for (Eigen::Index r = 0; r < M; ++r) B(r, c) = spec.exo_loading_sd * normal(rng);
    }
    const double exo_sd = std::sqrt(spec.exo_var);
    const double sv_sd = std::sqrt(spec.sv_innov_var);

    Eigen::Vector3d y1 = Eigen::Vector3d::Zero();  // y_{t-1}
    Eigen::Vector3d y2 = Eigen::Vector3d::Zero();  // y_{t-2}
    Eigen::Vector3d w = Eigen::Vector3d::Zero();   // log-volatilities
    MatrixXd out(spec.T_sim, M);
    VectorXd z(spec.exo_count);
    for (int t = 0; t < total; ++t) {
        Eigen::Matrix3d A1 = spec.A1, A2 = spec.A2;
        if (spec.mean_family == MeanFamily::RC) {
            for (int c = 0; c < M; ++c)
                for (int r = 0; r < M; ++r) A1(r, c) += spec.rc_sd * normal(rng);
            for (int c = 0; c < M; ++c)
                for (int r = 0; r < M; ++r) A2(r, c) += spec.rc_sd * normal(rng);
        }
        Eigen::Vector3d eps;
        for (int j = 0; j < M; ++j) {
            switch (spec.shock_family) {
                case ShockFamily::GAUSS: eps(j) = normal(rng); break;
                case ShockFamily::T3: eps(j) = student(rng); break;
                case ShockFamily::SV:
                    w(j) = spec.sv_rho * w(j) + sv_sd * normal(rng);
                    eps(j) = std::exp(0.5 * w(j)) * normal(rng);
                    break;
            }
        }
        Eigen::Vector3d y = A1 * y1 + A2 * y2 + spec.Q * eps;
        if (spec.mean_family == MeanFamily::EXO) {
            for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = exo_sd * normal(rng);
            y += B * z;
        }
        if (!y.allFinite() || y.cwiseAbs().maxCoeff() > 1e8) return std::nullopt;
        y2 = y1;
        y1 = y;
        if (t >= spec.burn_in) out.row(t - spec.burn_in) = y.transpose();
    }
    return out;
}

}  // namespace detail

/// Simulates T_sim observations after discarding burn_in, starting from
/// y_0 = y_1 = 0. Explosive samples are redrawn with a fresh sub-seed, at
/// most five attempts.
inline Dataset simulate_dgp(const DgpSpec& spec) {
    if (spec.T_sim < 1 || spec.burn_in < 0) throw ConfigError("simulation length must be positive");
    for (std::uint64_t attempt = 0; attempt < 5; ++attempt) {
        Rng rng = rng::stream(spec.seed, {attempt});
        if (auto y = detail::simulate_once(spec, rng))
            return Dataset::from_matrix(*y, {"y1", "y2", "y3"});
    }
    throw NumericError("simulation of " + spec.label() + " overflowed in 5 attempts");
}

/// True responses of the linear core (A1, A2, Q) for horizons 0..H, all
/// three shocks: row h, column shock * 3 + variable.
inline MatrixXd true_irf(const DgpSpec& spec, int H) {
    if (H < 1) throw ConfigError("IRF horizon must be at least 1");
    MatrixXd A = MatrixXd::Zero(7, 3);
    A.block(1, 0, 3, 3) = spec.A1.transpose();
    A.block(4, 0, 3, 3) = spec.A2.transpose();
    MatrixXd out(H + 1, 9);
    for (int j = 0; j < 3; ++j) out.middleCols(3 * j, 3) = impulse_path(A, spec.Q.col(j), 2, H);
    return out;
}

struct StudyConfig {
    std::vector<double> alpha_grid{25, 50, 75, 100, 125, 150, 250, 350, 500, 1000, kInf};
    std::vector<double> selection_grid = default_alpha_grid();
    std::vector<double> lambda_grid = default_lambda_grid();
    int replications = 50;
    int p_est = 12;
    int T_sim = 480;
    int H = 12;
    std::size_t n_draws = 2000;
    double tau = 0.01;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::vector<DgpSpec> dgps = all_dgps();
};

/// Outcome of one replication of one design.
struct ReplicationResult {
    bool ok = false;
    std::string error;
    std::vector<double> mae;      // per study alpha
    double bic_alpha = kInf;
    double bic_mae = 0.0;
};

struct StudyResult {
    std::vector<std::string> row_labels;   // one per DGP
    std::vector<double> alpha_grid;
    MatrixXd table;                        // rows = DGP, cols = alpha grid + BIC; relative to alpha = inf
    MatrixXd mean_mae;                     // same layout, absolute
    std::vector<int> successes;            // per DGP
    std::vector<bool> flagged;             // < 80% of replications succeeded
    std::vector<std::vector<ReplicationResult>> raw;  // [dgp][replication]
    int replications = 0;
    int T_sim = 480;
    double exo_loading_sd = 0.2;
};

/// Median-IRF MAE over horizons 1..H, all shocks and variables.
inline double irf_mae(const PosteriorDraws& draws, const MatrixXd& truth, int p, int H) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < 3; ++j) {
        const IrfSet s = irf(draws, j, H, p);
        total += (s.median().bottomRows(H) - truth.block(1, 3 * j, H, 3)).cwiseAbs().sum();
    }
    return total / static_cast<double>(H * 9);
}

inline ReplicationResult run_replication(const StudyConfig& cfg, std::size_t dgp_index, int rep) {
    ReplicationResult out;
    try {
        DgpSpec spec = cfg.dgps[dgp_index];
        spec.T_sim = cfg.T_sim;
        spec.seed = rng::derive(cfg.seed, {dgp_index, static_cast<std::uint64_t>(rep), 1});
        const std::uint64_t draw_seed = rng::derive(cfg.seed, {dgp_index, static_cast<std::uint64_t>(rep), 2});
        const Dataset data = simulate_dgp(spec);
        const MatrixXd truth = true_irf(spec, cfg.H);
        const VarDesign design = build_design(data, cfg.p_est);
        const PriorBuilder builder(data, cfg.p_est);

        std::vector<double> all = cfg.alpha_grid;
        all.insert(all.end(), cfg.selection_grid.begin(), cfg.selection_grid.end());
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());

        std::vector<double> maes(all.size());
        std::vector<FitComplexity> fits(all.size());
        for (std::size_t a = 0; a < all.size(); ++a) {
            const AlphaFit f = fit_alpha(design, builder, cfg.lambda_grid, all[a], cfg.tau);
            fits[a] = f.fit;
            const PosteriorDraws draws = sample_posterior(f.posterior, cfg.n_draws, draw_seed);
            maes[a] = irf_mae(draws, truth, cfg.p_est, cfg.H);
        }
        auto index_of = [&](double alpha) {
            return static_cast<std::size_t>(std::find(all.begin(), all.end(), alpha) - all.begin());
        };
        for (double a : cfg.alpha_grid) out.mae.push_back(maes[index_of(a)]);
        AlphaGrid g;
        for (double a : cfg.selection_grid) {
            g.values.push_back(a);
            g.points.push_back(fits[index_of(a)]);
        }
        out.bic_alpha = select_alpha_knee(g);
        out.bic_mae = maes[index_of(out.bic_alpha)];
        out.ok = true;
    } catch (const Error& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

/// Relative IRF MAEs (cBVAR over the alpha = inf BVAR), averaged over
/// replications, for each design and alpha plus the knee-selected alpha.
inline StudyResult run_study(const StudyConfig& cfg) {
    if (cfg.replications < 1) throw ConfigError("replications must be at least 1");
    check_alpha_grid(cfg.alpha_grid);
    check_alpha_grid(cfg.selection_grid);
    if (!std::isinf(cfg.alpha_grid.back())) throw ConfigError("study alpha grid must contain inf as benchmark");
    const std::size_t n_dgp = cfg.dgps.size();
    const auto reps = static_cast<std::size_t>(cfg.replications);

    StudyResult res;
    res.alpha_grid = cfg.alpha_grid;
    res.replications = cfg.replications;
    res.T_sim = cfg.T_sim;
    for (const auto& d : cfg.dgps)
        if (d.mean_family == MeanFamily::EXO) res.exo_loading_sd = d.exo_loading_sd;
    res.raw.assign(n_dgp, std::vector<ReplicationResult>(reps));
    parallel_for(n_dgp * reps, cfg.threads, [&](std::size_t job) {
        const std::size_t d = job / reps;
        res.raw[d][job % reps] = run_replication(cfg, d, static_cast<int>(job % reps));
    });

    const Eigen::Index n_cols = static_cast<Eigen::Index>(cfg.alpha_grid.size()) + 1;
    res.table = MatrixXd::Constant(static_cast<Eigen::Index>(n_dgp), n_cols, std::nan(""));
    res.mean_mae = res.table;
    for (std::size_t d = 0; d < n_dgp; ++d) {
        res.row_labels.push_back(cfg.dgps[d].label());
        VectorXd sum = VectorXd::Zero(n_cols);
        int ok = 0;
        for (const auto& r : res.raw[d]) {
            if (!r.ok) continue;
            ++ok;
            for (std::size_t a = 0; a < r.mae.size(); ++a) sum(static_cast<Eigen::Index>(a)) += r.mae[a];
            sum(n_cols - 1) += r.bic_mae;
        }
        res.successes.push_back(ok);
        res.flagged.push_back(ok < static_cast<int>(std::ceil(0.8 * static_cast<double>(reps))));
        if (ok == 0) continue;
        const VectorXd mean = sum / static_cast<double>(ok);
        const double bench = mean(n_cols - 2);
        res.mean_mae.row(static_cast<Eigen::Index>(d)) = mean.transpose();
        res.table.row(static_cast<Eigen::Index>(d)) = (mean / bench).transpose();
        res.table(static_cast<Eigen::Index>(d), n_cols - 2) = 1.0;
    }
    return res;
}

/// Table-1-shaped CSV: one row per (mean family, shock family), one column
/// per alpha plus BIC.
inline void write_study_table(const StudyResult& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "# benchmark: IRF MAE of the alpha=inf BVAR (relative MAE = cBVAR / BVAR), averaged over "
        << r.replications << " replications\n";
    out << "# simulation: T=" << r.T_sim
        << " after 100 burn-in, t3 shocks on all components, independent SV per shock, EXO loadings N(0,"
        << r.exo_loading_sd << "^2)\n";
    out << "mean_family,shock_family";
    for (double a : r.alpha_grid) out << ',' << alpha_label(a);
    out << ",BIC,replications_ok,flagged\n";
    for (Eigen::Index d = 0; d < r.table.rows(); ++d) {
        const auto& lab = r.row_labels[static_cast<std::size_t>(d)];
        const auto slash = lab.find('/');
        out << lab.substr(0, slash) << ',' << lab.substr(slash + 1);
        for (Eigen::Index c = 0; c < r.table.cols(); ++c) out << ',' << csv::num(r.table(d, c));
        out << ',' << r.successes[static_cast<std::size_t>(d)] << ','
            << (r.flagged[static_cast<std::size_t>(d)] ? "yes" : "no") << '\n';
    }
}

/// Companion CSV with each replication's raw MAEs.
inline void write_study_raw(const StudyResult& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "# raw IRF MAEs per replication (median IRF vs truth, horizons 1..12, all shocks and variables)\n";
    out << "mean_family,shock_family,replication,alpha,mae\n";
    for (std::size_t d = 0; d < r.raw.size(); ++d) {
        const auto& lab = r.row_labels[d];
        const auto slash = lab.find('/');
        const std::string prefix = lab.substr(0, slash) + ',' + lab.substr(slash + 1) + ',';
        for (std::size_t rep = 0; rep < r.raw[d].size(); ++rep) {
            const auto& x = r.raw[d][rep];
            if (!x.ok) {
                out << prefix << rep << ",error,nan\n";
                continue;
            }
            for (std::size_t a = 0; a < x.mae.size(); ++a)
                out << prefix << rep << ',' << alpha_label(r.alpha_grid[a]) << ',' << csv::num(x.mae[a]) << '\n';
            out << prefix << rep << ",BIC=" << alpha_label(x.bic_alpha) << ',' << csv::num(x.bic_mae) << '\n';
        }
    }
}

}  // namespace cbvar
