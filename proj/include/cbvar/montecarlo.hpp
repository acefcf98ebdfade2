#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cbvar/core.hpp"
#include "cbvar/csv.hpp"
#include "cbvar/error.hpp"
#include "cbvar/linalg.hpp"
#include "cbvar/parallel.hpp"
#include "cbvar/rng.hpp"

namespace cbvar {

/// Joint draws (A, Sigma) from the conjugate posterior. Draw i uses its own
/// RNG stream derived from (seed, i).
struct PosteriorDraws {
    std::vector<MatrixXd> A;            // K x M each
    std::vector<MatrixXd> Sigma;        // M x M each
    std::vector<MatrixXd> Sigma_chol;   // lower Cholesky factor of each Sigma
    std::uint64_t seed = 0;
    CoarsenedPosterior source;

    std::size_t n_draws() const { return A.size(); }
};

/// Bartlett factor for a Wishart with real-valued degrees of freedom:
/// lower-triangular B with B_ii^2 ~ chi2(df - i) (Gamma((df - i)/2, 2)) and
/// standard normal entries below the diagonal.
inline MatrixXd bartlett_factor(Eigen::Index m, double df, Rng& rng) {
    MatrixXd B = MatrixXd::Zero(m, m);
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < m; ++i) {
        std::gamma_distribution<double> chi2(0.5 * (df - static_cast<double>(i)), 2.0);
        B(i, i) = std::sqrt(chi2(rng));
        for (Eigen::Index j = 0; j < i; ++j) B(i, j) = normal(rng);
    }
    return B;
}

/// One inverse-Wishart draw Sigma ~ IW(df, S) given the lower Cholesky
/// factor C of S: Sigma^{-1} = C^{-T} B B' C^{-1} ~ W(df, S^{-1}), hence
/// Sigma = (C B^{-T}) (C B^{-T})'.
inline MatrixXd inverse_wishart_draw(const MatrixXd& S_chol, double df, Rng& rng) {
    const Eigen::Index m = S_chol.rows();
    const MatrixXd B = bartlett_factor(m, df, rng);
    const MatrixXd Bt_inv = B.transpose().triangularView<Eigen::Upper>().solve(MatrixXd::Identity(m, m));
    const MatrixXd F = S_chol * Bt_inv;
    return linalg::symmetrize(F * F.transpose());
}

inline PosteriorDraws sample_posterior(const CoarsenedPosterior& post, std::size_t n_draws, std::uint64_t seed,
                                       unsigned threads = 1) {
    const Eigen::Index K = post.K(), M = post.M();
    if (!(post.df > static_cast<double>(M) - 1.0))
        throw NumericError("inverse-Wishart degrees of freedom " + std::to_string(post.df) +
                           " must exceed M - 1");
    if (n_draws < 1) throw ConfigError("number of draws must be at least 1");
    const MatrixXd S_chol = linalg::checked_llt(post.S_bar, "posterior scale S_bar").matrixL();
    const MatrixXd V_chol = linalg::checked_llt(post.V_bar, "posterior covariance V_bar").matrixL();
    PosteriorDraws d;
    d.seed = seed;
    d.source = post;
    d.A.resize(n_draws);
    d.Sigma.resize(n_draws);
    d.Sigma_chol.resize(n_draws);
    parallel_for(n_draws, threads, [&](std::size_t i) {
        Rng rng = rng::stream(seed, {i});
        MatrixXd Sigma = inverse_wishart_draw(S_chol, post.df, rng);
        Eigen::LLT<MatrixXd> llt(Sigma);
        if (llt.info() != Eigen::Success) throw NumericError("inverse-Wishart draw is not positive definite");
        MatrixXd Z(K, M);
        std::normal_distribution<double> normal;
        for (Eigen::Index c = 0; c < M; ++c)
            for (Eigen::Index r = 0; r < K; ++r) Z(r, c) = normal(rng);
        MatrixXd L = llt.matrixL();
        d.A[i] = post.A_bar + V_chol.triangularView<Eigen::Lower>() * Z * L.transpose();
        d.Sigma[i] = std::move(Sigma);
        d.Sigma_chol[i] = std::move(L);
    });
    return d;
}

/// Predictive simulation output for the requested horizons.
struct ForecastResult {
    std::vector<int> horizons;
    std::vector<std::string> names;
    MatrixXd point;              // horizons x M, cross-draw median
    std::vector<MatrixXd> draws; // per horizon: n_draws x M
};

/// Simulates y_{T+h} = A' x_{T+h} + chol(Sigma) eta forward from `history`
/// (at least p rows, oldest first) for every posterior draw.
inline ForecastResult forecast(const PosteriorDraws& draws, const MatrixXd& history, int p,
                               std::vector<int> horizons, std::uint64_t seed, unsigned threads = 1,
                               std::vector<std::string> names = {}) {
    if (horizons.empty()) throw ConfigError("no forecast horizons requested");
    std::sort(horizons.begin(), horizons.end());
    horizons.erase(std::unique(horizons.begin(), horizons.end()), horizons.end());
    if (horizons.front() < 1) throw ConfigError("forecast horizons must be at least 1");
    if (history.rows() < p) throw DataError("forecast history has fewer rows than lags");
    if (draws.n_draws() == 0) throw ConfigError("no posterior draws");
    const Eigen::Index M = draws.A.front().cols();
    if (history.cols() != M || draws.A.front().rows() != 1 + p * M)
        throw ConfigError("forecast history does not match the model dimensions");
    const int H = horizons.back();
    const std::size_t n = draws.n_draws();

    ForecastResult r;
    r.horizons = horizons;
    r.names = std::move(names);
    if (r.names.empty())
        for (Eigen::Index j = 0; j < M; ++j) r.names.push_back("y" + std::to_string(j + 1));
    r.draws.assign(horizons.size(), MatrixXd(static_cast<Eigen::Index>(n), M));

    parallel_for(n, threads, [&](std::size_t i) {
        Rng rng = rng::stream(seed, {i});
        std::normal_distribution<double> normal;
        MatrixXd path(p + H, M);
        path.topRows(p) = history.bottomRows(p);
        VectorXd eta(M);
        std::size_t next = 0;
        for (int h = 1; h <= H; ++h) {
            const VectorXd x = regressor_row(path.topRows(p + h - 1), p);
            for (Eigen::Index j = 0; j < M; ++j) eta(j) = normal(rng);
            path.row(p + h - 1) =
                (draws.A[i].transpose() * x + draws.Sigma_chol[i].triangularView<Eigen::Lower>() * eta).transpose();
            if (next < horizons.size() && horizons[next] == h) {
                r.draws[next].row(static_cast<Eigen::Index>(i)) = path.row(p + h - 1);
                ++next;
            }
        }
    });

    r.point.resize(static_cast<Eigen::Index>(horizons.size()), M);
    std::vector<double> buf(n);
    for (std::size_t k = 0; k < horizons.size(); ++k)
        for (Eigen::Index j = 0; j < M; ++j) {
            for (std::size_t i = 0; i < n; ++i) buf[i] = r.draws[k](static_cast<Eigen::Index>(i), j);
            r.point(static_cast<Eigen::Index>(k), j) = linalg::median(buf);
        }
    return r;
}

struct ForecastScore {
    int horizon = 1;
    Eigen::Index variable = 0;
    double realized = 0.0;
    double point = 0.0;
    double abs_error = 0.0;
    double lpl = 0.0;
};

/// Univariate Gaussian log density.
inline double normal_logpdf(double x, double mean, double var) {
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + (x - mean) * (x - mean) / var);
}

/// Absolute error of the median and moment-matched Gaussian log predictive
/// likelihood for each focus variable at every horizon h <= realized.rows().
/// `realized` row h-1 holds the outcome h steps ahead.
inline std::vector<ForecastScore> score_forecasts(const ForecastResult& result, const MatrixXd& realized,
                                                  const std::vector<Eigen::Index>& focus) {
    std::vector<ForecastScore> out;
    for (std::size_t k = 0; k < result.horizons.size(); ++k) {
        const int h = result.horizons[k];
        if (h > realized.rows()) continue;
        const MatrixXd& d = result.draws[k];
        for (Eigen::Index j : focus) {
            if (j < 0 || j >= d.cols()) throw ConfigError("focus variable index out of range");
            const double y = realized(h - 1, j);
            if (!std::isfinite(y))
                throw DataError("realized value missing for " + result.names[static_cast<std::size_t>(j)] +
                                " at h=" + std::to_string(h));
            const auto n = static_cast<double>(d.rows());
            const double mean = d.col(j).mean();
            const double var = n > 1 ? (d.col(j).array() - mean).square().sum() / (n - 1.0) : 0.0;
            if (!(var > 0.0))
                throw NumericError("degenerate predictive density (zero variance) for " +
                                   result.names[static_cast<std::size_t>(j)] + " at h=" + std::to_string(h));
            ForecastScore s;
            s.horizon = h;
            s.variable = j;
            s.realized = y;
            s.point = result.point(static_cast<Eigen::Index>(k), j);
            s.abs_error = std::abs(s.point - y);
            s.lpl = normal_logpdf(y, mean, var);
            out.push_back(s);
        }
    }
    return out;
}

/// Cross-draw quantiles of recursively identified impulse responses.
struct IrfSet {
    int H = 0;
    Eigen::Index shock = 0;
    std::vector<std::string> names;
    std::vector<double> levels{0.05, 0.16, 0.50, 0.84, 0.95};
    std::vector<MatrixXd> quantiles;  // per level: (H+1) x M
    std::size_t draws_used = 0;

    const MatrixXd& median() const { return quantiles[2]; }
};

/// Responses to `impact` (column of chol(Sigma)) for horizons 0..H, using the
/// companion-form recursion r_h = sum_{l=1}^{min(h,p)} A_l r_{h-l}, which is
/// the top block of companion^h applied to (impact, 0, ..., 0).
inline MatrixXd impulse_path(const MatrixXd& A, const VectorXd& impact, int p, int H) {
    const Eigen::Index M = A.cols();
    MatrixXd r(H + 1, M);
    r.row(0) = impact.transpose();
    for (int h = 1; h <= H; ++h) {
        VectorXd acc = VectorXd::Zero(M);
        for (int l = 1; l <= std::min(h, p); ++l)
            acc.noalias() += A.block(1 + (l - 1) * M, 0, M, M).transpose() * r.row(h - l).transpose();
        r.row(h) = acc.transpose();
    }
    return r;
}

/// Companion matrix of the lag coefficients (intercept row dropped).
inline MatrixXd companion_matrix(const MatrixXd& A, int p) {
    const Eigen::Index M = A.cols();
    MatrixXd C = MatrixXd::Zero(M * p, M * p);
    for (int l = 1; l <= p; ++l) C.block(0, (l - 1) * M, M, M) = A.block(1 + (l - 1) * M, 0, M, M).transpose();
    if (p > 1) C.block(M, 0, M * (p - 1), M * (p - 1)).setIdentity();
    return C;
}

inline IrfSet irf(const PosteriorDraws& draws, Eigen::Index shock, int H, int p,
                  std::vector<std::string> names = {}) {
    if (draws.n_draws() == 0) throw ConfigError("no posterior draws");
    const Eigen::Index M = draws.A.front().cols();
    if (shock < 0 || shock >= M) throw ConfigError("shock index out of range");
    if (H < 0) throw ConfigError("IRF horizon must be non-negative");
    if (draws.A.front().rows() != 1 + p * M) throw ConfigError("lag order does not match the draws");
    const std::size_t n = draws.n_draws();
    std::vector<MatrixXd> paths(n);
    for (std::size_t i = 0; i < n; ++i)
        paths[i] = impulse_path(draws.A[i], draws.Sigma_chol[i].col(shock), p, H);

    IrfSet out;
    out.H = H;
    out.shock = shock;
    out.names = std::move(names);
    if (out.names.empty())
        for (Eigen::Index j = 0; j < M; ++j) out.names.push_back("y" + std::to_string(j + 1));
    out.draws_used = n;
    out.quantiles.assign(out.levels.size(), MatrixXd(H + 1, M));
    std::vector<double> buf(n);
    for (int h = 0; h <= H; ++h)
        for (Eigen::Index j = 0; j < M; ++j) {
            for (std::size_t i = 0; i < n; ++i) buf[i] = paths[i](h, j);
            std::sort(buf.begin(), buf.end());
            for (std::size_t q = 0; q < out.levels.size(); ++q)
                out.quantiles[q](h, j) = linalg::quantile_sorted(buf, out.levels[q]);
        }
    return out;
}

inline std::string quantile_label(double level) {
    const int pct = static_cast<int>(std::lround(level * 100.0));
    return std::string("q") + (pct < 10 ? "0" : "") + std::to_string(pct);
}

/// Rows "horizon,variable,statistic,value" for an IRF set.
inline void write_irf_rows(std::ostream& out, const IrfSet& s, const std::string& prefix = "") {
    for (int h = 0; h <= s.H; ++h)
        for (std::size_t j = 0; j < s.names.size(); ++j)
            for (std::size_t q = 0; q < s.levels.size(); ++q)
                out << prefix << h << ',' << s.names[j] << ',' << quantile_label(s.levels[q]) << ','
                    << csv::num(s.quantiles[q](h, static_cast<Eigen::Index>(j))) << '\n';
}

inline void write_irf_csv(const IrfSet& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "# impulse responses to a one-standard-deviation shock in " << s.names[static_cast<std::size_t>(s.shock)]
        << " (recursive identification), " << s.draws_used << " draws\n";
    out << "horizon,variable,statistic,value\n";
    write_irf_rows(out, s);
}

inline nlohmann::json to_json(const IrfSet& s) {
    nlohmann::json j;
    j["shock"] = s.names[static_cast<std::size_t>(s.shock)];
    j["shock_index"] = s.shock;
    j["horizons"] = s.H + 1;
    j["draws_used"] = s.draws_used;
    j["variables"] = s.names;
    for (std::size_t q = 0; q < s.levels.size(); ++q) {
        nlohmann::json rows = nlohmann::json::array();
        for (int h = 0; h <= s.H; ++h) {
            std::vector<double> row(s.names.size());
            for (std::size_t v = 0; v < s.names.size(); ++v) row[v] = s.quantiles[q](h, static_cast<Eigen::Index>(v));
            rows.push_back(row);
        }
        j["quantiles"][quantile_label(s.levels[q])] = rows;
    }
    return j;
}

/// Rows "horizon,variable,statistic,value" with median, mean and sd of the
/// predictive draws.
inline void write_forecast_csv(const ForecastResult& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "# predictive distribution summaries from " << (r.draws.empty() ? 0 : r.draws.front().rows())
        << " draws\n";
    out << "horizon,variable,statistic,value\n";
    for (std::size_t k = 0; k < r.horizons.size(); ++k)
        for (std::size_t j = 0; j < r.names.size(); ++j) {
            const auto col = r.draws[k].col(static_cast<Eigen::Index>(j));
            const double mean = col.mean();
            const double sd = std::sqrt((col.array() - mean).square().sum() / std::max<double>(1.0, col.size() - 1.0));
            out << r.horizons[k] << ',' << r.names[j] << ",median," << csv::num(r.point(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j))) << '\n';
            out << r.horizons[k] << ',' << r.names[j] << ",mean," << csv::num(mean) << '\n';
            out << r.horizons[k] << ',' << r.names[j] << ",sd," << csv::num(sd) << '\n';
        }
}

inline nlohmann::json to_json(const ForecastResult& r) {
    nlohmann::json j;
    j["horizons"] = r.horizons;
    j["variables"] = r.names;
    nlohmann::json pts = nlohmann::json::array();
    for (Eigen::Index k = 0; k < r.point.rows(); ++k) {
        std::vector<double> row(static_cast<std::size_t>(r.point.cols()));
        for (Eigen::Index v = 0; v < r.point.cols(); ++v) row[static_cast<std::size_t>(v)] = r.point(k, v);
        pts.push_back(row);
    }
    j["median"] = pts;
    return j;
}

}  // namespace cbvar
