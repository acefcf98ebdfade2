#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbvar/dataset.hpp"
#include "cbvar/error.hpp"
#include "cbvar/linalg.hpp"

namespace cbvar {

/// Stacked VAR(p) regression Y = X A + E. Row t of X is
/// (1, y'_{t-1}, ..., y'_{t-p}).
struct VarDesign {
    MatrixXd Y;  // T x M
    MatrixXd X;  // T x K, K = p M + 1
    int p = 1;
    std::vector<std::string> var_names;

    Eigen::Index T_effective() const { return Y.rows(); }
    Eigen::Index M() const { return Y.cols(); }
    Eigen::Index K() const { return X.cols(); }
};

/// Lagged regressors built from the last `p` rows of `history` (oldest
/// first): (1, y'_{t-1}, ..., y'_{t-p}).
inline VectorXd regressor_row(const MatrixXd& history, int p) {
    const Eigen::Index m = history.cols();
    const Eigen::Index n = history.rows();
    VectorXd x(1 + p * m);
    x(0) = 1.0;
    for (int l = 1; l <= p; ++l) x.segment(1 + (l - 1) * m, m) = history.row(n - l).transpose();
    return x;
}

inline VarDesign build_design(const MatrixXd& values, int p, std::vector<std::string> names = {},
                              const std::vector<YearMonth>* dates = nullptr) {
    if (p < 1) throw ConfigError("lag order must be positive");
    const Eigen::Index rows = values.rows();
    const Eigen::Index m = values.cols();
    if (rows < p + 2)
        throw DataError("too few observations: " + std::to_string(rows) + " rows for " +
                        std::to_string(p) + " lags (need at least " + std::to_string(p + 2) + ")");
    if (names.empty())
        for (Eigen::Index j = 0; j < m; ++j) names.push_back("y" + std::to_string(j + 1));
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index t = 0; t < rows; ++t)
            if (!std::isfinite(values(t, j)))
                throw DataError("missing value for " + names[static_cast<std::size_t>(j)] + " at " +
                                (dates ? (*dates)[static_cast<std::size_t>(t)].str()
                                       : "row " + std::to_string(t)));
    VarDesign d;
    d.p = p;
    d.var_names = std::move(names);
    const Eigen::Index T = rows - p;
    d.Y = values.bottomRows(T);
    d.X.resize(T, 1 + p * m);
    d.X.col(0).setOnes();
    for (int l = 1; l <= p; ++l) d.X.block(0, 1 + (l - 1) * m, T, m) = values.middleRows(p - l, T);
    return d;
}

inline VarDesign build_design(const Dataset& data, int p) {
    return build_design(data.values, p, data.names, &data.dates);
}

/// Tempering weight zeta = alpha / (alpha + T); exactly 1 for alpha = inf.
struct LearningRate {
    double alpha = std::numeric_limits<double>::infinity();
    double zeta = 1.0;
    double T = 0.0;

    bool uncoarsened() const { return std::isinf(alpha); }
};

inline LearningRate learning_rate(double alpha, double T) {
    if (!(alpha > 0.0)) throw ConfigError("coarsening parameter alpha must be positive");
    if (!(T >= 1.0)) throw ConfigError("sample size must be at least 1");
    if (std::isinf(alpha)) return {alpha, 1.0, T};
    return {alpha, alpha / (alpha + T), T};
}

inline LearningRate learning_rate(double alpha, const VarDesign& design) {
    return learning_rate(alpha, static_cast<double>(design.T_effective()));
}

/// Natural-conjugate Normal-inverse-Wishart prior
///   vec(A) | Sigma ~ N(vec(A_mean), Sigma (x) V),  Sigma ~ IW(v, S).
/// `precision` holds V^{-1}; it is diagonal until dummy observations are
/// folded in. Pending dummy rows (dummy_X, dummy_Y) act as extra, untempered
/// observations.
struct PriorSpec {
    MatrixXd A_mean;     // K x M
    VectorXd V_diag;     // Minnesota variances, K
    MatrixXd precision;  // K x K, V^{-1}
    MatrixXd S;          // M x M
    double v = 0.0;
    double lambda = 0.0;
    double kappa = 0.0;
    double xi = 0.0;
    VectorXd sigma_hat;  // per-variable AR(p) residual scale
    VectorXd mu_bar;     // per-variable mean of the first p observations
    MatrixXd dummy_Y;    // D x M
    MatrixXd dummy_X;    // D x K

    Eigen::Index K() const { return A_mean.rows(); }
    Eigen::Index M() const { return A_mean.cols(); }
    bool has_dummies() const { return dummy_X.rows() > 0; }
};

/// Cross-product sufficient statistics of a regression.
struct SufficientStats {
    MatrixXd XtX;
    MatrixXd XtY;
    MatrixXd YtY;
    double T = 0.0;

    static SufficientStats from(const MatrixXd& X, const MatrixXd& Y) {
        SufficientStats s;
        s.XtX = X.transpose() * X;
        s.XtY = X.transpose() * Y;
        s.YtY = Y.transpose() * Y;
        s.T = static_cast<double>(X.rows());
        return s;
    }
    static SufficientStats from(const VarDesign& d) { return from(d.X, d.Y); }

    SufficientStats scaled(double zeta) const {
        return {zeta * XtX, zeta * XtY, zeta * YtY, zeta * T};
    }
};

/// Posterior moments of the (coarsened) conjugate VAR.
struct CoarsenedPosterior {
    MatrixXd A_bar;  // K x M
    MatrixXd V_bar;  // K x K
    MatrixXd S_bar;  // M x M
    double df = 0.0;
    double zeta = 1.0;
    double lambda = 0.0;
    double logdet_V_bar = 0.0;
    double logdet_S_bar = 0.0;
    bool jittered = false;  // S_bar needed the diagonal jitter retry

    Eigen::Index K() const { return A_bar.rows(); }
    Eigen::Index M() const { return A_bar.cols(); }
};

namespace detail {

/// Conjugate update of a dummy-free prior with (already weighted) statistics.
/// Uses the Cholesky factor L of P = XtX + V^{-1}: with W = L^{-1} B,
/// A_bar = L^{-T} W and S_bar = C - W'W (Schur complement of the augmented
/// Gram matrix), where B = XtY + V^{-1} A_mean and
/// C = YtY + A_mean' V^{-1} A_mean + S.
struct ConjugateUpdate {
    Eigen::LLT<MatrixXd> P_llt;
    MatrixXd P;
    MatrixXd A_bar;
    MatrixXd S_bar;
    bool jittered = false;
};

inline ConjugateUpdate conjugate_update(const SufficientStats& stats, const PriorSpec& prior) {
    ConjugateUpdate u;
    u.P = linalg::symmetrize(stats.XtX + prior.precision);
    u.P_llt = linalg::checked_llt(u.P, "posterior precision");
    const MatrixXd prec_mean = prior.precision * prior.A_mean;
    const MatrixXd B = stats.XtY + prec_mean;
    const MatrixXd W = u.P_llt.matrixL().solve(B);
    u.A_bar = u.P_llt.matrixU().solve(W);
    MatrixXd C = stats.YtY + prior.A_mean.transpose() * prec_mean + prior.S;
    u.S_bar = linalg::symmetrize(C - W.transpose() * W);
    return u;
}

inline void check_prior(const PriorSpec& prior) {
    if (prior.precision.rows() != prior.K() || prior.precision.cols() != prior.K())
        throw ConfigError("prior precision must be K x K");
    if (prior.S.rows() != prior.M() || prior.S.cols() != prior.M())
        throw ConfigError("prior scale S must be M x M");
    if (!(prior.v > static_cast<double>(prior.M()) - 1.0))
        throw NumericError("prior degrees of freedom must exceed M - 1");
}

}  // namespace detail

/// Folds dummy observations into the prior: the result, used with any data,
/// yields the same posterior moments as stacking the dummy rows above the
/// data with unit weight. Degrees of freedom are not changed by dummies.
inline PriorSpec fold_dummies(const PriorSpec& prior) {
    if (!prior.has_dummies()) return prior;
    if (prior.dummy_X.cols() != prior.K() || prior.dummy_Y.cols() != prior.M() ||
        prior.dummy_X.rows() != prior.dummy_Y.rows())
        throw ConfigError("dummy observation blocks do not conform to the prior dimensions");
    PriorSpec base = prior;
    base.dummy_X.resize(0, prior.K());
    base.dummy_Y.resize(0, prior.M());
    const auto u = detail::conjugate_update(SufficientStats::from(prior.dummy_X, prior.dummy_Y), base);
    PriorSpec out = std::move(base);
    out.precision = u.P;
    out.A_mean = u.A_bar;
    out.S = u.S_bar;
    return out;
}

/// Conjugate posterior for pre-weighted sufficient statistics; `zeta` is
/// only recorded. df = v + stats.T.
inline CoarsenedPosterior conjugate_posterior(const SufficientStats& stats, const PriorSpec& prior_in,
                                              double zeta = 1.0) {
    const PriorSpec prior = fold_dummies(prior_in);
    detail::check_prior(prior);
    if (stats.XtX.rows() != prior.K() || stats.XtY.cols() != prior.M())
        throw ConfigError("data dimensions do not match the prior (K=" + std::to_string(prior.K()) +
                          ", M=" + std::to_string(prior.M()) + ")");
    auto u = detail::conjugate_update(stats, prior);
    CoarsenedPosterior post;
    post.A_bar = std::move(u.A_bar);
    post.V_bar = u.P_llt.solve(MatrixXd::Identity(prior.K(), prior.K()));
    post.V_bar = linalg::symmetrize(post.V_bar);
    post.logdet_V_bar = -linalg::logdet(u.P_llt);
    post.S_bar = std::move(u.S_bar);
    const auto S_llt = linalg::llt_with_jitter(post.S_bar, "posterior scale S_bar", &post.jittered);
    post.logdet_S_bar = linalg::logdet(S_llt);
    post.df = prior.v + stats.T;
    post.zeta = zeta;
    post.lambda = prior.lambda;
    return post;
}

/// Posterior under the tempered likelihood prod_t p(y_t | A, Sigma)^zeta.
inline CoarsenedPosterior coarsened_posterior(const VarDesign& design, const PriorSpec& prior,
                                              const LearningRate& rate) {
    return conjugate_posterior(SufficientStats::from(design).scaled(rate.zeta), prior, rate.zeta);
}

/// log of the coarsened marginal likelihood with all normalizing constants:
///   (M/2)(log|V_bar| - log|V|) + (v/2) log|S| - (df/2) log|S_bar|
///   + log Gamma_M(df/2) - log Gamma_M(v/2) - (zeta T M / 2) log pi.
/// With dummy observations the prior is folded first, so the value is the
/// marginal likelihood of the actual data given the dummy-augmented prior.
inline double log_marginal_likelihood(const PriorSpec& prior_in, const CoarsenedPosterior& post,
                                      double zeta_T) {
    const PriorSpec prior = fold_dummies(prior_in);
    const auto M = static_cast<double>(prior.M());
    const auto P_llt = linalg::checked_llt(prior.precision, "prior precision");
    const double logdet_V = -linalg::logdet(P_llt);
    MatrixXd S = prior.S;
    const double logdet_S = linalg::logdet(linalg::checked_llt(S, "prior scale S"));
    return 0.5 * M * (post.logdet_V_bar - logdet_V) + 0.5 * prior.v * logdet_S -
           0.5 * post.df * post.logdet_S_bar + linalg::log_multigamma(0.5 * post.df, prior.M()) -
           linalg::log_multigamma(0.5 * prior.v, prior.M()) - 0.5 * zeta_T * M * std::log(std::numbers::pi);
}

inline double log_marginal_likelihood(const VarDesign& design, const PriorSpec& prior,
                                      const LearningRate& rate) {
    const PriorSpec folded = fold_dummies(prior);
    const auto post = coarsened_posterior(design, folded, rate);
    return log_marginal_likelihood(folded, post, rate.zeta * static_cast<double>(design.T_effective()));
}

/// Model fit (Gaussian log-likelihood at the posterior mean) and complexity
/// (count of coefficients with |a| < tau) for one alpha.
struct FitComplexity {
    double alpha = std::numeric_limits<double>::infinity();
    double mf = 0.0;
    Eigen::Index mc = 0;
    double tau = 0.01;
};

inline FitComplexity fit_complexity(const VarDesign& design, const CoarsenedPosterior& post,
                                    const LearningRate& rate, double tau = 0.01) {
    const auto M = post.M();
    const double denom = post.df - static_cast<double>(M) - 1.0;
    if (!(denom > 0.0))
        throw NumericError("posterior mean of Sigma undefined: df - M - 1 = " + std::to_string(denom));
    const MatrixXd Sigma = post.S_bar / denom;
    const auto L = linalg::checked_llt(Sigma, "posterior mean of Sigma");
    const MatrixXd E = design.Y - design.X * post.A_bar;
    const MatrixXd Z = L.matrixL().solve(E.transpose());
    const auto T = static_cast<double>(design.T_effective());
    FitComplexity fc;
    fc.alpha = rate.alpha;
    fc.tau = tau;
    fc.mf = -0.5 * T * static_cast<double>(M) * std::log(2.0 * std::numbers::pi) - 0.5 * T * linalg::logdet(L) -
            0.5 * Z.squaredNorm();
    fc.mc = (post.A_bar.array().abs() < tau).count();
    return fc;
}

}  // namespace cbvar
