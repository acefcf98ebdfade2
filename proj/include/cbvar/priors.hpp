#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbvar/core.hpp"
#include "cbvar/dataset.hpp"
#include "cbvar/error.hpp"

namespace cbvar {

struct MinnesotaOptions {
    double own_lag_mean = 1.0;          // 1 = random walk, 0 = white noise
    double intercept_variance = 1e6;
    bool sum_of_coefficients = true;
    bool single_unit_root = true;
    double dummy_multiplier = 10.0;     // kappa = xi = multiplier * lambda
    std::optional<VectorXd> sigma_hat;  // skip the AR(p) scale estimates
};

/// Residual standard error of a least-squares AR(p) with intercept fitted
/// to one series: sqrt(RSS / (n - p - 1)) over the n = T - p usable rows.
inline double ar_residual_scale(const VectorXd& y, int p, const std::string& name = "series") {
    const Eigen::Index T = y.size();
    const Eigen::Index n = T - p;
    if (n - p - 1 < 1)
        throw DataError("too few observations to fit an AR(" + std::to_string(p) + ") scale for " + name);
    const double mean = y.mean();
    if ((y.array() - mean).abs().maxCoeff() == 0.0)
        throw DataError("degenerate series (zero variance): " + name);
    MatrixXd X(n, p + 1);
    X.col(0).setOnes();
    for (int l = 1; l <= p; ++l) X.col(l) = y.segment(p - l, n);
    const VectorXd target = y.tail(n);
    const VectorXd beta = X.colPivHouseholderQr().solve(target);
    const double rss = (target - X * beta).squaredNorm();
    const double s = std::sqrt(rss / static_cast<double>(n - p - 1));
    if (!(s > 0.0) || !std::isfinite(s))
        throw DataError("degenerate series (AR residual scale is zero): " + name);
    return s;
}

/// Data-dependent pieces of the Minnesota prior, computed once and reused
/// for every lambda on a grid.
class PriorBuilder {
public:
    PriorBuilder(const MatrixXd& values, int p, std::vector<std::string> names = {},
                 MinnesotaOptions options = {})
        : p_(p), m_(values.cols()), options_(std::move(options)) {
        if (p < 1) throw ConfigError("lag order must be positive");
        if (values.rows() < p) throw DataError("fewer observations than lags");
        if (names.empty())
            for (Eigen::Index j = 0; j < m_; ++j) names.push_back("y" + std::to_string(j + 1));
        if (options_.sigma_hat) {
            if (options_.sigma_hat->size() != m_) throw ConfigError("sigma_hat override has wrong length");
            if (!(options_.sigma_hat->array() > 0.0).all()) throw ConfigError("sigma_hat must be positive");
            sigma_hat_ = *options_.sigma_hat;
        } else {
            sigma_hat_.resize(m_);
            for (Eigen::Index j = 0; j < m_; ++j)
                sigma_hat_(j) = ar_residual_scale(values.col(j), p, names[static_cast<std::size_t>(j)]);
        }
        mu_bar_ = values.topRows(p).colwise().mean().transpose();
    }

    PriorBuilder(const Dataset& data, int p, MinnesotaOptions options = {})
        : PriorBuilder(data.values, p, data.names, std::move(options)) {}

    /// Prior with kappa = xi = multiplier * lambda.
    PriorSpec operator()(double lambda) const {
        return build(lambda, options_.dummy_multiplier * lambda, options_.dummy_multiplier * lambda);
    }

    PriorSpec build(double lambda, double kappa, double xi) const {
        if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
        if (!(kappa > 0.0) || !(xi > 0.0)) throw ConfigError("kappa and xi must be positive");
        const Eigen::Index K = 1 + p_ * m_;
        PriorSpec s;
        s.lambda = lambda;
        s.kappa = kappa;
        s.xi = xi;
        s.sigma_hat = sigma_hat_;
        s.mu_bar = mu_bar_;
        s.A_mean = MatrixXd::Zero(K, m_);
        s.A_mean.block(1, 0, m_, m_).diagonal().setConstant(options_.own_lag_mean);
        s.V_diag.resize(K);
        s.V_diag(0) = options_.intercept_variance;
        for (int l = 1; l <= p_; ++l)
            for (Eigen::Index j = 0; j < m_; ++j)
                s.V_diag(1 + (l - 1) * m_ + j) =
                    lambda * lambda / (static_cast<double>(l * l) * sigma_hat_(j) * sigma_hat_(j));
        s.precision = s.V_diag.cwiseInverse().asDiagonal();
        s.S = sigma_hat_.array().square().matrix().asDiagonal();
        s.v = static_cast<double>(m_) + 2.0;

        const Eigen::Index rows =
            (options_.sum_of_coefficients ? m_ : 0) + (options_.single_unit_root ? 1 : 0);
        s.dummy_Y = MatrixXd::Zero(rows, m_);
        s.dummy_X = MatrixXd::Zero(rows, K);
        Eigen::Index r = 0;
        if (options_.sum_of_coefficients) {
            for (Eigen::Index j = 0; j < m_; ++j, ++r) {
                const double val = options_.own_lag_mean * mu_bar_(j) / kappa;
                s.dummy_Y(r, j) = val;
                for (int l = 1; l <= p_; ++l) s.dummy_X(r, 1 + (l - 1) * m_ + j) = val;
            }
        }
        if (options_.single_unit_root) {
            s.dummy_Y.row(r) = mu_bar_.transpose() / xi;
            s.dummy_X(r, 0) = 1.0 / xi;
            for (int l = 1; l <= p_; ++l) s.dummy_X.block(r, 1 + (l - 1) * m_, 1, m_) = mu_bar_.transpose() / xi;
        }
        return s;
    }

    int p() const { return p_; }
    const VectorXd& sigma_hat() const { return sigma_hat_; }
    const VectorXd& mu_bar() const { return mu_bar_; }
    const MinnesotaOptions& options() const { return options_; }

private:
    int p_;
    Eigen::Index m_;
    MinnesotaOptions options_;
    VectorXd sigma_hat_;
    VectorXd mu_bar_;
};

/// Minnesota prior with sum-of-coefficients and single-unit-root dummies.
/// kappa and xi default to 10 * lambda.
inline PriorSpec minnesota_prior(const Dataset& data, int p, double lambda,
                                 std::optional<double> kappa = std::nullopt,
                                 std::optional<double> xi = std::nullopt, MinnesotaOptions options = {}) {
    const double mult = options.dummy_multiplier;
    PriorBuilder b(data, p, std::move(options));
    return b.build(lambda, kappa.value_or(mult * lambda), xi.value_or(mult * lambda));
}

/// Folds the prior's dummy rows into its moments after checking that they
/// conform to the design.
inline PriorSpec apply_dummies(const VarDesign& design, const PriorSpec& prior) {
    if (prior.K() != design.K() || prior.M() != design.M())
        throw ConfigError("prior dimensions (K=" + std::to_string(prior.K()) + ", M=" +
                          std::to_string(prior.M()) + ") do not match the design (K=" +
                          std::to_string(design.K()) + ", M=" + std::to_string(design.M()) + ")");
    return fold_dummies(prior);
}

inline const std::vector<double>& default_lambda_grid() {
    static const std::vector<double> grid{0.01, 0.025, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6};
    return grid;
}

struct LambdaSearch {
    double lambda_star = 0.0;
    std::vector<double> grid;
    std::vector<double> log_ml;  // NaN where the grid point failed
};

/// Plug-in lambda maximizing the coarsened marginal likelihood over `grid`.
/// Exact ties go to the larger lambda.
template <class Builder>
LambdaSearch optimize_lambda(const VarDesign& design, const Builder& builder, const LearningRate& rate,
                             const std::vector<double>& grid) {
    if (grid.empty()) throw ConfigError("lambda grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw ConfigError("lambda grid values must be positive");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw ConfigError("lambda grid must be strictly increasing");
    }
    LambdaSearch out;
    out.grid = grid;
    out.log_ml.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
    double best = -std::numeric_limits<double>::infinity();
    bool any = false;
    const SufficientStats stats = SufficientStats::from(design).scaled(rate.zeta);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        try {
            const PriorSpec prior = apply_dummies(design, builder(grid[i]));
            const auto post = conjugate_posterior(stats, prior, rate.zeta);
            const double lml = log_marginal_likelihood(prior, post, stats.T);
            if (!std::isfinite(lml)) continue;
            out.log_ml[i] = lml;
            if (lml >= best) {
                best = lml;
                out.lambda_star = grid[i];
                any = true;
            }
        } catch (const NumericError&) {
        }
    }
    if (!any) throw NumericError("marginal likelihood failed at every lambda grid point");
    return out;
}

}  // namespace cbvar
