#pragma once

// Shared fixtures and independent reference implementations for the tests.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbvar/core.hpp"
#include "cbvar/dataset.hpp"
#include "cbvar/hash.hpp"

namespace testing_support {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> n(0.0, sd);
    MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
    return m;
}

/// Random SPD matrix with eigenvalues in a moderate range.
inline MatrixXd random_spd(Eigen::Index m, std::mt19937_64& rng) {
    const MatrixXd g = normal_matrix(m, m, rng);
    return g * g.transpose() + static_cast<double>(m) * MatrixXd::Identity(m, m);
}

/// Stationary VAR(p) sample with Gaussian errors: y_t = c + sum_l A_l y_{t-l} + L e_t.
inline MatrixXd simulate_var(const std::vector<MatrixXd>& A, const VectorXd& c, const MatrixXd& L, int T,
                             std::mt19937_64& rng, int burn = 200) {
    const Eigen::Index M = c.size();
    const int p = static_cast<int>(A.size());
    MatrixXd y = MatrixXd::Zero(T + burn + p, M);
    std::normal_distribution<double> n;
    for (int t = p; t < T + burn + p; ++t) {
        VectorXd v = c;
        for (int l = 1; l <= p; ++l) v += A[static_cast<std::size_t>(l - 1)] * y.row(t - l).transpose();
        VectorXd e(M);
        for (Eigen::Index j = 0; j < M; ++j) e(j) = n(rng);
        y.row(t) = (v + L * e).transpose();
    }
    return y.bottomRows(T);
}

/// Small stable random VAR instance.
inline MatrixXd random_var_data(Eigen::Index M, int p, int T, std::mt19937_64& rng) {
    std::vector<MatrixXd> A;
    for (int l = 1; l <= p; ++l) {
        MatrixXd a = normal_matrix(M, M, rng, 0.15 / l);
        if (l == 1) a.diagonal().array() += 0.4;
        A.push_back(a);
    }
    const VectorXd c = normal_matrix(M, 1, rng);
    const MatrixXd L = random_spd(M, rng).llt().matrixL();
    return simulate_var(A, c, 0.3 * L, T, rng);
}

/// Gauss-Legendre nodes and weights on [a, b] (Newton iteration on P_n).
inline void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w) {
    x.assign(static_cast<std::size_t>(n), 0.0);
    w.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[static_cast<std::size_t>(i)] = 0.5 * (a + b) - 0.5 * (b - a) * z;
        w[static_cast<std::size_t>(i)] = (b - a) / ((1.0 - z * z) * dp * dp);
    }
}

/// Textbook NIW posterior in the OLS-decomposition form
///   S_bar = S + (Y - X B)'(Y - X B) + (B - A0)'(V + (X'X)^{-1})^{-1}(B - A0),
/// B = OLS, with explicit inverses. Requires X'X invertible.
struct TextbookNiw {
    MatrixXd A_bar, V_bar, S_bar;
    double df;
};

inline TextbookNiw textbook_niw(const MatrixXd& X, const MatrixXd& Y, const MatrixXd& A0, const MatrixXd& V0,
                                const MatrixXd& S0, double v0) {
    const MatrixXd XtX = X.transpose() * X;
    const MatrixXd XtX_inv = XtX.inverse();
    const MatrixXd B = XtX_inv * X.transpose() * Y;
    const MatrixXd V0_inv = V0.inverse();
    TextbookNiw r;
    r.V_bar = (V0_inv + XtX).inverse();
    r.A_bar = r.V_bar * (V0_inv * A0 + XtX * B);
    const MatrixXd E = Y - X * B;
    r.S_bar = S0 + E.transpose() * E + (B - A0).transpose() * (V0 + XtX_inv).inverse() * (B - A0);
    r.df = v0 + static_cast<double>(X.rows());
    return r;
}

/// Normal-inverse-gamma log marginal likelihood of a univariate regression
/// y = X b + e, b | s2 ~ N(m0, s2 V0), s2 ~ IG(a0, b0).
inline double nig_log_ml(const MatrixXd& X, const VectorXd& y, const VectorXd& m0, const MatrixXd& V0, double a0,
                         double b0) {
    const double n = static_cast<double>(y.size());
    const MatrixXd V0_inv = V0.inverse();
    const MatrixXd Vn = (V0_inv + X.transpose() * X).inverse();
    const VectorXd mn = Vn * (V0_inv * m0 + X.transpose() * y);
    const double an = a0 + 0.5 * n;
    const double bn = b0 + 0.5 * (y.squaredNorm() + m0.dot(V0_inv * m0) - mn.dot(Vn.inverse() * mn));
    return 0.5 * (std::log(Vn.determinant()) - std::log(V0.determinant())) + a0 * std::log(b0) -
           an * std::log(bn) + std::lgamma(an) - std::lgamma(a0) - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cbvar_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Writes a FRED-MD style CSV (header, Transform row, M/D/YYYY dates) with
/// the fifteen large-model series simulated as plausible positive/level
/// processes from 1974-01 through 2021-07.
inline void write_fred_like_csv(const std::filesystem::path& path, std::uint64_t seed, int months = 571,
                                bool negative_nonborres = true) {
    const std::vector<std::string> names{"UNRATE", "CPIAUCSL", "FEDFUNDS", "NONBORRES", "M2REAL",
                                         "TOTRESNS", "INDPRO", "RPI", "S&P 500", "CUMFNS",
                                         "T10YFFM", "AWHMAN", "M1SL", "EXUSUKx", "HOUST"};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    std::vector<double> level{6.0, 50.0, 8.0, 40.0, 2000.0, 40.0, 50.0, 5000.0, 100.0, 80.0,
                              1.0, 40.0, 300.0, 1.8, 1500.0};
    std::ofstream out(path);
    out << "sasdate";
    for (const auto& nm : names) out << ',' << (nm == "S&P 500" ? "S.P.500" : nm);
    out << "\nTransform:";
    for (std::size_t j = 0; j < names.size(); ++j) out << ",5";
    out << '\n';
    for (int t = 0; t < months; ++t) {
        const int year = 1974 + t / 12, month = 1 + t % 12;
        out << month << "/1/" << year;
        for (std::size_t j = 0; j < names.size(); ++j) {
            double& x = level[j];
            switch (j) {
                case 0: x = std::max(2.0, x + 0.15 * n(rng)); break;
                case 2: x = std::max(0.05, x + 0.25 * n(rng)); break;
                case 9: x = 80.0 + 0.9 * (x - 80.0) + n(rng); break;
                case 10: x = 0.9 * x + 0.3 * n(rng); break;
                case 11: x = 40.0 + 0.8 * (x - 40.0) + 0.3 * n(rng); break;
                case 3:
                    x = (negative_nonborres && t > 420) ? x * 0.0 - 20.0 + 5.0 * n(rng)
                                                        : x * std::exp(0.004 + 0.01 * n(rng));
                    break;
                default: x *= std::exp(0.003 + 0.01 * n(rng)); break;
            }
            out << ',' << cbvar::csv::num(x);
        }
        out << '\n';
    }
}

/// Brute-force moments of the tempered posterior of a univariate AR(1)
/// with intercept, b = (c, a), under b | s2 ~ N(A0, s2 P0^{-1}),
/// s2 ~ IG(v0/2, S0/2), by Gauss-Legendre quadrature over (log s2, c, a).
/// `centre`, `centre_V`, `centre_S`, `centre_df` only place the integration
/// box; the integrand uses nothing but the data and the prior.
struct QuadratureResult {
    double log_z = 0.0;
    double mean_c = 0.0, mean_a = 0.0;
    double var_a = 0.0;
    double mean_s2 = 0.0;
};

inline QuadratureResult ar1_quadrature(const MatrixXd& X, const VectorXd& y, const VectorXd& A0,
                                       const MatrixXd& P0, double S0, double v0, double zeta,
                                       const VectorXd& centre, const MatrixXd& centre_V, double centre_S,
                                       double centre_df, int nu = 80, int nb = 40) {
    const double T = static_cast<double>(y.size());
    const MatrixXd XtX = X.transpose() * X;
    const VectorXd Xty = X.transpose() * y;
    const double yty = y.squaredNorm();
    const double logdet_P0 = std::log(P0.determinant());
    const double u_mode = std::log(centre_S / centre_df);
    std::vector<double> ux, uw, gx, gw;
    gauss_legendre(nu, u_mode - 6.0, u_mode + 12.0, ux, uw);
    gauss_legendre(nb, -10.0, 10.0, gx, gw);

    auto log_integrand = [&](double c, double a, double s2) {
        const VectorXd b = (VectorXd(2) << c, a).finished();
        const double ssr = yty - 2.0 * b.dot(Xty) + b.dot(XtX * b);
        const VectorXd d = b - A0;
        const double loglik = -0.5 * T * std::log(2.0 * std::numbers::pi * s2) - 0.5 * ssr / s2;
        const double log_prior_b =
            -std::log(2.0 * std::numbers::pi) - std::log(s2) + 0.5 * logdet_P0 - 0.5 * d.dot(P0 * d) / s2;
        const double ga = 0.5 * v0, gb = 0.5 * S0;
        const double log_prior_s2 = ga * std::log(gb) - std::lgamma(ga) - (ga + 1.0) * std::log(s2) - gb / s2;
        return zeta * loglik + log_prior_b + log_prior_s2;
    };

    // Two passes: the first finds the maximum for a stable log-sum-exp.
    double log_max = -std::numeric_limits<double>::infinity();
    for (int pass = 0; pass < 2; ++pass) {
        double z = 0.0, m_c = 0.0, m_a = 0.0, m_aa = 0.0, m_s2 = 0.0;
        for (int iu = 0; iu < nu; ++iu) {
            const double s2 = std::exp(ux[static_cast<std::size_t>(iu)]);
            const double hc = std::sqrt(s2 * centre_V(0, 0)), ha = std::sqrt(s2 * centre_V(1, 1));
            for (int ic = 0; ic < nb; ++ic) {
                const double c = centre(0) + hc * gx[static_cast<std::size_t>(ic)];
                for (int ia = 0; ia < nb; ++ia) {
                    const double a = centre(1) + ha * gx[static_cast<std::size_t>(ia)];
                    const double lv = log_integrand(c, a, s2) + std::log(s2);  // d s2 = s2 du
                    if (pass == 0) {
                        log_max = std::max(log_max, lv);
                        continue;
                    }
                    const double w = uw[static_cast<std::size_t>(iu)] * gw[static_cast<std::size_t>(ic)] *
                                     gw[static_cast<std::size_t>(ia)] * hc * ha * std::exp(lv - log_max);
                    z += w;
                    m_c += w * c;
                    m_a += w * a;
                    m_aa += w * a * a;
                    m_s2 += w * s2;
                }
            }
        }
        if (pass == 1) {
            QuadratureResult r;
            r.log_z = log_max + std::log(z);
            r.mean_c = m_c / z;
            r.mean_a = m_a / z;
            r.var_a = m_aa / z - r.mean_a * r.mean_a;
            r.mean_s2 = m_s2 / z;
            return r;
        }
    }
    return {};
}

}  // namespace testing_support
