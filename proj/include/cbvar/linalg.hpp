#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbvar/error.hpp"

namespace cbvar {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace linalg {

inline MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

inline double min_eigenvalue(const MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Cholesky factorization that throws on failure instead of returning a
/// silently broken factor.
inline Eigen::LLT<MatrixXd> checked_llt(const MatrixXd& a, const std::string& what) {
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() != Eigen::Success || !llt.matrixLLT().diagonal().allFinite()) {
        std::ostringstream os;
        os << what << " is not positive definite (smallest eigenvalue " << min_eigenvalue(a)
           << ")";
        throw NumericError(os.str());
    }
    return llt;
}

/// Cholesky with one deterministic jitter retry: on failure, adds
/// 1e-10 * trace / n to the diagonal and tries again. `jittered` reports
/// whether the retry was needed.
inline Eigen::LLT<MatrixXd> llt_with_jitter(MatrixXd& a, const std::string& what,
                                            bool* jittered = nullptr) {
    if (jittered) *jittered = false;
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite() &&
        (llt.matrixLLT().diagonal().array() > 0.0).all())
        return llt;
    const double smallest = min_eigenvalue(a);
    const double jitter = 1e-10 * a.trace() / static_cast<double>(a.rows());
    a.diagonal().array() += jitter;
    llt.compute(a);
    if (llt.info() != Eigen::Success || !llt.matrixLLT().diagonal().allFinite() ||
        !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
        std::ostringstream os;
        os << what << " is not positive definite after jitter (smallest eigenvalue "
           << smallest << ")";
        throw NumericError(os.str());
    }
    if (jittered) *jittered = true;
    return llt;
}

inline double logdet(const Eigen::LLT<MatrixXd>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// log of the multivariate gamma function Gamma_m(a).
inline double log_multigamma(double a, int m) {
    double out = 0.25 * m * (m - 1) * std::log(std::numbers::pi);
    for (int j = 1; j <= m; ++j) out += std::lgamma(a + 0.5 * (1 - j));
    return out;
}

/// Relative Frobenius distance ||a - b|| / max(||b||, tiny).
inline double rel_diff(const MatrixXd& a, const MatrixXd& b) {
    const double denom = std::max(b.norm(), 1e-300);
    return (a - b).norm() / denom;
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, 0.5);
}

}  // namespace linalg
}  // namespace cbvar
