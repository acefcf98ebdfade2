#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "cbvar/core.hpp"
#include "cbvar/csv.hpp"
#include "cbvar/error.hpp"
#include "cbvar/priors.hpp"

namespace cbvar {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline const std::vector<double>& default_alpha_grid() {
    static const std::vector<double> grid{25, 50, 75, 100, 125, 250, 350, 500, 1000, kInf};
    return grid;
}

/// "inf" for infinity, shortest round-trip decimal otherwise.
inline std::string alpha_label(double alpha) { return std::isinf(alpha) ? "inf" : csv::num(alpha); }

inline double parse_alpha(std::string_view s) {
    s = csv::trim(s);
    if (s == "inf" || s == "Inf" || s == "infinity") return kInf;
    bool ok = true;
    const double a = csv::parse_number(s, &ok);
    if (!ok || !(a > 0.0)) throw ConfigError("alpha must be a positive number or 'inf', got '" + std::string(s) + "'");
    return a;
}

/// Everything computed for one alpha: the learning rate, the lambda search
/// and the resulting posterior with its fit/complexity summary.
struct AlphaFit {
    LearningRate rate;
    LambdaSearch lambda;
    PriorSpec prior;  // folded prior at lambda_star
    CoarsenedPosterior posterior;
    FitComplexity fit;
};

template <class Builder>
AlphaFit fit_alpha(const VarDesign& design, const Builder& builder, const std::vector<double>& lambda_grid,
                   double alpha, double tau = 0.01) {
    AlphaFit f;
    f.rate = learning_rate(alpha, design);
    f.lambda = optimize_lambda(design, builder, f.rate, lambda_grid);
    f.prior = apply_dummies(design, builder(f.lambda.lambda_star));
    f.posterior = coarsened_posterior(design, f.prior, f.rate);
    f.fit = fit_complexity(design, f.posterior, f.rate, tau);
    return f;
}

/// Evaluated (MF, MC) curve over an alpha grid.
struct AlphaGrid {
    std::vector<double> values;         // requested grid
    std::vector<FitComplexity> points;  // surviving grid values, in grid order
    std::vector<double> lambdas;        // lambda_star per surviving point
    std::vector<std::string> failures;  // "alpha: reason" for skipped values
};

inline void check_alpha_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw ConfigError("alpha grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw ConfigError("alpha grid values must be positive");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw ConfigError("alpha grid must be strictly increasing");
    }
}

/// Curve from fits that were already computed (all assumed successful).
inline AlphaGrid alpha_grid_from_fits(const std::vector<AlphaFit>& fits) {
    AlphaGrid g;
    for (const auto& f : fits) {
        g.values.push_back(f.rate.alpha);
        g.points.push_back(f.fit);
        g.lambdas.push_back(f.lambda.lambda_star);
    }
    return g;
}

template <class Builder>
AlphaGrid evaluate_alpha_grid(const VarDesign& design, const Builder& builder,
                              const std::vector<double>& lambda_grid, const std::vector<double>& alpha_grid,
                              double tau = 0.01) {
    check_alpha_grid(alpha_grid);
    if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
    AlphaGrid g;
    g.values = alpha_grid;
    for (double alpha : alpha_grid) {
        try {
            const auto f = fit_alpha(design, builder, lambda_grid, alpha, tau);
            g.points.push_back(f.fit);
            g.lambdas.push_back(f.lambda.lambda_star);
        } catch (const NumericError& e) {
            g.failures.push_back(alpha_label(alpha) + ": " + e.what());
        }
    }
    if (g.points.size() < std::min<std::size_t>(3, alpha_grid.size()))
        throw NumericError("only " + std::to_string(g.points.size()) + " alpha grid points could be evaluated");
    return g;
}

/// Knee of the (MF, MC) curve: after min-max normalizing both axes, the
/// point farthest from the chord joining the first and last points. Exact
/// ties go to the larger alpha; a collinear curve selects no coarsening.
inline double select_alpha_knee(const AlphaGrid& grid) {
    const auto& pts = grid.points;
    if (pts.size() < 3) throw NumericError("knee selection needs at least 3 evaluated alpha values");
    const std::size_t n = pts.size();
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = pts[i].mf;
        y[i] = static_cast<double>(pts[i].mc);
    }
    auto normalize = [](std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        const double a = *lo, range = *hi - *lo;
        for (double& e : v) e = range > 0.0 ? (e - a) / range : 0.0;
    };
    normalize(x);
    normalize(y);
    const double dx = x[n - 1] - x[0];
    const double dy = y[n - 1] - y[0];
    const double chord = std::hypot(dx, dy);
    double best = -1.0;
    std::size_t best_i = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = chord > 0.0 ? std::abs(dy * (x[i] - x[0]) - dx * (y[i] - y[0])) / chord
                                     : std::hypot(x[i] - x[0], y[i] - y[0]);
        if (d >= best) {
            best = d;
            best_i = i;
        }
    }
    if (best <= 1e-12) return kInf;
    return pts[best_i].alpha;
}

/// Diagnostic curve as CSV: alpha, mf, mc.
inline void write_alpha_curve(const AlphaGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "# fit/complexity curve; mf = Gaussian log-likelihood at the posterior mean, "
           "mc = #coefficients with |a| < tau\n";
    out << "alpha,mf,mc\n";
    for (const auto& p : grid.points) out << alpha_label(p.alpha) << ',' << csv::num(p.mf) << ',' << p.mc << '\n';
}

}  // namespace cbvar
