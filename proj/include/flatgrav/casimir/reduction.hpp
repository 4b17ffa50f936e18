#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "flatgrav/casimir/conjugate.hpp"
#include "flatgrav/casimir/convex_model.hpp"
#include "flatgrav/core/error.hpp"
#include "flatgrav/core/quadrature.hpp"

namespace flatgrav::casimir {

// Reduction of a phase-space Casimir density phi(f) to the density-level
// function psi(rho):
//
//   psi*(lambda) = int_{R^2} phi*(lambda - |v|^2/2) dv = 2 pi int_0^lambda phi*(s) ds,
//   psi          = (psi*)*.
//
// For phi(f) = c f^(1+1/k) the result is psi(rho) = c' rho^(1+1/n), n = k + 1.

struct ReductionOptions {
    GeometricGrid lambda_grid{1e-8, 1e4, 2048};
    int rho_count = 2048;
    /// Relative accuracy demanded of the tabulated psi and of the closed form.
    double tolerance = 1e-6;
    bool prefer_closed_form = true;
};

/// Least-squares slope of log(value) against log(arg) over [lo, hi].
inline double fit_log_slope(const std::vector<double>& args, const std::vector<double>& values, double lo, double hi) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] < lo || args[i] > hi || !(args[i] > 0.0) || !(values[i] > 0.0)) continue;
        const double x = std::log(args[i]), y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m < 2) return std::numeric_limits<double>::quiet_NaN();
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

/// Closed-form coefficient of psi for phi(f) = c f^p, p = 1 + 1/k:
/// psi*(lambda) = A lambda^(n+1) with A = 2 pi (c p)^(-k) / (n (n+1)), and
/// psi(rho) = n/(n+1) (A (n+1))^(-1/n) rho^(1+1/n).
inline double reduced_polytrope_coefficient(double c, double p) {
    const double k = 1.0 / (p - 1.0);
    const double n = k + 1.0;
    const double a = 2.0 * std::numbers::pi * std::pow(c * p, -k) / (n * (n + 1.0));
    return n / (n + 1.0) * std::pow(a * (n + 1.0), -1.0 / n);
}

/// psi* as a convex function: tabulated values (cumulative quadrature of
/// 2 pi phi*) and an exact derivative 2 pi phi*(lambda).
class PsiStarFunction {
public:
    PsiStarFunction(const ConvexModel& phi, ConvexModel table) : phi_(&phi), table_(std::move(table)) {}

    double value(double lambda) const { return lambda <= 0.0 ? 0.0 : table_.value(lambda); }
    double deriv(double lambda) const {
        return lambda <= 0.0 ? 0.0 : 2.0 * std::numbers::pi * conjugate_at(*phi_, lambda).value;
    }
    double max_argument() const { return table_.max_argument(); }
    const ConvexModel& table() const noexcept { return table_; }

private:
    const ConvexModel* phi_;
    ConvexModel table_;
};

/// 2 pi int_0^lambda phi*(s) ds by composite Gauss rules on a geometric
/// partition; independent of any tabulation.
inline double polar_velocity_integral(const ConvexModel& phi, double lambda, int panels = 64) {
    if (!(lambda > 0.0)) return 0.0;
    auto phi_star = [&](double s) { return conjugate_at(phi, s).value; };
    const double lo = lambda * 1e-12;
    double total = tanh_sinh_integrate(phi_star, 0.0, lo, 4);
    const double ratio = std::pow(lambda / lo, 1.0 / panels);
    double a = lo;
    for (int i = 0; i < panels; ++i) {
        const double b = (i + 1 == panels) ? lambda : a * ratio;
        total += gauss_integrate<16>(phi_star, a, b);
        a = b;
    }
    return 2.0 * std::numbers::pi * total;
}

struct ReductionResult {
    ConvexModel psi;          // closed form when available and verified
    ConvexModel psi_numeric;  // tabulated numeric path, always computed
    ConjugateModel phi_star;
    ConvexModel psi_star;     // tabulated psi*, slopes 2 pi phi*
    double fitted_exponent = 0;  // global log-log slope of psi
    double fitted_n = 0;         // 1/(fitted_exponent - 1)
    double fitted_n_large = 0;   // from the top decade of rho
    double fitted_n_small = 0;   // from the bottom decade of rho
    double achieved_error = 0;   // interpolation self-check of psi_numeric
    double closed_form_error = std::numeric_limits<double>::quiet_NaN();
};

inline ReductionResult reduce_phi_to_psi_detailed(const ConvexModel& phi, const ReductionOptions& opt = {}) {
    GeometricGrid lg = opt.lambda_grid;
    if (!phi.is_polytrope()) {
        require_monotone_derivative(phi, phi.max_argument());
        lg.max = std::min(lg.max, phi.max_derivative() * (1.0 - 1e-9));
        if (!(lg.max > lg.min)) throw ModelError("tabulated model derivative range too small for the lambda grid");
    }
    ConjugateModel phi_star = legendre_numeric(phi, lg);
    const std::vector<double>& lam = phi_star.lambdas();
    auto phi_star_exact = [&](double s) { return conjugate_at(phi, s).value; };

    // cumulative psi* on the lambda nodes
    std::vector<double> psi_star(lam.size()), psi_star_slope(lam.size());
    double acc = tanh_sinh_integrate(phi_star_exact, 0.0, lam[0], 5);
    psi_star[0] = 2.0 * std::numbers::pi * acc;
    for (std::size_t j = 0; j + 1 < lam.size(); ++j) {
        acc += gauss_integrate<8>(phi_star_exact, lam[j], lam[j + 1]);
        psi_star[j + 1] = 2.0 * std::numbers::pi * acc;
    }
    for (std::size_t j = 0; j < lam.size(); ++j) psi_star_slope[j] = 2.0 * std::numbers::pi * phi_star_exact(lam[j]);
    ConvexModel psi_star_table = ConvexModel::tabulated(lam, psi_star, psi_star_slope);
    PsiStarFunction psi_star_fn(phi, psi_star_table);

    // psi = (psi*)* on a geometric rho grid
    const double rho_lo = psi_star_slope.front() * (1.0 + 1e-6);
    const double rho_hi = psi_star_slope.back() * (1.0 - 1e-6);
    const GeometricGrid rho_grid{rho_lo, rho_hi, opt.rho_count};
    ConjugateModel psi_conj = legendre_numeric_of(psi_star_fn, rho_grid);
    std::vector<double> rho = psi_conj.lambdas();
    std::vector<double> psi_vals(rho.size()), psi_slopes(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
        psi_vals[i] = psi_conj.value(rho[i]);
        psi_slopes[i] = psi_conj.deriv(rho[i]);
    }
    ConvexModel psi_numeric = ConvexModel::tabulated(rho, psi_vals, psi_slopes);

    // interpolation self-check at geometric midpoints
    double achieved = 0.0;
    for (std::size_t i = 0; i + 1 < rho.size(); i += 7) {
        const double mid = std::sqrt(rho[i] * rho[i + 1]);
        const double direct = conjugate_at(psi_star_fn, mid).value;
        achieved = std::max(achieved, std::abs(psi_numeric.value(mid) - direct) / direct);
    }
    if (achieved > opt.tolerance)
        throw AccuracyError("reduction grid too coarse for the requested tolerance", achieved);

    ReductionResult out{psi_numeric, psi_numeric, phi_star, psi_star_table};
    out.achieved_error = achieved;
    out.fitted_exponent = fit_log_slope(rho, psi_vals, rho.front(), rho.back());
    out.fitted_n = 1.0 / (out.fitted_exponent - 1.0);
    out.fitted_n_large = 1.0 / (fit_log_slope(rho, psi_vals, rho.back() / 10.0, rho.back()) - 1.0);
    out.fitted_n_small = 1.0 / (fit_log_slope(rho, psi_vals, rho.front(), rho.front() * 10.0) - 1.0);

    if (phi.is_polytrope() && opt.prefer_closed_form) {
        const double n = phi.index() + 1.0;
        ConvexModel closed = ConvexModel::polytrope(reduced_polytrope_coefficient(phi.coefficient(), phi.exponent()),
                                                    1.0 + 1.0 / n);
        double err = 0.0;
        for (std::size_t i = 0; i < rho.size(); ++i)
            err = std::max(err, std::abs(closed.value(rho[i]) - psi_vals[i]) / psi_vals[i]);
        out.closed_form_error = err;
        if (err > opt.tolerance) throw AccuracyError("closed-form reduced coefficient disagrees with the numeric path", err);
        out.psi = closed;
    }
    return out;
}

/// Reduced model psi for a phase-space model phi.
inline ConvexModel reduce_phi_to_psi(const ConvexModel& phi, const ReductionOptions& opt = {}) {
    return reduce_phi_to_psi_detailed(phi, opt).psi;
}

}  // namespace flatgrav::casimir
