#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <vector>

#include "flatgrav/casimir/convex_model.hpp"
#include "flatgrav/core/error.hpp"

namespace flatgrav::casimir {

/// Anything with value/deriv on [0, max_argument()].
template <class F>
concept ConvexFunction = requires(const F& f, double r) {
    { f.value(r) } -> std::convertible_to<double>;
    { f.deriv(r) } -> std::convertible_to<double>;
    { f.max_argument() } -> std::convertible_to<double>;
};

/// Geometric grid: count nodes from min to max, ratio constant.
struct GeometricGrid {
    double min = 1e-8;
    double max = 1e4;
    int count = 2048;

    std::vector<double> nodes() const {
        if (!(min > 0.0) || !(max > min) || count < 2) throw DomainError("invalid geometric grid");
        std::vector<double> x(count);
        const double step = std::log(max / min) / (count - 1);
        for (int i = 0; i < count; ++i) x[i] = min * std::exp(step * i);
        x.back() = max;
        return x;
    }
    GeometricGrid scaled(double s) const { return {min * s, max * s, count}; }
};

struct ConjugatePoint {
    double value = 0.0;   // sup_r (lambda r - f(r))
    double argmax = 0.0;  // maximizing r, i.e. the conjugate's derivative
};

namespace detail {

/// Brute-force maximization over a geometric scan plus golden-section
/// refinement. Used only when the derivative cannot be bracketed.
template <ConvexFunction F>
ConjugatePoint conjugate_by_scan(const F& f, double lambda) {
    const double top = std::isfinite(f.max_argument()) ? f.max_argument() : 1e12;
    const int n = 4096;
    const double lo_r = top * 1e-16;
    const double step = std::log(top / lo_r) / (n - 1);
    double best = 0.0, best_r = 0.0;
    int best_i = -1;
    for (int i = 0; i < n; ++i) {
        const double r = lo_r * std::exp(step * i);
        const double g = lambda * r - f.value(std::min(r, top));
        if (g > best) {
            best = g;
            best_r = r;
            best_i = i;
        }
    }
    if (best_i < 0) return {0.0, 0.0};
    double a = lo_r * std::exp(step * std::max(0, best_i - 1));
    double b = std::min(top, lo_r * std::exp(step * std::min(n - 1, best_i + 1)));
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 200 && (b - a) > 1e-14 * b; ++it) {
        const double c = b - gr * (b - a), d = a + gr * (b - a);
        if (lambda * c - f.value(c) > lambda * d - f.value(d))
            b = d;
        else
            a = c;
    }
    best_r = 0.5 * (a + b);
    return {lambda * best_r - f.value(best_r), best_r};
}

}  // namespace detail

/// Legendre transform at one point. The maximizer solves f'(r) = lambda and
/// is found by bisection on the monotone derivative to relative 1e-12.
template <ConvexFunction F>
ConjugatePoint conjugate_at(const F& f, double lambda) {
    if (!(lambda > 0.0)) return {0.0, 0.0};
    const double top = f.max_argument();
    double lo = 0.0, hi = std::isfinite(top) ? std::min(1.0, top) : 1.0;
    if (f.deriv(hi) >= lambda) {
        // shrink until the derivative drops below lambda
        lo = hi * 0.5;
        int guard = 0;
        while (f.deriv(lo) >= lambda) {
            hi = lo;
            lo *= 0.5;
            if (++guard > 2000 || lo == 0.0) return detail::conjugate_by_scan(f, lambda);
        }
    } else {
        int guard = 0;
        while (f.deriv(hi) < lambda) {
            lo = hi;
            if (std::isfinite(top) && hi >= top)
                throw ExtrapolationError("conjugate argument beyond the derivative range of the model");
            hi = std::isfinite(top) ? std::min(2.0 * hi, top) : 2.0 * hi;
            if (++guard > 2000 || !std::isfinite(hi)) return detail::conjugate_by_scan(f, lambda);
        }
    }
    for (int it = 0; it < 200 && (hi - lo) > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f.deriv(mid) < lambda)
            lo = mid;
        else
            hi = mid;
    }
    const double r = 0.5 * (lo + hi);
    return {lambda * r - f.value(r), r};
}

/// Coarse monotonicity probe of f' on a geometric scan; throws ModelError
/// if the derivative decreases (the function is not convex).
template <ConvexFunction F>
void require_monotone_derivative(const F& f, double r_max) {
    const int n = 512;
    const double r_min = r_max * 1e-12;
    const double step = std::log(r_max / r_min) / (n - 1);
    double prev = f.deriv(0.0);
    for (int i = 0; i < n; ++i) {
        const double r = std::min(r_max, r_min * std::exp(step * i));
        const double d = f.deriv(r);
        if (!(d >= prev)) throw ModelError("derivative decreases: model is not convex");
        prev = d;
    }
}

/// Tabulated Legendre transform. Zero for lambda <= 0; convex and
/// nondecreasing for lambda >= 0.
class ConjugateModel {
public:
    ConjugateModel(GeometricGrid grid, std::vector<double> lambdas, std::vector<double> values,
                   std::vector<double> argmax, std::optional<ConvexModel> base = std::nullopt)
        : grid_(grid),
          lambdas_(lambdas),
          table_(ConvexModel::tabulated(std::move(lambdas), std::move(values), std::move(argmax))),
          base_(std::move(base)) {}

    double value(double lambda) const { return lambda <= 0.0 ? 0.0 : table_.value(lambda); }
    double deriv(double lambda) const { return lambda <= 0.0 ? 0.0 : table_.deriv(lambda); }
    double inv_deriv(double r) const { return table_.inv_deriv(r); }
    double max_argument() const { return table_.max_argument(); }

    const GeometricGrid& grid() const noexcept { return grid_; }
    const std::vector<double>& lambdas() const noexcept { return lambdas_; }
    const ConvexModel& table() const noexcept { return table_; }
    const std::optional<ConvexModel>& base() const noexcept { return base_; }

private:
    GeometricGrid grid_;
    std::vector<double> lambdas_;
    ConvexModel table_;
    std::optional<ConvexModel> base_;
};

template <ConvexFunction F>
ConjugateModel legendre_numeric_of(const F& f, const GeometricGrid& grid,
                                   std::optional<ConvexModel> base = std::nullopt) {
    const std::vector<double> lambdas = grid.nodes();
    std::vector<double> values(lambdas.size()), argmax(lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        const ConjugatePoint p = conjugate_at(f, lambdas[i]);
        values[i] = p.value;
        argmax[i] = p.argmax;
    }
    try {
        return ConjugateModel(grid, lambdas, std::move(values), std::move(argmax), std::move(base));
    } catch (const ModelError& e) {
        throw ModelError(std::string("conjugate table is not convex: ") + e.what());
    }
}

/// Numeric Legendre transform of a convex model on a lambda grid.
inline ConjugateModel legendre_numeric(const ConvexModel& model, const GeometricGrid& grid) {
    if (!model.is_polytrope()) require_monotone_derivative(model, model.max_argument());
    return legendre_numeric_of(model, grid, model);
}

}  // namespace flatgrav::casimir
