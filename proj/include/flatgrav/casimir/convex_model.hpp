#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "flatgrav/core/error.hpp"

namespace flatgrav::casimir {

enum class ModelKind { polytrope, tabulated };

/// Selects which of value, derivative or inverse derivative eval_model returns.
enum class Which { value, deriv, inv_deriv };

/// Checks a sampled function for the standing assumptions on a Casimir
/// density: value 0 at 0, strictly convex chords, value/argument strictly
/// increasing. Returns an empty string when the table passes.
inline std::string convexity_violation(const std::vector<double>& args, const std::vector<double>& values) {
    if (args.size() != values.size()) return "argument and value columns differ in length";
    if (args.size() < 3) return "at least three samples are required";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (!std::isfinite(args[i]) || !std::isfinite(values[i])) return "non-finite sample at row " + std::to_string(i);
        if (i > 0 && !(args[i] > args[i - 1])) return "arguments not strictly increasing at row " + std::to_string(i);
    }
    if (args.front() < 0.0) return "negative argument";
    if (args.front() == 0.0 && values.front() != 0.0) return "value at 0 must be 0";
    // superlinearity: value(r)/r strictly increasing
    double prev_ratio = 0.0;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == 0.0) continue;
        const double ratio = values[i] / args[i];
        if (!(ratio > prev_ratio)) return "not superlinear: value/argument does not increase at row " + std::to_string(i);
        prev_ratio = ratio;
    }
    // strict convexity on consecutive triples (with the origin prepended)
    std::vector<double> a = args, v = values;
    if (a.front() > 0.0) {
        a.insert(a.begin(), 0.0);
        v.insert(v.begin(), 0.0);
    }
    for (std::size_t i = 1; i + 1 < a.size(); ++i) {
        const double left = (v[i] - v[i - 1]) / (a[i] - a[i - 1]);
        const double right = (v[i + 1] - v[i]) / (a[i + 1] - a[i]);
        if (!(right > left)) return "not strictly convex at row " + std::to_string(i);
    }
    return {};
}

/// A convex function on [0, inf) with value and derivative vanishing at 0:
/// either a power law c*r^p (p > 1) or a sampled table.
class ConvexModel {
public:
    static ConvexModel polytrope(double coefficient, double exponent) {
        if (!(coefficient > 0.0) || !std::isfinite(coefficient))
            throw ModelError("polytrope coefficient must be positive");
        if (!(exponent > 1.0) || !std::isfinite(exponent)) throw ModelError("polytrope exponent must exceed 1");
        ConvexModel m;
        m.kind_ = ModelKind::polytrope;
        m.coefficient_ = coefficient;
        m.exponent_ = exponent;
        return m;
    }

    /// Power law c*r^(1+1/k).
    static ConvexModel polytrope_k(double coefficient, double k) {
        if (!(k > 0.0)) throw ModelError("polytropic index must be positive");
        return polytrope(coefficient, 1.0 + 1.0 / k);
    }

    /// Sampled model. Values are interpolated by cubic Hermite splines
    /// (slope-limited for monotonicity), derivatives piecewise linearly in
    /// log-log coordinates, which is exact for power laws. Without explicit
    /// slopes, monotone (Fritsch-Butland) slopes are estimated; the slope
    /// at the origin is 0.
    static ConvexModel tabulated(std::vector<double> args, std::vector<double> values,
                                 std::vector<double> slopes = {}) {
        if (auto why = convexity_violation(args, values); !why.empty()) throw ModelError("invalid convex table: " + why);
        if (!slopes.empty() && slopes.size() != args.size()) throw ModelError("slope column length mismatch");
        if (args.front() > 0.0) {
            args.insert(args.begin(), 0.0);
            values.insert(values.begin(), 0.0);
            if (!slopes.empty()) slopes.insert(slopes.begin(), 0.0);
        }
        if (slopes.empty()) slopes = monotone_slopes(args, values);
        slopes.front() = 0.0;
        for (std::size_t i = 1; i < slopes.size(); ++i)
            if (!(slopes[i] > slopes[i - 1]) || !std::isfinite(slopes[i]))
                throw ModelError("derivative samples must be finite and strictly increasing");

        ConvexModel m;
        m.kind_ = ModelKind::tabulated;
        m.args_ = std::move(args);
        m.values_ = std::move(values);
        m.slopes_ = std::move(slopes);
        m.build_hermite_slopes();
        return m;
    }

    ModelKind kind() const noexcept { return kind_; }
    bool is_polytrope() const noexcept { return kind_ == ModelKind::polytrope; }
    double coefficient() const noexcept { return coefficient_; }
    double exponent() const noexcept { return exponent_; }
    /// k such that exponent = 1 + 1/k (polytropes only).
    double index() const noexcept { return 1.0 / (exponent_ - 1.0); }

    const std::vector<double>& args() const noexcept { return args_; }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<double>& slopes() const noexcept { return slopes_; }

    double max_argument() const noexcept {
        return is_polytrope() ? std::numeric_limits<double>::infinity() : args_.back();
    }
    double max_derivative() const noexcept {
        return is_polytrope() ? std::numeric_limits<double>::infinity() : slopes_.back();
    }

    double value(double r) const {
        check_argument(r);
        if (is_polytrope()) return r == 0.0 ? 0.0 : coefficient_ * std::pow(r, exponent_);
        const std::size_t i = interval(r);
        const double h = args_[i + 1] - args_[i];
        const double t = (r - args_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
        return h00 * values_[i] + h10 * h * hermite_[2 * i] + h01 * values_[i + 1] + h11 * h * hermite_[2 * i + 1];
    }

    double deriv(double r) const {
        check_argument(r);
        if (is_polytrope()) return r == 0.0 ? 0.0 : coefficient_ * exponent_ * std::pow(r, exponent_ - 1.0);
        const std::size_t i = interval(r);
        if (log_linear(i)) {
            const double t = std::log(r / args_[i]) / std::log(args_[i + 1] / args_[i]);
            return slopes_[i] * std::pow(slopes_[i + 1] / slopes_[i], t);
        }
        const double t = (r - args_[i]) / (args_[i + 1] - args_[i]);
        return slopes_[i] + t * (slopes_[i + 1] - slopes_[i]);
    }

    /// Inverse of deriv on [0, max_derivative()].
    double inv_deriv(double s) const {
        if (!(s >= 0.0)) throw DomainError("inverse derivative requires a nonnegative argument");
        if (is_polytrope()) return s == 0.0 ? 0.0 : std::pow(s / (coefficient_ * exponent_), 1.0 / (exponent_ - 1.0));
        if (s > slopes_.back()) throw ExtrapolationError("derivative value beyond the tabulated range");
        auto it = std::upper_bound(slopes_.begin(), slopes_.end(), s);
        std::size_t i = (it == slopes_.end()) ? slopes_.size() - 2 : static_cast<std::size_t>(it - slopes_.begin()) - 1;
        if (log_linear(i)) {
            const double t = std::log(s / slopes_[i]) / std::log(slopes_[i + 1] / slopes_[i]);
            return args_[i] * std::pow(args_[i + 1] / args_[i], t);
        }
        const double t = (s - slopes_[i]) / (slopes_[i + 1] - slopes_[i]);
        return args_[i] + t * (args_[i + 1] - args_[i]);
    }

    double operator()(double r) const { return value(r); }

private:
    ConvexModel() = default;

    void check_argument(double r) const {
        if (!(r >= 0.0)) throw DomainError("convex model evaluated at a negative argument");
        if (!is_polytrope() && r > args_.back())
            throw ExtrapolationError("argument " + std::to_string(r) + " beyond the tabulated range");
    }

    std::size_t interval(double r) const {
        auto it = std::upper_bound(args_.begin(), args_.end(), r);
        if (it == args_.end()) return args_.size() - 2;
        return static_cast<std::size_t>(it - args_.begin()) - 1;
    }

    bool log_linear(std::size_t i) const noexcept {
        return args_[i] > 0.0 && slopes_[i] > 0.0 && slopes_[i + 1] > 0.0;
    }

    static std::vector<double> monotone_slopes(const std::vector<double>& a, const std::vector<double>& v) {
        const std::size_t m = a.size();
        std::vector<double> h(m - 1), delta(m - 1), d(m, 0.0);
        for (std::size_t i = 0; i + 1 < m; ++i) {
            h[i] = a[i + 1] - a[i];
            delta[i] = (v[i + 1] - v[i]) / h[i];
        }
        for (std::size_t i = 1; i + 1 < m; ++i) {
            if (delta[i - 1] * delta[i] <= 0.0) continue;
            const double w1 = 2 * h[i] + h[i - 1], w2 = h[i] + 2 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
        // shape-preserving three-point end slope
        const std::size_t n = m - 1;
        double end = ((2 * h[n - 1] + h[n - 2]) * delta[n - 1] - h[n - 1] * delta[n - 2]) / (h[n - 1] + h[n - 2]);
        end = std::clamp(end, delta[n - 1], 3.0 * delta[n - 1]);
        d[n] = end;
        return d;
    }

    void build_hermite_slopes() {
        const std::size_t m = args_.size();
        hermite_.assign(2 * (m - 1), 0.0);
        for (std::size_t i = 0; i + 1 < m; ++i) {
            const double delta = (values_[i + 1] - values_[i]) / (args_[i + 1] - args_[i]);
            double a = slopes_[i] / delta, b = slopes_[i + 1] / delta;
            const double norm2 = a * a + b * b;
            if (norm2 > 9.0) {
                const double tau = 3.0 / std::sqrt(norm2);
                a *= tau;
                b *= tau;
            }
            hermite_[2 * i] = a * delta;
            hermite_[2 * i + 1] = b * delta;
        }
    }

    ModelKind kind_ = ModelKind::polytrope;
    double coefficient_ = std::numeric_limits<double>::quiet_NaN();
    double exponent_ = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> args_, values_, slopes_;
    std::vector<double> hermite_;  // limited end slopes per interval
};

inline double eval_model(const ConvexModel& model, double r, Which which) {
    switch (which) {
        case Which::value: return model.value(r);
        case Which::deriv: return model.deriv(r);
        case Which::inv_deriv: return model.inv_deriv(r);
    }
    return 0.0;
}

/// Pressure law p(rho) = rho * psi'(rho) - psi(rho) of the associated fluid.
inline double pressure(const ConvexModel& psi, double rho) {
    if (!(rho >= 0.0)) throw DomainError("pressure requires a nonnegative density");
    if (rho == 0.0) return 0.0;
    return rho * psi.deriv(rho) - psi.value(rho);
}

}  // namespace flatgrav::casimir
