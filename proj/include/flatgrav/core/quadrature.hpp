#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace flatgrav {

/// Neumaier-compensated running sum. Order-dependent but deterministic.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline GaussRule make_gauss_rule(int n) {
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // one more derivative evaluation at the converged node
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

/// Cached rule; thread-safe static initialization per N.
template <int N>
const GaussRule& gauss_rule() {
    static const GaussRule rule = make_gauss_rule(N);
    return rule;
}

/// Gauss-Legendre integral of f over [a, b] with an N-point rule.
template <int N, class F>
double gauss_integrate(F&& f, double a, double b) {
    const GaussRule& rule = gauss_rule<N>();
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return s * half;
}

/// Tanh-sinh (double exponential) quadrature on [a, b]; tolerant of
/// integrable algebraic or logarithmic endpoint singularities.
/// The integrand is never evaluated at the endpoints themselves.
template <class F>
double tanh_sinh_integrate(F&& f, double a, double b, int levels = 7) {
    const double half = 0.5 * (b - a);
    const double pi_2 = 0.5 * std::numbers::pi;
    double h = 1.0;
    const double t_max = 3.5;

    auto node_sum = [&](double step, bool odd_only) {
        double s = 0.0;
        const int kmax = static_cast<int>(t_max / step);
        for (int k = odd_only ? 1 : 0; k <= kmax; k += odd_only ? 2 : 1) {
            const double t = k * step;
            const double sh = pi_2 * std::sinh(t);
            const double ch = std::cosh(sh);
            const double w = pi_2 * std::cosh(t) / (ch * ch);
            // distance to the endpoints, computed without cancellation
            const double gap = half / (std::exp(sh) * ch);
            if (gap <= 0.0 || w == 0.0) continue;
            double contrib = 0.0;
            const double xr = b - gap, xl = a + gap;
            if (xr > a && xr < b) contrib += f(xr);
            if (k != 0 && xl > a && xl < b) contrib += f(xl);
            s += w * contrib;
        }
        return s;
    };

    double sum = node_sum(h, false);
    double result = sum * h * half;
    for (int level = 1; level <= levels; ++level) {
        h *= 0.5;
        sum += node_sum(h, true);
        result = sum * h * half;
    }
    return result;
}

}  // namespace flatgrav
