#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "flatgrav/core/error.hpp"
#include "flatgrav/core/parallel.hpp"
#include "flatgrav/core/quadrature.hpp"
#include "flatgrav/poisson/fields.hpp"

namespace flatgrav::poisson {

namespace detail {

/// Complete elliptic integral of the first kind from the complementary
/// modulus, K = pi / (2 agm(1, k')); accurate as k' -> 0.
inline double ellint_k_from_complement(double kc) {
    double a = 1.0, b = kc;
    for (int i = 0; i < 64 && std::abs(a - b) > 1e-16 * a; ++i) {
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
    }
    return std::numbers::pi / (a + b);
}

/// Antiderivative of ln|x|.
inline double xlogx_minus_x(double x) { return x == 0.0 ? 0.0 : x * std::log(std::abs(x)) - x; }

/// Ring kernel -4 s/(r+s) K(k), k^2 = 4rs/(r+s)^2.
inline double ring_kernel(double r, double s) {
    const double kc = std::abs(r - s) / (r + s);
    return -4.0 * s / (r + s) * ellint_k_from_complement(kc);
}

/// Smooth remainder K(k) - ln(4/k') + ln(4(r+s)); equals K + ln|r-s|.
inline double ring_regular(double r, double s) {
    const double kc = std::abs(r - s) / (r + s);
    if (kc == 0.0) return std::log(4.0 * (r + s));
    return ellint_k_from_complement(kc) + std::log(std::abs(r - s));
}

}  // namespace detail

/// Linear map from nodal densities to the in-plane potential
/// U(r) = -4 int rho(s) s/(r+s) K(k) ds at fixed evaluation radii.
/// Panels within one panel width of r are split at r and have the
/// logarithmic singularity of K subtracted and integrated analytically.
class RadialPotentialOperator {
public:
    RadialPotentialOperator(std::vector<double> source_nodes, std::vector<double> eval_radii)
        : nodes_(std::move(source_nodes)), radii_(std::move(eval_radii)), matrix_(nodes_.size() * radii_.size(), 0.0) {
        for (double r : radii_)
            if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("evaluation radius must be finite and nonnegative");
        constexpr int chunks = 16;
        parallel_chunks(chunks, [&](int c) {
            auto [lo, hi] = chunk_range(radii_.size(), chunks, c);
            for (std::size_t i = lo; i < hi; ++i) build_row(i);
        });
    }

    explicit RadialPotentialOperator(const std::vector<double>& nodes) : RadialPotentialOperator(nodes, nodes) {}

    const std::vector<double>& source_nodes() const noexcept { return nodes_; }
    const std::vector<double>& eval_radii() const noexcept { return radii_; }
    /// Row-major eval_radii x source_nodes coefficients.
    const std::vector<double>& matrix() const noexcept { return matrix_; }

    std::vector<double> apply(std::span<const double> rho) const {
        if (rho.size() != nodes_.size()) throw ShapeError("density does not match the operator's source grid");
        std::vector<double> u(radii_.size(), 0.0);
        const std::size_t n = nodes_.size();
        for (std::size_t i = 0; i < radii_.size(); ++i) {
            const double* row = &matrix_[i * n];
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += row[j] * rho[j];
            u[i] = s;
        }
        return u;
    }

    RadialField apply(const RadialField& rho) const {
        RadialField out;
        out.nodes = radii_;
        out.values = apply(std::span<const double>(rho.values));
        out.outer_radius = radii_.empty() ? 0.0 : radii_.back();
        return out;
    }

private:
    // Adds int_c^d phi(s) K-kernel ds for a linear basis phi(s) = alpha + beta s.
    double near_piece(double r, double c, double d, double alpha, double beta) const {
        auto q = [&](double s) { return (alpha + beta * s) * s / (r + s); };
        const double qr = (r > 0.0) ? q(r) : alpha;  // limit of q at s = r
        double smooth = gauss_integrate<64>(
            [&](double s) { return q(s) * detail::ring_regular(r, s) - (q(s) - qr) * std::log(std::abs(s - r)); }, c, d);
        const double analytic = qr * (detail::xlogx_minus_x(d - r) - detail::xlogx_minus_x(c - r));
        // K = regular - ln|r-s|
        return -4.0 * (smooth - analytic);
    }

    void add_panel(std::size_t i, double a, double b, std::size_t j_left, double a_l, double b_l, bool has_right,
                   std::size_t j_right, double a_r, double b_r) {
        const double r = radii_[i];
        double* row = &matrix_[i * nodes_.size()];
        const double width = b - a;
        const bool near = r > 0.0 && r > a - width && r < b + width;
        if (!near) {
            // fewer nodes the farther the panel is from the singular ring
            const double gap = std::max(a - r, r - b);
            const GaussRule& g = gap > 10.0 * width ? gauss_rule<4>() : gap > 3.0 * width ? gauss_rule<8>() : gauss_rule<16>();
            const double half = 0.5 * width, mid = 0.5 * (a + b);
            double sl = 0.0, sr = 0.0;
            for (std::size_t k = 0; k < g.nodes.size(); ++k) {
                const double s = mid + half * g.nodes[k];
                const double kern = g.weights[k] * detail::ring_kernel(r, s);
                sl += kern * (a_l + b_l * s);
                if (has_right) sr += kern * (a_r + b_r * s);
            }
            row[j_left] += sl * half;
            if (has_right) row[j_right] += sr * half;
            return;
        }
        std::vector<std::pair<double, double>> pieces;
        if (r > a && r < b) {
            pieces = {{a, r}, {r, b}};
        } else {
            pieces = {{a, b}};
        }
        for (auto [c, d] : pieces) {
            row[j_left] += near_piece(r, c, d, a_l, b_l);
            if (has_right) row[j_right] += near_piece(r, c, d, a_r, b_r);
        }
    }

    void build_row(std::size_t i) {
        const std::size_t n = nodes_.size();
        // [0, r_0]: constant basis of node 0
        add_panel(i, 0.0, nodes_[0], 0, 1.0, 0.0, false, 0, 0.0, 0.0);
        for (std::size_t j = 0; j + 1 < n; ++j) {
            const double a = nodes_[j], b = nodes_[j + 1], w = b - a;
            // left hat (b - s)/w, right hat (s - a)/w
            add_panel(i, a, b, j, b / w, -1.0 / w, true, j + 1, -a / w, 1.0 / w);
        }
    }

    std::vector<double> nodes_;
    std::vector<double> radii_;
    std::vector<double> matrix_;  // row-major, radii x nodes
};

/// Potential of an axisymmetric density at the given radii.
inline RadialField potential_radial(const RadialField& rho, const std::vector<double>& eval_radii) {
    rho.validate();
    return RadialPotentialOperator(rho.nodes, eval_radii).apply(rho);
}

inline RadialField potential_radial(const RadialField& rho) { return potential_radial(rho, rho.nodes); }

/// 1/2 int U rho dx with the nodal area weights.
inline double e_pot_radial(const RadialField& rho, const RadialField& u) {
    if (rho.nodes != u.nodes) throw ShapeError("density and potential on different radial grids");
    std::vector<double> g(rho.size());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = u.values[j] * rho.values[j];
    return 0.5 * radial_integral(rho.nodes, g);
}

inline double e_pot(const RadialField& rho) { return e_pot_radial(rho, potential_radial(rho)); }

/// Radial derivative of a nodal field by centered differences on the
/// nonuniform grid (second order), one-sided at the ends.
inline std::vector<double> radial_derivative(const std::vector<double>& r, const std::vector<double>& f) {
    const std::size_t n = r.size();
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = r[i] - r[i - 1], h1 = r[i + 1] - r[i];
        d[i] = (-h1 / (h0 * (h0 + h1))) * f[i - 1] + ((h1 - h0) / (h0 * h1)) * f[i] + (h0 / (h1 * (h0 + h1))) * f[i + 1];
    }
    d[0] = (f[1] - f[0]) / (r[1] - r[0]);
    d[n - 1] = (f[n - 1] - f[n - 2]) / (r[n - 1] - r[n - 2]);
    return d;
}

}  // namespace flatgrav::poisson
