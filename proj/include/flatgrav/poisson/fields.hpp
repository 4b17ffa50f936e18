#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "flatgrav/core/error.hpp"
#include "flatgrav/core/quadrature.hpp"

namespace flatgrav::poisson {

/// Axisymmetric field sampled on radii r_0 < r_1 < ... . Between nodes the
/// field is linear; on [0, r_0] it equals values[0]; beyond the last node
/// it vanishes.
struct RadialField {
    std::vector<double> nodes;
    std::vector<double> values;
    double outer_radius = 0.0;

    RadialField() = default;
    RadialField(std::vector<double> r, std::vector<double> v)
        : nodes(std::move(r)), values(std::move(v)), outer_radius(nodes.empty() ? 0.0 : nodes.back()) {
        validate();
    }

    std::size_t size() const noexcept { return nodes.size(); }

    void validate() const {
        if (nodes.size() != values.size()) throw ShapeError("radial nodes and values differ in length");
        if (nodes.size() < 2) throw ShapeError("radial field needs at least two nodes");
        if (!(nodes.front() > 0.0)) throw DomainError("radial nodes must start at a positive radius");
        for (std::size_t i = 1; i < nodes.size(); ++i)
            if (!(nodes[i] > nodes[i - 1])) throw DomainError("radial nodes must be strictly increasing");
        for (double v : values)
            if (!std::isfinite(v)) throw DomainError("radial field has non-finite values");
    }

    /// Piecewise-linear value at radius r.
    double at(double r) const {
        if (r <= nodes.front()) return values.front();
        if (r > nodes.back()) return 0.0;
        auto it = std::upper_bound(nodes.begin(), nodes.end(), r);
        const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - nodes.begin()), nodes.size() - 1);
        const double t = (r - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
        return values[i - 1] + t * (values[i] - values[i - 1]);
    }

    /// Same nodes, new values.
    RadialField with_values(std::vector<double> v) const {
        RadialField out = *this;
        if (v.size() != nodes.size()) throw ShapeError("value count does not match the radial grid");
        out.values = std::move(v);
        return out;
    }
};

/// Geometric radii: count nodes from r_min to r_max.
inline std::vector<double> geometric_radii(double r_min, double r_max, std::size_t count) {
    if (!(r_min > 0.0) || !(r_max > r_min) || count < 2) throw DomainError("invalid geometric radial grid");
    std::vector<double> r(count);
    const double step = std::log(r_max / r_min) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) r[i] = r_min * std::exp(step * static_cast<double>(i));
    r.back() = r_max;
    return r;
}

/// Exact area weights of the piecewise-linear representation:
/// sum_j w_j g_j = 2 pi int g(r) r dr for g linear between nodes.
inline std::vector<double> radial_weights(std::span<const double> r) {
    const std::size_t n = r.size();
    std::vector<double> w(n, 0.0);
    w[0] = std::numbers::pi * r[0] * r[0];
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double d = r[j + 1] - r[j];
        w[j] += 2.0 * std::numbers::pi * d * (2.0 * r[j] + r[j + 1]) / 6.0;
        w[j + 1] += 2.0 * std::numbers::pi * d * (r[j] + 2.0 * r[j + 1]) / 6.0;
    }
    return w;
}

/// 2 pi int g(r) r dr for nodal values g on the radial grid.
inline double radial_integral(std::span<const double> r, std::span<const double> g) {
    if (r.size() != g.size()) throw ShapeError("radial integral: length mismatch");
    const std::vector<double> w = radial_weights(r);
    CompensatedSum s;
    for (std::size_t j = 0; j < r.size(); ++j) s.add(w[j] * g[j]);
    return s.value();
}

inline double mass(const RadialField& f) { return radial_integral(f.nodes, f.values); }

inline double lp_norm(const RadialField& f, double p) {
    std::vector<double> g(f.size());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = std::pow(std::abs(f.values[j]), p);
    return std::pow(radial_integral(f.nodes, g), 1.0 / p);
}

/// Radius enclosing `fraction` of the mass, by bisection on the exact
/// cumulative mass of the piecewise-linear density.
inline double mass_radius(const RadialField& rho, double fraction = 0.5) {
    const double total = mass(rho);
    if (!(total > 0.0)) return 0.0;
    auto enclosed = [&](double R) {
        // integrate the linear interpolant on [0, R]
        double m = std::numbers::pi * std::pow(std::min(R, rho.nodes[0]), 2) * rho.values[0];
        for (std::size_t j = 0; j + 1 < rho.size() && rho.nodes[j] < R; ++j) {
            const double b = std::min(R, rho.nodes[j + 1]);
            m += gauss_integrate<4>([&](double s) { return 2.0 * std::numbers::pi * s * rho.at(s); }, rho.nodes[j], b);
        }
        return m;
    };
    double lo = 0.0, hi = rho.nodes.back();
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (enclosed(mid) < fraction * total ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Square grid of N x N cells of width h centered on the origin. Cell (i, j)
/// (row i along y, column j along x) has center ((j - N/2 + 1/2) h, (i - N/2 + 1/2) h).
struct PlanarField {
    int N = 0;
    double h = 0.0;
    std::vector<double> values;  // row-major, values[i * N + j]

    PlanarField() = default;
    PlanarField(int n, double spacing) : N(n), h(spacing), values(static_cast<std::size_t>(n) * n, 0.0) {
        if (n < 4 || (n & (n - 1)) != 0) throw ShapeError("planar grid size must be a power of two");
        if (!(spacing > 0.0)) throw DomainError("planar grid spacing must be positive");
    }

    double& operator()(int i, int j) { return values[static_cast<std::size_t>(i) * N + j]; }
    double operator()(int i, int j) const { return values[static_cast<std::size_t>(i) * N + j]; }

    double coord(int idx) const noexcept { return (idx - N / 2 + 0.5) * h; }
    double box_size() const noexcept { return N * h; }
    bool same_grid(const PlanarField& o) const noexcept { return N == o.N && h == o.h; }
};

inline void require_same_grid(const PlanarField& a, const PlanarField& b) {
    if (!a.same_grid(b)) throw ShapeError("planar fields live on different grids");
}

inline double mass(const PlanarField& f) { return f.h * f.h * compensated_sum(f.values); }

inline double lp_norm(const PlanarField& f, double p) {
    CompensatedSum s;
    for (double v : f.values) s.add(std::pow(std::abs(v), p));
    return std::pow(f.h * f.h * s.value(), 1.0 / p);
}

/// Samples an axisymmetric field at cell centers.
inline PlanarField to_planar(const RadialField& f, int N, double h) {
    PlanarField out(N, h);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) out(i, j) = f.at(std::hypot(out.coord(j), out.coord(i)));
    return out;
}

template <class F>
PlanarField sample_planar(int N, double h, F&& f) {
    PlanarField out(N, h);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) out(i, j) = f(out.coord(j), out.coord(i));
    return out;
}

/// Extent of the cells with |value| above rel * max|value|: the longer side
/// of their bounding box, cell widths included.
inline double support_diameter(const PlanarField& f, double rel = 1e-6) {
    double peak = 0.0;
    for (double v : f.values) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) return 0.0;
    int i0 = f.N, i1 = -1, j0 = f.N, j1 = -1;
    for (int i = 0; i < f.N; ++i)
        for (int j = 0; j < f.N; ++j)
            if (std::abs(f(i, j)) > rel * peak) {
                i0 = std::min(i0, i);
                i1 = std::max(i1, i);
                j0 = std::min(j0, j);
                j1 = std::max(j1, j);
            }
    return std::max(j1 - j0 + 1, i1 - i0 + 1) * f.h;
}

}  // namespace flatgrav::poisson
