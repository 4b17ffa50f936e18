#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "flatgrav/poisson/fields.hpp"
#include "flatgrav/poisson/planar.hpp"

namespace flatgrav::poisson {

struct ShiftResult {
    std::array<double, 2> shift{0.0, 0.0};  // a such that rho(x) ~ rho0(x - a), length units
    double distance = 0.0;                  // || rho - T_a rho0 ||_pot
    double raw_distance = 0.0;              // || rho - rho0 ||_pot
};

/// rho0 translated by an integer number of cells (sx along x, sy along y);
/// cells shifted in from outside the grid are zero.
inline PlanarField shift_cells(const PlanarField& f, int sx, int sy) {
    PlanarField out(f.N, f.h);
    for (int i = 0; i < f.N; ++i) {
        const int si = i - sy;
        if (si < 0 || si >= f.N) continue;
        for (int j = 0; j < f.N; ++j) {
            const int sj = j - sx;
            if (sj >= 0 && sj < f.N) out(i, j) = f(si, sj);
        }
    }
    return out;
}

/// Minimizes || rho - T_a rho0 ||_pot over shifts a. The cross term
/// <rho, T_s rho0>_pot is evaluated for every integer shift |s| <= N/2 with
/// one FFT correlation on a (3N)^2 grid, the maximum refined by a parabola
/// per axis, and the distance re-evaluated directly at both the integer and
/// the refined shift.
class ShiftSearch {
public:
    ShiftSearch(int N, double h) : N_(N), h_(h), P_(3 * N), corr_(3 * N), solver_(N, h), phase_(2 * N) {
        const PotKernelTable table(N, P_);
        std::copy(table.values().begin(), table.values().end(), corr_.real());
        corr_.forward();
        kernel_hat_.assign(corr_.spectrum(), corr_.spectrum() + corr_.spectral_size());
    }

    PlanarPoissonSolver& solver() noexcept { return solver_; }

    double norm(const PlanarField& f) {
        const PlanarField u = solver_.potential(f, false);
        return std::sqrt(std::max(0.0, pot_inner_with(u, f)));
    }

    ShiftResult operator()(const PlanarField& rho, const PlanarField& rho0) {
        require_same_grid(rho, rho0);
        if (rho.N != N_ || rho.h != h_) throw ShapeError("fields do not match the shift search grid");
        ShiftResult res;
        res.raw_distance = norm(difference(rho, rho0));
        res.distance = res.raw_distance;

        const std::vector<double> c = correlation(rho, rho0);
        auto at = [&](int sx, int sy) {
            const int j = (sx % P_ + P_) % P_, i = (sy % P_ + P_) % P_;
            return c[static_cast<std::size_t>(i) * P_ + j];
        };
        const int lim = N_ / 2;
        int bx = 0, by = 0;
        double best = at(0, 0);
        for (int sy = -lim; sy <= lim; ++sy)
            for (int sx = -lim; sx <= lim; ++sx)
                if (at(sx, sy) > best) {
                    best = at(sx, sy);
                    bx = sx;
                    by = sy;
                }

        const double d_int = norm(difference(rho, shift_cells(rho0, bx, by)));
        if (d_int < res.distance) {
            res.distance = d_int;
            res.shift = {bx * h_, by * h_};
        }

        auto vertex = [](double m, double c0, double p) {
            const double curv = m - 2.0 * c0 + p;
            if (!(curv < 0.0)) return 0.0;
            return std::clamp(0.5 * (m - p) / curv, -0.5, 0.5);
        };
        const double dx = (std::abs(bx) < lim) ? vertex(at(bx - 1, by), best, at(bx + 1, by)) : 0.0;
        const double dy = (std::abs(by) < lim) ? vertex(at(bx, by - 1), best, at(bx, by + 1)) : 0.0;
        if (dx != 0.0 || dy != 0.0) {
            const double ax = bx + dx, ay = by + dy;
            const double d_frac = norm(difference(rho, shift_fractional(rho0, ax, ay)));
            if (d_frac < res.distance) {
                res.distance = d_frac;
                res.shift = {ax * h_, ay * h_};
            }
        }
        return res;
    }

    /// rho0 translated by a fractional number of cells (band-limited
    /// interpolation on the zero-padded grid).
    PlanarField shift_fractional(const PlanarField& f, double sx, double sy) {
        const int Q = 2 * N_;
        double* buf = phase_.real();
        std::fill(buf, buf + static_cast<std::size_t>(Q) * Q, 0.0);
        const int off = N_ / 2;
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j) buf[static_cast<std::size_t>(i + off) * Q + j + off] = f(i, j);
        phase_.forward();
        std::complex<double>* s = phase_.spectrum();
        const int W = Q / 2 + 1;
        for (int i = 0; i < Q; ++i) {
            const double ky = (i <= Q / 2 ? i : i - Q);
            for (int j = 0; j < W; ++j) {
                const double kx = j;
                const double arg = -2.0 * std::numbers::pi * (kx * sx + ky * sy) / Q;
                s[static_cast<std::size_t>(i) * W + j] *= std::polar(1.0, arg);
            }
        }
        phase_.backward();
        PlanarField out(N_, h_);
        const double norm = 1.0 / (static_cast<double>(Q) * Q);
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j) out(i, j) = norm * buf[static_cast<std::size_t>(i + off) * Q + j + off];
        return out;
    }

private:
    static PlanarField difference(const PlanarField& a, const PlanarField& b) {
        PlanarField d(a.N, a.h);
        for (std::size_t k = 0; k < d.values.size(); ++k) d.values[k] = a.values[k] - b.values[k];
        return d;
    }

    // c(s) = sum_x sum_z rho(x) rho0(z) G(x - z - s) on the periodic (3N)^2 grid
    std::vector<double> correlation(const PlanarField& rho, const PlanarField& rho0) {
        const std::size_t cells = static_cast<std::size_t>(P_) * P_;
        double* buf = corr_.real();
        auto load = [&](const PlanarField& f) {
            std::fill(buf, buf + cells, 0.0);
            for (int i = 0; i < N_; ++i)
                for (int j = 0; j < N_; ++j) buf[static_cast<std::size_t>(i) * P_ + j] = f(i, j);
            corr_.forward();
            return std::vector<std::complex<double>>(corr_.spectrum(), corr_.spectrum() + corr_.spectral_size());
        };
        const auto a = load(rho);
        const auto b = load(rho0);
        std::complex<double>* s = corr_.spectrum();
        for (std::size_t k = 0; k < a.size(); ++k) s[k] = a[k] * std::conj(b[k]) * kernel_hat_[k];
        corr_.backward();
        return std::vector<double>(buf, buf + cells);
    }

    int N_;
    double h_;
    int P_;
    detail::RealFft2d corr_;
    PlanarPoissonSolver solver_;
    detail::RealFft2d phase_;
    std::vector<std::complex<double>> kernel_hat_;
};

inline ShiftResult best_shift_distance(const PlanarField& rho, const PlanarField& rho0) {
    require_same_grid(rho, rho0);
    ShiftSearch search(rho.N, rho.h);
    return search(rho, rho0);
}

}  // namespace flatgrav::poisson
