#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "flatgrav/core/parallel.hpp"
#include "flatgrav/dynamics/particles.hpp"
#include "flatgrav/poisson/fields.hpp"
#include "flatgrav/poisson/planar.hpp"

namespace flatgrav::dynamics {

namespace detail {

/// Cloud-in-cell stencil: lower cell indices and weights along each axis.
struct Cic {
    int i0, j0;  // row (y), column (x)
    double ty, tx;
};

/// False if the 2x2 stencil is not inside the grid.
inline bool cic_stencil(int N, double h, double x, double y, Cic& c) {
    const double fx = x / h + 0.5 * N - 0.5, fy = y / h + 0.5 * N - 0.5;
    if (!(fx >= 0.0 && fy >= 0.0 && fx < N - 1 && fy < N - 1)) return false;
    c.j0 = static_cast<int>(fx);
    c.i0 = static_cast<int>(fy);
    c.tx = fx - c.j0;
    c.ty = fy - c.i0;
    return true;
}

}  // namespace detail

inline constexpr int deposit_chunks = 16;

/// Removes particles whose CIC stencil leaves the grid; returns the mass removed.
inline double drop_escapers(ParticleEnsemble& e, int N, double h) {
    std::size_t keep = 0;
    detail::Cic c;
    for (std::size_t k = 0; k < e.size(); ++k) {
        if (!detail::cic_stencil(N, h, e.x[k], e.y[k], c)) continue;
        e.x[keep] = e.x[k];
        e.y[keep] = e.y[k];
        e.vx[keep] = e.vx[k];
        e.vy[keep] = e.vy[k];
        ++keep;
    }
    const double lost = e.weight * static_cast<double>(e.size() - keep);
    e.x.resize(keep);
    e.y.resize(keep);
    e.vx.resize(keep);
    e.vy.resize(keep);
    return lost;
}

/// Surface density by cloud-in-cell deposition. Particles are split into a
/// fixed number of chunks with private grids summed in chunk order, so the
/// result does not depend on the thread count. Particles whose stencil
/// leaves the grid are skipped; drop them first to keep the mass honest.
inline poisson::PlanarField deposit(const ParticleEnsemble& e, int N, double h) {
    const std::size_t cells = static_cast<std::size_t>(N) * N;
    std::vector<std::vector<double>> partial(deposit_chunks);
    parallel_chunks(deposit_chunks, [&](int c) {
        std::vector<double> g(cells, 0.0);
        auto [lo, hi] = chunk_range(e.size(), deposit_chunks, c);
        detail::Cic s;
        for (std::size_t k = lo; k < hi; ++k) {
            if (!detail::cic_stencil(N, h, e.x[k], e.y[k], s)) continue;
            const std::size_t base = static_cast<std::size_t>(s.i0) * N + s.j0;
            g[base] += (1 - s.ty) * (1 - s.tx);
            g[base + 1] += (1 - s.ty) * s.tx;
            g[base + N] += s.ty * (1 - s.tx);
            g[base + N + 1] += s.ty * s.tx;
        }
        partial[c] = std::move(g);
    });
    poisson::PlanarField rho(N, h);
    const double scale = e.weight / (h * h);
    for (const auto& g : partial)
        for (std::size_t q = 0; q < cells; ++q) rho.values[q] += g[q];
    for (double& v : rho.values) v *= scale;
    return rho;
}

/// Grid force interpolated to the particles with the deposit kernel.
inline void interpolate(const poisson::VectorField& force, const ParticleEnsemble& e, std::vector<double>& ax,
                        std::vector<double>& ay) {
    const int N = force.x.N;
    const double h = force.x.h;
    ax.assign(e.size(), 0.0);
    ay.assign(e.size(), 0.0);
    parallel_chunks(deposit_chunks, [&](int c) {
        auto [lo, hi] = chunk_range(e.size(), deposit_chunks, c);
        detail::Cic s;
        for (std::size_t k = lo; k < hi; ++k) {
            if (!detail::cic_stencil(N, h, e.x[k], e.y[k], s)) continue;
            const std::size_t base = static_cast<std::size_t>(s.i0) * N + s.j0;
            const double w00 = (1 - s.ty) * (1 - s.tx), w01 = (1 - s.ty) * s.tx, w10 = s.ty * (1 - s.tx),
                         w11 = s.ty * s.tx;
            const auto& fx = force.x.values;
            const auto& fy = force.y.values;
            ax[k] = w00 * fx[base] + w01 * fx[base + 1] + w10 * fx[base + N] + w11 * fx[base + N + 1];
            ay[k] = w00 * fy[base] + w01 * fy[base + 1] + w10 * fy[base + N] + w11 * fy[base + N + 1];
        }
    });
}

/// Self-consistent fields of an ensemble on a fixed grid.
class SelfGravity {
public:
    SelfGravity(int N, double h) : solver_(N, h) {}

    int N() const noexcept { return solver_.N(); }
    double h() const noexcept { return solver_.h(); }
    poisson::PlanarPoissonSolver& solver() noexcept { return solver_; }

    struct Fields {
        poisson::PlanarField rho;
        poisson::PlanarField u;
    };

    /// Deposit, potential, forces and particle accelerations.
    Fields update(const ParticleEnsemble& e, std::vector<double>& ax, std::vector<double>& ay) {
        Fields f{deposit(e, N(), h()), poisson::PlanarField(N(), h())};
        f.u = solver_.potential(f.rho, false);
        interpolate(poisson::force_field(f.u), e, ax, ay);
        return f;
    }

private:
    poisson::PlanarPoissonSolver solver_;
};

/// Kick-drift-kick leapfrog with an arbitrary acceleration callback
/// accel(ensemble, ax, ay). ax, ay hold the accelerations at the current
/// positions on entry and at the new positions on exit.
template <class Accel>
void kdk_step(ParticleEnsemble& e, std::vector<double>& ax, std::vector<double>& ay, double dt, Accel&& accel) {
    const double half = 0.5 * dt;
    for (std::size_t k = 0; k < e.size(); ++k) {
        e.vx[k] += half * ax[k];
        e.vy[k] += half * ay[k];
        e.x[k] += dt * e.vx[k];
        e.y[k] += dt * e.vy[k];
    }
    accel(e, ax, ay);
    for (std::size_t k = 0; k < e.size(); ++k) {
        e.vx[k] += half * ax[k];
        e.vy[k] += half * ay[k];
    }
}

}  // namespace flatgrav::dynamics
