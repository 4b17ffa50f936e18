#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "flatgrav/core/error.hpp"
#include "flatgrav/core/random.hpp"
#include "flatgrav/poisson/grid_io.hpp"
#include "flatgrav/steady/lift.hpp"

namespace flatgrav::dynamics {

/// Equal-weight particles in phase space.
struct ParticleEnsemble {
    std::vector<double> x, y, vx, vy;
    double weight = 0.0;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return x.size(); }
    double mass() const noexcept { return weight * static_cast<double>(size()); }

    void reserve(std::size_t n) {
        x.reserve(n);
        y.reserve(n);
        vx.reserve(n);
        vy.reserve(n);
    }
    void push(double px, double py, double pvx, double pvy) {
        x.push_back(px);
        y.push_back(py);
        vx.push_back(pvx);
        vy.push_back(pvy);
    }

    std::array<double, 2> momentum() const noexcept {
        double px = 0.0, py = 0.0;
        for (std::size_t k = 0; k < size(); ++k) {
            px += vx[k];
            py += vy[k];
        }
        return {weight * px, weight * py};
    }

    std::array<double, 2> center_of_mass() const noexcept {
        double cx = 0.0, cy = 0.0;
        for (std::size_t k = 0; k < size(); ++k) {
            cx += x[k];
            cy += y[k];
        }
        const double n = static_cast<double>(size());
        return {cx / n, cy / n};
    }

    double kinetic_energy() const noexcept {
        double s = 0.0;
        for (std::size_t k = 0; k < size(); ++k) s += vx[k] * vx[k] + vy[k] * vy[k];
        return 0.5 * weight * s;
    }

    double v_rms() const noexcept {
        double s = 0.0;
        for (std::size_t k = 0; k < size(); ++k) s += vx[k] * vx[k] + vy[k] * vy[k];
        return size() ? std::sqrt(s / static_cast<double>(size())) : 0.0;
    }

    io::ParticleArrays arrays() const { return {x, y, vx, vy, weight}; }
};

/// Draws Np particles from f0 by rejection against f_max on the product of
/// the spatial support disk and the velocity disk of radius v_max. Accepted
/// points come in antithetic pairs (x, v), (-x, -v), so the ensemble has zero
/// momentum and centre of mass.
inline ParticleEnsemble sample_steady(const steady::LiftedState& lifted, std::size_t np, std::uint64_t seed) {
    if (np < 1) throw DomainError("need at least one particle");
    const steady::SteadyStateSolution& s = lifted.solution();
    const double R = lifted.support_radius();
    const double umin = *std::min_element(s.u0.values.begin(), s.u0.values.end());
    const double vmax = std::sqrt(2.0 * std::max(0.0, lifted.e0() - umin));
    const double fmax = lifted.f_max();
    if (!(R > 0.0) || !(vmax > 0.0) || !(fmax > 0.0)) throw EnvelopeError("steady state has an empty phase-space support");

    Rng rng(seed, Stream::sampling);
    ParticleEnsemble out;
    out.seed = seed;
    out.weight = s.mass / static_cast<double>(np);
    out.reserve(np);
    std::uint64_t trials = 0;
    while (out.size() < np) {
        ++trials;
        // uniform points in the two disks
        const double r = R * std::sqrt(rng.uniform()), a = 2.0 * std::numbers::pi * rng.uniform();
        const double w = vmax * std::sqrt(rng.uniform()), b = 2.0 * std::numbers::pi * rng.uniform();
        const double f = lifted.f0(r, w);
        if (rng.uniform() * fmax < f) {
            const double x = r * std::cos(a), y = r * std::sin(a), vx = w * std::cos(b), vy = w * std::sin(b);
            out.push(x, y, vx, vy);
            if (out.size() < np) out.push(-x, -y, -vx, -vy);
        }
        if (trials == 1000000 && static_cast<double>(out.size()) < 1e-4 * static_cast<double>(trials))
            throw EnvelopeError("rejection sampling acceptance below 1e-4");
    }
    return out;
}

enum class PerturbationKind { none, boost, position_scale, velocity_noise };

struct Perturbation {
    PerturbationKind kind = PerturbationKind::none;
    /// Boost velocity for `boost`; otherwise magnitude[0] is lambda (scale)
    /// or epsilon (noise, in units of v_rms).
    std::array<double, 2> magnitude{0.0, 0.0};
};

inline std::string to_string(PerturbationKind k) {
    switch (k) {
        case PerturbationKind::none: return "none";
        case PerturbationKind::boost: return "boost";
        case PerturbationKind::position_scale: return "position_scale";
        case PerturbationKind::velocity_noise: return "velocity_noise";
    }
    return "none";
}

inline PerturbationKind perturbation_kind(const std::string& name) {
    if (name == "none") return PerturbationKind::none;
    if (name == "boost") return PerturbationKind::boost;
    if (name == "position_scale") return PerturbationKind::position_scale;
    if (name == "velocity_noise") return PerturbationKind::velocity_noise;
    throw ConfigurationError("unknown perturbation '" + name + "'");
}

inline ParticleEnsemble perturb(ParticleEnsemble e, const Perturbation& p, std::uint64_t seed) {
    switch (p.kind) {
        case PerturbationKind::none: break;
        case PerturbationKind::boost:
            for (std::size_t k = 0; k < e.size(); ++k) {
                e.vx[k] += p.magnitude[0];
                e.vy[k] += p.magnitude[1];
            }
            break;
        case PerturbationKind::position_scale: {
            const double lambda = p.magnitude[0];
            if (!(lambda > 0.0)) throw DomainError("position scale must be positive");
            for (std::size_t k = 0; k < e.size(); ++k) {
                e.x[k] *= lambda;
                e.y[k] *= lambda;
            }
            break;
        }
        case PerturbationKind::velocity_noise: {
            const double sigma = p.magnitude[0] * e.v_rms();
            Rng rng(seed, Stream::perturbation);
            for (std::size_t k = 0; k < e.size(); ++k) {
                e.vx[k] += sigma * rng.normal();
                e.vy[k] += sigma * rng.normal();
            }
            break;
        }
    }
    return e;
}

namespace detail {

/// exp(-z) I_0(z) for z >= 0.
inline double scaled_bessel_i0(double z) {
    if (z < 50.0) return std::exp(-z) * std::cyl_bessel_i(0.0, z);
    const double t = 1.0 / (8.0 * z);
    return (1.0 + t * (1.0 + t * (9.0 / 2.0 + t * 75.0 / 2.0))) / std::sqrt(2.0 * std::numbers::pi * z);
}

}  // namespace detail

/// ||f||_p with p = 1 + 1/k for the perturbed phase-space density relative to
/// ||f0||_p. Boosts preserve it; x -> lambda x scales f by lambda^-2 on a
/// lambda^2 larger area; velocity noise convolves f0(x, .) with a Gaussian.
inline double norm_ratio(const steady::LiftedState& lifted, const Perturbation& pert, double v_rms) {
    const casimir::ConvexModel& phi = lifted.phi();
    if (!phi.is_polytrope()) return std::numeric_limits<double>::quiet_NaN();
    const double p = phi.exponent();
    switch (pert.kind) {
        case PerturbationKind::none:
        case PerturbationKind::boost: return 1.0;
        case PerturbationKind::position_scale: return std::pow(pert.magnitude[0], -2.0 + 2.0 / p);
        case PerturbationKind::velocity_noise: break;
    }
    const double sigma = pert.magnitude[0] * v_rms;
    if (!(sigma > 0.0)) return 1.0;
    const auto& nodes = lifted.solution().rho0.nodes;
    const std::vector<double> w = poisson::radial_weights(nodes);
    const double two_pi = 2.0 * std::numbers::pi;
    double base = 0.0, noisy = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        const double vb = lifted.v_bound(nodes[j]);
        if (!(vb > 0.0)) continue;
        auto f = [&](double v) { return lifted.f0(nodes[j], v); };
        base += w[j] * two_pi * gauss_integrate<32>([&](double v) { return v * std::pow(f(v), p); }, 0.0, vb);
        // radial profile of the convolution at speed u
        auto conv = [&](double u) {
            return gauss_integrate<32>(
                [&](double v) {
                    const double z = u * v / (sigma * sigma);
                    const double d = (u - v) * (u - v) / (2.0 * sigma * sigma);
                    return f(v) * v * std::exp(-d) * detail::scaled_bessel_i0(z) / (sigma * sigma);
                },
                0.0, vb);
        };
        const double umax = vb + 8.0 * sigma;
        double acc = 0.0;
        const int panels = 16;
        for (int q = 0; q < panels; ++q) {
            const double a = umax * q / panels, b = umax * (q + 1) / panels;
            acc += gauss_integrate<8>([&](double u) { return u * std::pow(conv(u), p); }, a, b);
        }
        noisy += w[j] * two_pi * acc;
    }
    return std::pow(noisy / base, 1.0 / p);
}

}  // namespace flatgrav::dynamics
