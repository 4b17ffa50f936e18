#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "flatgrav/casimir/reduction.hpp"
#include "flatgrav/core/error.hpp"
#include "flatgrav/core/quadrature.hpp"
#include "flatgrav/steady/solver.hpp"

namespace flatgrav::steady {

/// Kinetic steady state f0(x, v) = (phi')^{-1}((E0 - |v|^2/2 - U0(x))_+).
class LiftedState {
public:
    LiftedState(std::shared_ptr<const SteadyStateSolution> solution, ConvexModel phi)
        : sol_(std::move(solution)), phi_(std::move(phi)), e0_(sol_->e0) {
        const double umin = *std::min_element(sol_->u0.values.begin(), sol_->u0.values.end());
        f_max_ = g(e0_ - umin);
    }

    const SteadyStateSolution& solution() const noexcept { return *sol_; }
    const ConvexModel& phi() const noexcept { return phi_; }
    double e0() const noexcept { return e0_; }
    double f_max() const noexcept { return f_max_; }
    double support_radius() const noexcept { return sol_->support_radius; }

    /// Same state with another cut-off energy, for sensitivity checks.
    LiftedState with_e0(double e0) const {
        LiftedState out = *this;
        out.e0_ = e0;
        const double umin = *std::min_element(sol_->u0.values.begin(), sol_->u0.values.end());
        out.f_max_ = out.g(e0 - umin);
        return out;
    }

    /// (phi')^{-1}(t_+).
    double g(double t) const { return t > 0.0 ? phi_.inv_deriv(t) : 0.0; }

    double potential(double r) const { return potential_at(*sol_, r); }
    double depth(double r) const { return e0_ - potential(r); }

    double f0(double r, double speed) const { return g(depth(r) - 0.5 * speed * speed); }
    double f0(double x, double y, double vx, double vy) const {
        return f0(std::hypot(x, y), std::hypot(vx, vy));
    }

    /// f0(x, .) vanishes for |v| >= v_bound(|x|).
    double v_bound(double r) const {
        const double d = depth(r);
        return d > 0.0 ? std::sqrt(2.0 * d) : 0.0;
    }

    /// int f0 dv = 2 pi int_0^dE g(dE - s) ds.
    double velocity_density(double r) const {
        return polar([&](double t) { return g(t); }, depth(r));
    }
    /// int |v|^2/2 f0 dv = 2 pi int_0^dE s g(dE - s) ds.
    double kinetic_density(double r) const {
        const double d = depth(r);
        return polar([&](double t) { return (d - t) * g(t); }, d);
    }
    /// int phi(f0) dv = 2 pi int_0^dE phi(g(dE - s)) ds.
    double casimir_density(double r) const {
        return polar([&](double t) { return phi_.value(g(t)); }, depth(r));
    }

private:
    template <class F>
    static double polar(F&& f, double d) {
        if (!(d > 0.0)) return 0.0;
        return 2.0 * std::numbers::pi * tanh_sinh_integrate(f, 0.0, d, 7);
    }

    std::shared_ptr<const SteadyStateSolution> sol_;
    ConvexModel phi_;
    double e0_;
    double f_max_ = 0.0;
};

/// Largest relative difference between reduce(phi) and psi at 32 densities
/// spanning the occupied range.
inline double model_mismatch(const ConvexModel& phi, const ConvexModel& psi, double rho_max) {
    const ConvexModel reduced = casimir::reduce_phi_to_psi(phi);
    double worst = 0.0;
    for (int i = 0; i < 32; ++i) {
        const double rho = rho_max * std::pow(1e-3, 1.0 - i / 31.0);
        const double a = reduced.value(rho), b = psi.value(rho);
        worst = std::max(worst, std::abs(a - b) / std::abs(b));
    }
    return worst;
}

inline LiftedState lift(std::shared_ptr<const SteadyStateSolution> solution, const ConvexModel& phi,
                        double tolerance = 1e-5) {
    const double rho_max = *std::max_element(solution->rho0.values.begin(), solution->rho0.values.end());
    if (rho_max > 0.0) {
        const double err = model_mismatch(phi, solution->psi, rho_max);
        if (!(err <= tolerance))
            throw ModelMismatchError("phi does not reduce to the solution's psi (relative error " + std::to_string(err) +
                                     ")");
    }
    return LiftedState(std::move(solution), phi);
}

inline LiftedState lift(const SteadyStateSolution& solution, const ConvexModel& phi, double tolerance = 1e-5) {
    return lift(std::make_shared<const SteadyStateSolution>(solution), phi, tolerance);
}

}  // namespace flatgrav::steady
