#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "flatgrav/core/quadrature.hpp"
#include "flatgrav/poisson/fields.hpp"
#include "flatgrav/poisson/planar.hpp"
#include "flatgrav/steady/lift.hpp"
#include "flatgrav/steady/solver.hpp"

namespace flatgrav::steady {

struct ConsistencyReport {
    double density_error = 0.0;  // max |int f0 dv - rho0| / max rho0 over nodes
    double worst_radius = 0.0;
    double value_error = 0.0;  // |H_C(f0) - H^r(rho0)| / |H^r(rho0)|
    double e_kin = 0.0;
    double casimir_f = 0.0;
    double h_kinetic = 0.0;
    double h_reduced = 0.0;
    double tolerance = 1e-4;
    bool density_ok() const noexcept { return density_error <= tolerance; }
    bool value_ok() const noexcept { return value_error <= tolerance; }
    bool passed() const noexcept { return density_ok() && value_ok(); }
};

/// Compares the velocity moments of the lifted state with rho0 at every
/// grid node, and the kinetic energy-Casimir value with the reduced one.
inline ConsistencyReport consistency_check(const LiftedState& lifted, double tolerance = 1e-4) {
    const SteadyStateSolution& s = lifted.solution();
    const auto& r = s.rho0.nodes;
    const std::vector<double> w = poisson::radial_weights(r);
    ConsistencyReport rep;
    rep.tolerance = tolerance;
    const double rho_max = *std::max_element(s.rho0.values.begin(), s.rho0.values.end());
    const double scale = rho_max > 0.0 ? rho_max : 1.0;
    CompensatedSum kin, cas;
    for (std::size_t j = 0; j < r.size(); ++j) {
        const double err = std::abs(lifted.velocity_density(r[j]) - s.rho0.values[j]) / scale;
        if (err > rep.density_error) {
            rep.density_error = err;
            rep.worst_radius = r[j];
        }
        kin.add(w[j] * lifted.kinetic_density(r[j]));
        cas.add(w[j] * lifted.casimir_density(r[j]));
    }
    rep.e_kin = kin.value();
    rep.casimir_f = cas.value();
    rep.h_kinetic = rep.e_kin + s.energies.e_pot + rep.casimir_f;
    rep.h_reduced = s.energies.h;
    const double diff = std::abs(rep.h_kinetic - rep.h_reduced);
    rep.value_error = rep.h_reduced != 0.0 ? diff / std::abs(rep.h_reduced) : diff;
    return rep;
}

struct EquilibriumReport {
    Residuals residuals;
    double e0 = 0.0;
    double h = 0.0;
    double el_tolerance = 1e-6;
    double tolerance = 1e-3;
    bool e0_negative() const noexcept { return e0 < 0.0; }
    bool passed() const noexcept {
        return residuals.el <= el_tolerance && residuals.virial <= tolerance && residuals.hydrostatic <= tolerance &&
               e0_negative();
    }
};

/// Euler-Lagrange, virial and hydrostatic residuals of (rho0, U0, E0) for
/// the model psi.
inline EquilibriumReport equilibrium_checks(const SteadyStateSolution& solution, const ConvexModel& psi) {
    SteadyStateSolution s = solution;
    s.psi = psi;
    evaluate_state(s);
    EquilibriumReport rep;
    rep.residuals = s.residuals;
    rep.e0 = s.e0;
    rep.h = s.energies.h;
    return rep;
}

struct SymmetryReport {
    double h_radial = 0.0;
    std::vector<double> increases;  // H(perturbed) - H(rho0), per perturbation
    bool all_increase() const noexcept {
        return std::all_of(increases.begin(), increases.end(), [](double d) { return d > 0.0; });
    }
};

/// Planar reduced functional h^2 sum psi(rho) + E_pot(rho).
inline double planar_h(const ConvexModel& psi, poisson::PlanarPoissonSolver& solver, const poisson::PlanarField& rho) {
    CompensatedSum c;
    for (double v : rho.values) c.add(psi.value(v));
    const poisson::PlanarField u = solver.potential(rho);
    return rho.h * rho.h * c.value() - poisson::pot_inner_with(u, rho);
}

/// A posteriori check that non-radial, mass-preserving perturbations of the
/// computed minimizer raise H: angular modes rho0 (1 + eps cos(m phi)) and
/// area-preserving stretches rho0(x / a, a y).
inline SymmetryReport symmetry_check(const SteadyStateSolution& s, int N = 128, double eps = 0.1) {
    const double R = s.support_radius > 0.0 ? s.support_radius : poisson::mass_radius(s.rho0, 0.999);
    const double h = 8.5 * 2.0 * R * (1.0 + eps) / N;
    poisson::PlanarPoissonSolver solver(N, h);
    auto profile = [&](double r) { return s.rho0.at(r); };
    SymmetryReport rep;
    rep.h_radial = planar_h(s.psi, solver, poisson::sample_planar(N, h, [&](double x, double y) {
                                return profile(std::hypot(x, y));
                            }));
    for (int m : {2, 3}) {
        const auto rho = poisson::sample_planar(N, h, [&](double x, double y) {
            return profile(std::hypot(x, y)) * (1.0 + eps * std::cos(m * std::atan2(y, x)));
        });
        rep.increases.push_back(planar_h(s.psi, solver, rho) - rep.h_radial);
    }
    const double a = 1.0 + eps;
    const auto stretched =
        poisson::sample_planar(N, h, [&](double x, double y) { return profile(std::hypot(x / a, a * y)); });
    rep.increases.push_back(planar_h(s.psi, solver, stretched) - rep.h_radial);
    return rep;
}

}  // namespace flatgrav::steady
