#pragma once

#include "flatgrav/casimir/convex_model.hpp"
#include "flatgrav/core/error.hpp"
#include "flatgrav/core/quadrature.hpp"
#include "flatgrav/poisson/fields.hpp"

namespace flatgrav::casimir {

/// d(rho, rho0) = int [psi(rho) - psi(rho0) + (U0 - E0)(rho - rho0)] dx,
/// the convexity remainder about a steady state (rho0, U0, E0).
inline double d_reduced(const ConvexModel& psi, const poisson::PlanarField& rho, const poisson::PlanarField& rho0,
                        const poisson::PlanarField& u0, double e0) {
    poisson::require_same_grid(rho, rho0);
    poisson::require_same_grid(rho, u0);
    CompensatedSum s;
    for (std::size_t k = 0; k < rho.values.size(); ++k) {
        const double r = rho.values[k], r0 = rho0.values[k];
        s.add(psi.value(r) - psi.value(r0) + (u0.values[k] - e0) * (r - r0));
    }
    return rho.h * rho.h * s.value();
}

inline double d_reduced(const ConvexModel& psi, const poisson::RadialField& rho, const poisson::RadialField& rho0,
                        const poisson::RadialField& u0, double e0) {
    if (rho.nodes != rho0.nodes || rho.nodes != u0.nodes) throw ShapeError("radial fields on different grids");
    std::vector<double> g(rho.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double r = rho.values[j], r0 = rho0.values[j];
        g[j] = psi.value(r) - psi.value(r0) + (u0.values[j] - e0) * (r - r0);
    }
    return poisson::radial_integral(rho.nodes, g);
}

}  // namespace flatgrav::casimir
