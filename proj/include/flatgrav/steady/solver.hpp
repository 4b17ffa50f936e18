#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "flatgrav/casimir/convex_model.hpp"
#include "flatgrav/casimir/reduction.hpp"
#include "flatgrav/core/error.hpp"
#include "flatgrav/core/quadrature.hpp"
#include "flatgrav/poisson/fields.hpp"
#include "flatgrav/poisson/radial.hpp"

namespace flatgrav::steady {

using casimir::ConvexModel;
using poisson::RadialField;

/// Geometric radial grid in units of a length scale fixed by the initial guess.
struct RadialGridSpec {
    std::size_t count = 512;
    double inner = 1e-3;
    double outer = 20.0;
};

struct SolverConfig {
    double theta = 0.5;
    double tolerance = 1e-8;     // relative L1 change per step
    double el_tolerance = 1e-6;  // relative L1 Euler-Lagrange residual
    int max_iterations = 20000;
    int patience = 25;  // consecutive rejected steps before giving up
    /// Return the current iterate instead of throwing when max_iterations is hit.
    bool allow_unconverged = false;
};

struct SteadyProblem {
    ConvexModel psi;
    std::optional<ConvexModel> phi;
    double mass = 1.0;
    RadialGridSpec grid;
    SolverConfig solver;
    /// Starting density; its nodes become the solver grid.
    std::optional<RadialField> initial;

    void validate() const;
};

struct Energies {
    double e_pot = 0.0;
    double casimir = 0.0;
    double h = 0.0;
};

struct Residuals {
    double el = 0.0;
    double virial = 0.0;
    double hydrostatic = 0.0;
    double mass_error = 0.0;
};

struct SteadyStateSolution {
    ConvexModel psi;
    std::optional<ConvexModel> phi;
    double mass = 0.0;
    RadialField rho0;
    RadialField u0;
    double e0 = 0.0;
    double support_radius = 0.0;
    Energies energies;
    Residuals residuals;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
    double theta = 0.0;
};

/// (n_small, n_large): polytropic indices fitted at low and high density.
inline std::pair<double, double> fitted_indices(const ConvexModel& psi) {
    if (psi.is_polytrope()) {
        const double n = 1.0 / (psi.exponent() - 1.0);
        return {n, n};
    }
    const auto& a = psi.args();
    const auto& v = psi.values();
    const double lo = a.size() > 1 ? a[1] : a[0];
    const double hi = a.back();
    const double small = casimir::fit_log_slope(a, v, lo, lo * 10.0);
    const double large = casimir::fit_log_slope(a, v, hi / 10.0, hi);
    return {1.0 / (small - 1.0), 1.0 / (large - 1.0)};
}

inline void SteadyProblem::validate() const {
    if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigurationError("M must be positive");
    const auto [ns, nl] = fitted_indices(psi);
    auto ok = [](double n) { return n > 0.0 && n < 2.0; };
    if (!ok(ns) || !ok(nl))
        throw ModelError("psi must behave like rho^(1+1/n) with n in (0,2); fitted n = " + std::to_string(ns) + ", " +
                         std::to_string(nl));
    if (grid.count < 16) throw ConfigurationError("radial grid needs at least 16 nodes");
    if (!(grid.inner > 0.0) || !(grid.outer > grid.inner)) throw ConfigurationError("invalid radial grid extent");
    const SolverConfig& s = solver;
    if (!(s.theta > 0.0 && s.theta <= 1.0)) throw ConfigurationError("theta must lie in (0, 1]");
    if (!(s.tolerance > 0.0) || !(s.el_tolerance > 0.0)) throw ConfigurationError("tolerances must be positive");
    if (s.max_iterations < 1 || s.patience < 1) throw ConfigurationError("iteration limits must be positive");
    if (initial && initial->values.size() != initial->nodes.size()) throw ShapeError("initial guess is malformed");
}

/// (psi')^{-1}(s) for s > 0, else 0.
inline double density_of(const ConvexModel& psi, double s) { return s > 0.0 ? psi.inv_deriv(s) : 0.0; }

/// 2 pi int (psi')^{-1}((E0 - U(r))_+) r dr with U piecewise linear. Each
/// panel is clipped at the crossing U = E0, so the edge cell is integrated
/// on its exact support.
inline double cutoff_mass(const ConvexModel& psi, const RadialField& u, double e0) {
    u.validate();
    const double umin = *std::min_element(u.values.begin(), u.values.end());
    if (e0 <= umin) return 0.0;
    const double pi = std::numbers::pi;
    CompensatedSum total;
    total.add(pi * u.nodes[0] * u.nodes[0] * density_of(psi, e0 - u.values[0]));
    for (std::size_t j = 0; j + 1 < u.size(); ++j) {
        const double a = u.nodes[j], b = u.nodes[j + 1];
        const double ua = u.values[j], ub = u.values[j + 1];
        if (ua >= e0 && ub >= e0) continue;
        double lo = a, hi = b;
        if (ua >= e0) lo = a + (b - a) * (ua - e0) / (ua - ub);
        if (ub >= e0) hi = a + (b - a) * (e0 - ua) / (ub - ua);
        if (!(hi > lo)) continue;
        auto g = [&](double r) {
            const double ur = ua + (ub - ua) * (r - a) / (b - a);
            return 2.0 * pi * r * density_of(psi, e0 - ur);
        };
        total.add(gauss_integrate<16>(g, lo, hi));
    }
    return total.value();
}

namespace detail {

/// Nodal potential operator made self-adjoint in the area-weighted inner
/// product, so that the discrete E_pot is a quadratic form and the
/// linearized step is a true descent step.
class SymmetricPotential {
public:
    SymmetricPotential(const std::vector<double>& nodes, const std::vector<double>& w) : n_(nodes.size()) {
        const poisson::RadialPotentialOperator op(nodes);
        const std::vector<double>& a = op.matrix();
        m_.resize(n_ * n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) m_[i * n_ + j] = 0.5 * (a[i * n_ + j] + a[j * n_ + i] * w[j] / w[i]);
    }

    std::vector<double> apply(const std::vector<double>& rho) const {
        std::vector<double> u(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const double* row = &m_[i * n_];
            double s = 0.0;
            for (std::size_t j = 0; j < n_; ++j) s += row[j] * rho[j];
            u[i] = s;
        }
        return u;
    }

private:
    std::size_t n_;
    std::vector<double> m_;
};

struct Discrete {
    std::vector<double> r, w;
    SymmetricPotential op;

    explicit Discrete(std::vector<double> nodes)
        : r(nodes), w(poisson::radial_weights(nodes)), op(r, w) {}

    double dot(const std::vector<double>& a, const std::vector<double>& b) const {
        CompensatedSum s;
        for (std::size_t j = 0; j < a.size(); ++j) s.add(w[j] * a[j] * b[j]);
        return s.value();
    }

    double casimir(const ConvexModel& psi, const std::vector<double>& rho) const {
        CompensatedSum s;
        for (std::size_t j = 0; j < rho.size(); ++j) s.add(w[j] * psi.value(rho[j]));
        return s.value();
    }

    double l1(const std::vector<double>& a, const std::vector<double>& b) const {
        CompensatedSum s;
        for (std::size_t j = 0; j < a.size(); ++j) s.add(w[j] * std::abs(a[j] - b[j]));
        return s.value();
    }

    double nodal_mass(const ConvexModel& psi, const std::vector<double>& u, double e0) const {
        CompensatedSum s;
        for (std::size_t j = 0; j < u.size(); ++j) s.add(w[j] * density_of(psi, e0 - u[j]));
        return s.value();
    }

    /// E0 in [min U, 0) with nodal mass M, bisected to adjacent doubles.
    double multiplier(const ConvexModel& psi, const std::vector<double>& u, double M) const {
        double lo = *std::min_element(u.begin(), u.end());
        if (!(lo < 0.0)) throw ConfigurationError("potential is not negative anywhere; cannot bracket E0");
        double hi = 0.0;
        double m_hi;
        try {
            m_hi = nodal_mass(psi, u, -1e-300);
        } catch (const ExtrapolationError&) {
            m_hi = std::numeric_limits<double>::infinity();
        }
        if (!(m_hi >= M))
            throw ConfigurationError("mass bracket failure: E0 -> 0 encloses only " + std::to_string(m_hi) +
                                     " < M; enlarge the radial grid");
        for (int it = 0; it < 400; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid == lo || mid == hi) break;
            double m;
            try {
                m = nodal_mass(psi, u, mid);
            } catch (const ExtrapolationError&) {
                m = std::numeric_limits<double>::infinity();
            }
            (m < M ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    /// (psi')^{-1}((E0 - U)_+), rescaled to nodal mass M so that the
    /// residual mass error of the bisection does not enter H at first order.
    std::vector<double> response(const ConvexModel& psi, const std::vector<double>& u, double e0, double M) const {
        std::vector<double> out(u.size());
        for (std::size_t j = 0; j < u.size(); ++j) out[j] = density_of(psi, e0 - u[j]);
        const double m = dot(out, std::vector<double>(out.size(), 1.0));
        if (m > 0.0)
            for (double& v : out) v *= M / m;
        return out;
    }
};

/// H of a Gaussian of unit-free scale s and mass M, from closed-form E_pot.
inline double gaussian_h(const ConvexModel& psi, double M, double s) {
    const double pi = std::numbers::pi;
    const double peak = M / (2.0 * pi * s * s);
    double cas = 0.0;
    try {
        for (int p = 0; p < 48; ++p) {
            const double a = 0.25 * s * p, b = a + 0.25 * s;
            cas += gauss_integrate<16>(
                [&](double r) { return 2.0 * pi * r * psi.value(peak * std::exp(-0.5 * r * r / (s * s))); }, a, b);
        }
    } catch (const ExtrapolationError&) {
        return std::numeric_limits<double>::infinity();
    }
    return cas - M * M * std::sqrt(pi) / (4.0 * s);
}

/// Scale of the H-minimizing Gaussian: coarse log scan, then golden section.
inline double gaussian_prescan(const ConvexModel& psi, double M) {
    double best_s = 1.0, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 60; ++i) {
        const double s = std::pow(10.0, -3.0 + 0.1 * i);
        const double h = gaussian_h(psi, M, s);
        if (h < best) {
            best = h;
            best_s = s;
        }
    }
    if (!std::isfinite(best)) throw ConfigurationError("no finite-energy Gaussian initial guess");
    double a = std::log(best_s) - 0.1 * std::log(10.0), b = std::log(best_s) + 0.1 * std::log(10.0);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = gaussian_h(psi, M, std::exp(c)), fd = gaussian_h(psi, M, std::exp(d));
    for (int it = 0; it < 60; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = gaussian_h(psi, M, std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = gaussian_h(psi, M, std::exp(d));
        }
    }
    return std::exp(0.5 * (a + b));
}

}  // namespace detail

/// Radius where the piecewise-linear U crosses E0 beyond the last occupied node.
inline double support_edge(const RadialField& rho, const RadialField& u, double e0) {
    std::size_t last = rho.size();
    for (std::size_t j = rho.size(); j-- > 0;)
        if (rho.values[j] > 0.0) {
            last = j;
            break;
        }
    if (last == rho.size()) return 0.0;
    if (last + 1 == rho.size()) return rho.nodes.back();
    const double ua = u.values[last], ub = u.values[last + 1];
    const double a = u.nodes[last], b = u.nodes[last + 1];
    if (!(ub > ua) || e0 <= ua) return a;
    return a + (b - a) * std::clamp((e0 - ua) / (ub - ua), 0.0, 1.0);
}

/// Scalars and residuals of a state (rho, U, E0) on a common radial grid.
inline void evaluate_state(SteadyStateSolution& s) {
    const RadialField& rho = s.rho0;
    const RadialField& u = s.u0;
    const std::vector<double> w = poisson::radial_weights(rho.nodes);
    const std::size_t J = rho.size();
    CompensatedSum epot, cas, press, el, m;
    for (std::size_t j = 0; j < J; ++j) {
        epot.add(0.5 * w[j] * u.values[j] * rho.values[j]);
        cas.add(w[j] * s.psi.value(rho.values[j]));
        press.add(w[j] * casimir::pressure(s.psi, rho.values[j]));
        m.add(w[j] * rho.values[j]);
        el.add(w[j] * std::abs(rho.values[j] - density_of(s.psi, s.e0 - u.values[j])));
    }
    s.energies = {epot.value(), cas.value(), epot.value() + cas.value()};
    const double M = s.mass;
    s.residuals.el = M > 0.0 ? el.value() / M : el.value();
    s.residuals.mass_error = M > 0.0 ? std::abs(m.value() - M) / M : std::abs(m.value());
    const double ep = s.energies.e_pot;
    s.residuals.virial = ep != 0.0 ? std::abs(2.0 * press.value() + ep) / std::abs(ep) : 0.0;

    std::vector<double> p(J);
    for (std::size_t j = 0; j < J; ++j) p[j] = casimir::pressure(s.psi, rho.values[j]);
    const std::vector<double> dp = poisson::radial_derivative(rho.nodes, p);
    const std::vector<double> du = poisson::radial_derivative(u.nodes, u.values);
    double worst = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        if (!(rho.values[j] > 0.0)) continue;
        worst = std::max(worst, std::abs(dp[j] + rho.values[j] * du[j]));
        scale = std::max(scale, std::abs(rho.values[j] * du[j]));
    }
    s.residuals.hydrostatic = scale > 0.0 ? worst / scale : 0.0;
    s.support_radius = support_edge(rho, u, s.e0);
}

namespace detail {

/// One damped fixed-point run on a fixed radial grid.
inline SteadyStateSolution solve_on_grid(const SteadyProblem& problem, std::vector<double> nodes,
                                         std::vector<double> rho) {
    const ConvexModel& psi = problem.psi;
    const double M = problem.mass;
    const SolverConfig& cfg = problem.solver;
    const Discrete D(nodes);
    {
        for (double& v : rho) v = std::max(0.0, v);
        const double m0 = D.dot(rho, std::vector<double>(rho.size(), 1.0));
        for (double& v : rho) v *= M / m0;
    }

    std::vector<double> u = D.op.apply(rho);
    double h = D.casimir(psi, rho) + 0.5 * D.dot(u, rho);
    std::vector<double> trace{h};
    double theta = cfg.theta;
    int rejections = 0, it = 0;
    bool converged = false;
    double change = std::numeric_limits<double>::infinity();
    double e0 = 0.0;

    while (it < cfg.max_iterations) {
        e0 = D.multiplier(psi, u, M);
        const std::vector<double> target = D.response(psi, u, e0, M);
        const double el = D.l1(rho, target) / M;
        if (el <= cfg.el_tolerance && change <= cfg.tolerance) {
            converged = true;
            break;
        }
        ++it;
        std::vector<double> trial(rho.size());
        for (std::size_t j = 0; j < rho.size(); ++j) trial[j] = (1.0 - theta) * rho[j] + theta * target[j];
        std::vector<double> u_trial = D.op.apply(trial);
        const double h_trial = D.casimir(psi, trial) + 0.5 * D.dot(u_trial, trial);
        // allow for rounding in H once the step has become tiny
        if (h_trial > h + 1e-13 * std::abs(h)) {
            theta *= 0.5;
            if (++rejections >= cfg.patience)
                throw DivergenceError("H increased on " + std::to_string(rejections) +
                                      " consecutive steps; retry with a smaller theta");
            continue;
        }
        rejections = 0;
        change = D.l1(trial, rho) / M;
        rho = std::move(trial);
        u = std::move(u_trial);
        h = h_trial;
        trace.push_back(h);
    }

    if (converged) {
        // undamped steps until the support is exactly {U < E0}
        for (int k = 0; k < 20; ++k) {
            const std::vector<double> target = D.response(psi, u, e0, M);
            std::vector<double> u_next = D.op.apply(target);
            const double e_next = D.multiplier(psi, u_next, M);
            bool match = true;
            for (std::size_t j = 0; j < target.size(); ++j)
                if ((target[j] > 0.0) != (u_next[j] < e_next)) match = false;
            const double h_next = D.casimir(psi, target) + 0.5 * D.dot(u_next, target);
            if (h_next > h + 1e-13 * std::abs(h)) break;
            rho = target;
            u = std::move(u_next);
            e0 = e_next;
            h = h_next;
            trace.push_back(h);
            if (match) break;
        }
    } else if (!cfg.allow_unconverged) {
        const double el = D.l1(rho, D.response(psi, u, D.multiplier(psi, u, M), M)) / M;
        throw AccuracyError("steady solver did not converge in " + std::to_string(cfg.max_iterations) + " iterations",
                            el);
    } else {
        e0 = D.multiplier(psi, u, M);
    }

    SteadyStateSolution sol{psi, problem.phi, M, RadialField(nodes, rho), RadialField(nodes, u), e0};
    sol.trace = std::move(trace);
    sol.iterations = it;
    sol.converged = converged;
    sol.theta = theta;
    evaluate_state(sol);
    return sol;
}

}  // namespace detail

/// Minimizes H(rho) = int psi(rho) + E_pot(rho) over axisymmetric densities
/// of mass M by the damped fixed-point iteration rho <- (1-theta) rho +
/// theta (psi')^{-1}((E0 - U[rho])_+), with steps that raise H rejected and
/// theta halved. Without an initial guess the grid is scaled by the
/// half-mass radius, first of the best Gaussian and then of the computed
/// minimizer until it settles.
inline SteadyStateSolution solve_reduced(const SteadyProblem& problem) {
    problem.validate();
    const double M = problem.mass;
    if (problem.initial) {
        problem.initial->validate();
        const double m0 = poisson::mass(*problem.initial);
        if (!(m0 > 0.0)) throw ConfigurationError("initial guess has no mass");
        return detail::solve_on_grid(problem, problem.initial->nodes, problem.initial->values);
    }

    const RadialGridSpec& g = problem.grid;
    const double s = detail::gaussian_prescan(problem.psi, M);
    double rh = s * std::sqrt(2.0 * std::log(2.0));
    std::vector<double> nodes = poisson::geometric_radii(g.inner * rh, g.outer * rh, g.count);
    std::vector<double> rho(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j)
        rho[j] = M / (2.0 * std::numbers::pi * s * s) * std::exp(-0.5 * nodes[j] * nodes[j] / (s * s));

    SteadyStateSolution sol = detail::solve_on_grid(problem, nodes, rho);
    for (int pass = 0; pass < 6 && sol.converged; ++pass) {
        const double rh_new = poisson::mass_radius(sol.rho0);
        if (std::abs(rh_new / rh - 1.0) < 1e-2) break;
        rh = rh_new;
        nodes = poisson::geometric_radii(g.inner * rh, g.outer * rh, g.count);
        for (std::size_t j = 0; j < nodes.size(); ++j) rho[j] = sol.rho0.at(nodes[j]);
        if (!(*std::max_element(rho.begin(), rho.end()) > 0.0)) rho.assign(nodes.size(), 1.0);
        sol = detail::solve_on_grid(problem, nodes, rho);
    }
    return sol;
}

/// Potential of the steady state on a geometric grid reaching `factor` times
/// the solver grid, for evaluation far outside the support.
inline RadialField potential_profile(const SteadyStateSolution& s, std::size_t count = 2048, double factor = 1e3) {
    const auto radii = poisson::geometric_radii(s.rho0.nodes.front(), s.rho0.nodes.back() * factor, count);
    return poisson::potential_radial(s.rho0, radii);
}

/// U0 at radius r: grid interpolation inside, monopole beyond the grid.
inline double potential_at(const SteadyStateSolution& s, double r) {
    if (r <= s.u0.nodes.back()) return s.u0.at(r);
    return -s.mass / r;
}

/// 2 pi sqrt(r_h / |F(r_h)|) at the half-mass radius.
inline double dynamical_time(const SteadyStateSolution& s) {
    const double rh = poisson::mass_radius(s.rho0);
    const std::vector<double> du = poisson::radial_derivative(s.u0.nodes, s.u0.values);
    const double force = RadialField(s.u0.nodes, du).at(rh);
    if (!(std::abs(force) > 0.0)) throw DomainError("vanishing force at the half-mass radius");
    return 2.0 * std::numbers::pi * std::sqrt(rh / std::abs(force));
}

}  // namespace flatgrav::steady
