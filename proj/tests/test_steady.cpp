#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <filesystem>
#include <memory>
#include <numbers>
#include <random>

#include "flatgrav/casimir/d_reduced.hpp"
#include "flatgrav/casimir/reduction.hpp"
#include "flatgrav/poisson/radial.hpp"
#include "flatgrav/steady/checks.hpp"
#include "flatgrav/steady/lift.hpp"
#include "flatgrav/steady/persist.hpp"
#include "flatgrav/steady/scan.hpp"
#include "flatgrav/steady/solver.hpp"

using namespace flatgrav;
using namespace flatgrav::steady;
using casimir::ConvexModel;
using poisson::RadialField;
using std::numbers::pi;

namespace {

const ConvexModel& phi_half() {
    static const ConvexModel phi = ConvexModel::polytrope_k(1.0, 0.5);
    return phi;
}

const ConvexModel& psi_half() {
    static const ConvexModel psi = casimir::reduce_phi_to_psi(phi_half());
    return psi;
}

const SteadyStateSolution& base_solution() {
    static const SteadyStateSolution s = [] {
        SteadyProblem p{psi_half(), phi_half()};
        return solve_reduced(p);
    }();
    return s;
}

/// H of rho_b(x) = a rho(b x), evaluated afresh on the rescaled grid.
double scaled_h(const ConvexModel& psi, const RadialField& rho, double a, double b) {
    std::vector<double> r(rho.size()), v(rho.size()), c(rho.size());
    for (std::size_t j = 0; j < r.size(); ++j) {
        r[j] = rho.nodes[j] / b;
        v[j] = a * rho.values[j];
        c[j] = psi.value(v[j]);
    }
    const RadialField scaled(r, v);
    return poisson::radial_integral(r, c) + poisson::e_pot(scaled);
}

}  // namespace

TEST(CutoffMass, HarmonicExample) {
    const ConvexModel psi = ConvexModel::polytrope(1.0, 2.0);
    std::vector<double> r(4000), u(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = 3.0 * (j + 1) / r.size();
    for (std::size_t j = 0; j < r.size(); ++j) u[j] = std::min(0.0, -1.0 + r[j] * r[j] / 4.0);
    const double m = cutoff_mass(psi, RadialField(r, u), -0.5);
    auto integrand = [](double s) { return 2 * pi * s * std::max(0.0, 0.5 * (0.5 - s * s / 4.0)); };
    const double oracle = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, std::sqrt(2.0));
    EXPECT_NEAR(oracle, pi / 4, 1e-12);
    EXPECT_NEAR(m, oracle, 1e-6 * oracle);
}

TEST(CutoffMass, EmptyBelowMinimumAndMonotone) {
    const ConvexModel& psi = psi_half();
    const RadialField& u = base_solution().u0;
    const double umin = *std::min_element(u.values.begin(), u.values.end());
    EXPECT_EQ(cutoff_mass(psi, u, umin), 0.0);
    EXPECT_EQ(cutoff_mass(psi, u, umin - 1.0), 0.0);
    double prev = 0.0;
    for (int i = 1; i <= 40; ++i) {
        const double e = umin + (0.0 - umin) * i / 41.0;
        const double m = cutoff_mass(psi, u, e);
        EXPECT_GT(m, prev);
        prev = m;
    }
}

TEST(CutoffMass, MatchesSolverMassAtMultiplier) {
    const auto& s = base_solution();
    EXPECT_NEAR(cutoff_mass(s.psi, s.u0, s.e0), 1.0, 2e-3);
}

TEST(Problem, Validation) {
    SteadyProblem p{psi_half()};
    p.mass = -1.0;
    try {
        p.validate();
        FAIL();
    } catch (const ConfigurationError& e) {
        EXPECT_NE(std::string(e.what()).find("M must be positive"), std::string::npos);
    }
    SteadyProblem q{ConvexModel::polytrope(1.0, 1.5)};  // n = 2
    EXPECT_THROW(q.validate(), ModelError);
    SteadyProblem t{psi_half()};
    t.solver.theta = 0.0;
    EXPECT_THROW(t.validate(), ConfigurationError);
}

TEST(Solver, PolytropeConvergesWithNegativeEnergy) {
    const auto& s = base_solution();
    ASSERT_TRUE(s.converged);
    EXPECT_LE(s.residuals.el, 1e-6);
    EXPECT_LT(s.e0, 0.0);
    EXPECT_LT(s.energies.h, 0.0);
    EXPECT_LE(s.residuals.mass_error, 1e-12);
    EXPECT_LE(s.residuals.virial, 1e-3);
    EXPECT_LE(s.residuals.hydrostatic, 1e-3);
    EXPECT_GT(s.support_radius, 0.0);
}

TEST(Solver, VirialMatchesDilationDerivative) {
    const auto& s = base_solution();
    const double d = 1e-3;
    auto h_of = [&](double b) { return scaled_h(s.psi, s.rho0, b * b, b); };
    const double dh = (h_of(1 + d) - h_of(1 - d)) / (2 * d);
    EXPECT_LE(std::abs(dh) / std::abs(s.energies.e_pot), 1e-3);
    EXPECT_NEAR(std::abs(dh) / std::abs(s.energies.e_pot), s.residuals.virial, 1e-3);
}

TEST(Solver, TraceNonincreasing) {
    const auto& t = base_solution().trace;
    ASSERT_GT(t.size(), 2u);
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LE(t[i], t[i - 1] + 1e-13 * std::abs(t[i - 1])) << i;
}

TEST(Solver, SupportIsSublevelSet) {
    const auto& s = base_solution();
    for (std::size_t j = 0; j < s.rho0.size(); ++j)
        EXPECT_EQ(s.rho0.values[j] > 0.0, s.u0.values[j] < s.e0) << "node " << j;
    for (double v : s.rho0.values) EXPECT_GE(v, 0.0);
}

TEST(Solver, RestartFromMinimizerIsFixedPoint) {
    const auto& s = base_solution();
    SteadyProblem p{psi_half()};
    p.initial = s.rho0;
    const auto r = solve_reduced(p);
    EXPECT_LE(r.iterations, 2);
    const auto w = poisson::radial_weights(s.rho0.nodes);
    double diff = 0;
    for (std::size_t j = 0; j < w.size(); ++j) diff += w[j] * std::abs(r.rho0.values[j] - s.rho0.values[j]);
    EXPECT_LE(diff, 1e-6);
}

TEST(Solver, GridIndependence) {
    SteadyProblem p{psi_half()};
    p.grid.count = 1024;
    const auto fine = solve_reduced(p);
    const double h = base_solution().energies.h;
    EXPECT_LE(std::abs(fine.energies.h - h) / std::abs(h), 1e-4);
}

TEST(Solver, NearCriticalIndexConverges) {
    SteadyProblem p{casimir::reduce_phi_to_psi(ConvexModel::polytrope_k(1.0, 0.9))};
    const auto s = solve_reduced(p);
    EXPECT_TRUE(s.converged);
    EXPECT_LT(s.energies.h, 0.0);
    EXPECT_LE(s.residuals.virial, 1e-3);
}

TEST(Solver, TabulatedModelAgreesWithClosedForm) {
    casimir::ReductionOptions opt;
    opt.prefer_closed_form = false;
    SteadyProblem p{casimir::reduce_phi_to_psi(phi_half(), opt)};
    const auto s = solve_reduced(p);
    EXPECT_NEAR(s.energies.h, base_solution().energies.h, 1e-6 * std::abs(base_solution().energies.h));
}

TEST(Solver, MassBracketFailure) {
    SteadyProblem p{ConvexModel::polytrope(1.0, 2.0)};
    const auto r = poisson::geometric_radii(1e-5, 1e-2, 64);
    p.initial = RadialField(r, std::vector<double>(r.size(), 1.0));
    EXPECT_THROW(solve_reduced(p), ConfigurationError);
}

TEST(Solver, UnconvergedSnapshot) {
    SteadyProblem p{psi_half()};
    p.solver.max_iterations = 1;
    EXPECT_THROW(solve_reduced(p), AccuracyError);
    p.solver.allow_unconverged = true;
    const auto s = solve_reduced(p);
    EXPECT_FALSE(s.converged);
    EXPECT_GT(equilibrium_checks(s, s.psi).residuals.hydrostatic, 1e-2);
    EXPECT_FALSE(equilibrium_checks(s, s.psi).passed());
}

TEST(Equilibrium, ConvergedPolytropePasses) {
    const auto rep = equilibrium_checks(base_solution(), psi_half());
    EXPECT_TRUE(rep.passed());
    EXPECT_TRUE(rep.e0_negative());
}

TEST(Equilibrium, ZeroDensity) {
    const auto r = poisson::geometric_radii(1e-3, 10.0, 64);
    SteadyStateSolution z{psi_half(), std::nullopt, 0.0, RadialField(r, std::vector<double>(64, 0.0)),
                          RadialField(r, std::vector<double>(64, 0.0)), -1.0};
    const auto rep = equilibrium_checks(z, psi_half());
    EXPECT_EQ(rep.residuals.el, 0.0);
    EXPECT_EQ(rep.residuals.virial, 0.0);
    EXPECT_EQ(rep.residuals.hydrostatic, 0.0);
    EXPECT_EQ(rep.residuals.mass_error, 0.0);
}

TEST(Symmetry, NonRadialPerturbationsRaiseEnergy) {
    const auto rep = symmetry_check(base_solution());
    ASSERT_EQ(rep.increases.size(), 3u);
    EXPECT_TRUE(rep.all_increase());
    EXPECT_NEAR(rep.h_radial, base_solution().energies.h, 1e-2 * std::abs(base_solution().energies.h));
}

TEST(Lift, VanishesOutsideSupportAndVelocityBound) {
    const auto lifted = lift(base_solution(), phi_half());
    const auto& s = base_solution();
    for (double r : {s.support_radius * 1.01, s.support_radius * 2, s.u0.nodes.back() * 2})
        for (double v : {0.0, 0.1, 1.0}) EXPECT_EQ(lifted.f0(r, v), 0.0);
    for (double r : {0.1 * s.support_radius, 0.5 * s.support_radius, 0.9 * s.support_radius}) {
        const double vb = lifted.v_bound(r);
        ASSERT_GT(vb, 0.0);
        EXPECT_GT(lifted.f0(r, 0.99 * vb), 0.0);
        EXPECT_EQ(lifted.f0(r, vb * (1 + 1e-12)), 0.0);
        EXPECT_LE(lifted.f0(r, 0.5 * vb), lifted.f0(r, 0.2 * vb));
    }
    EXPECT_GE(lifted.f_max(), lifted.f0(0.0, 0.0));
    EXPECT_NEAR(lifted.f_max(), lifted.f0(0.0, 0.0), 1e-3 * lifted.f_max());
    for (double r : s.rho0.nodes) EXPECT_LE(lifted.f0(r, 0.0), lifted.f_max());
}

TEST(Lift, PolytropeVelocityIntegral) {
    // f0 = (dE - v^2/2)^k / (c p)^k integrates to const * dE^(k+1)
    const auto lifted = lift(base_solution(), phi_half());
    const double k = 0.5, cp = 1.0 * 3.0;
    boost::math::quadrature::tanh_sinh<double> ts;
    for (double r : {0.0, 0.3 * base_solution().support_radius, 0.8 * base_solution().support_radius}) {
        const double d = lifted.depth(r);
        const double vb = std::sqrt(2 * d);
        // Cartesian 2D velocity quadrature over the disk |v| < vb
        const double oracle = ts.integrate([&](double vx) {
            const double ymax = std::sqrt(std::max(0.0, vb * vb - vx * vx));
            return ts.integrate([&](double vy) {
                return std::pow(std::max(0.0, d - 0.5 * (vx * vx + vy * vy)) / cp, k);
            }, -ymax, ymax);
        }, -vb, vb);
        EXPECT_NEAR(lifted.velocity_density(r), oracle, 1e-7 * oracle);
        const double closed = 2 * pi * std::pow(cp, -k) * std::pow(d, k + 1) / (k + 1);
        EXPECT_NEAR(oracle, closed, 1e-7 * closed);
    }
}

TEST(Lift, RejectsMismatchedPhi) {
    EXPECT_THROW(lift(base_solution(), ConvexModel::polytrope_k(2.0, 0.5)), ModelMismatchError);
    EXPECT_THROW(lift(base_solution(), ConvexModel::polytrope_k(1.0, 0.6)), ModelMismatchError);
}

TEST(Consistency, PolytropeChainPasses) {
    const auto rep = consistency_check(lift(base_solution(), phi_half()));
    EXPECT_LE(rep.density_error, 1e-4);
    EXPECT_LE(rep.value_error, 1e-4);
    EXPECT_TRUE(rep.passed());
    EXPECT_GT(rep.e_kin, 0.0);
}

TEST(Consistency, PerturbedMultiplierFails) {
    const auto lifted = lift(base_solution(), phi_half());
    const auto rep = consistency_check(lifted.with_e0(lifted.e0() + 0.01 * std::abs(lifted.e0())));
    EXPECT_FALSE(rep.density_ok());
    EXPECT_GT(rep.worst_radius, 0.0);
}

TEST(Consistency, ZeroStatePasses) {
    const auto r = poisson::geometric_radii(1e-3, 10.0, 64);
    SteadyStateSolution z{psi_half(), std::nullopt, 0.0, RadialField(r, std::vector<double>(64, 0.0)),
                          RadialField(r, std::vector<double>(64, 0.0)), -1.0};
    const auto rep = consistency_check(LiftedState(std::make_shared<const SteadyStateSolution>(z), phi_half()));
    EXPECT_TRUE(rep.passed());
    EXPECT_EQ(rep.density_error, 0.0);
}

TEST(Scan, HalfMassInequalityAndHomogeneity) {
    const auto scan = scan_mass(psi_half(), {0.5, 1.0}, SteadyProblem{psi_half()});
    ASSERT_EQ(scan.rows.size(), 2u);
    EXPECT_TRUE(scan.all_negative());
    ASSERT_EQ(scan.pairs.size(), 1u);
    EXPECT_TRUE(scan.pairs_hold());
    EXPECT_NEAR(scan.rows[0].h / scan.rows[1].h, 0.125, 0.01 * 0.125);
    EXPECT_NEAR(scan.expected_exponent, 3.0, 1e-12);
    EXPECT_NEAR(scan.fitted_exponent, 3.0, 1e-3);
    EXPECT_GE(scan.expected_exponent, 1.5);
}

TEST(Scan, ScalingIdentitiesPredictHalfMassValue) {
    // rho_bar = a rho(b x) with b = a^(1 - 1/n): mass a b^-2, H a^2 b^-3
    const auto& s = base_solution();
    const double n = 1.5, a = 0.125, b = std::pow(a, 1 - 1 / n);
    EXPECT_NEAR(a / (b * b), 0.5, 1e-12);
    const double h_bar = scaled_h(s.psi, s.rho0, a, b);
    EXPECT_NEAR(h_bar / s.energies.h, a * a / (b * b * b), 1e-9);
    SteadyProblem p{psi_half()};
    p.mass = 0.5;
    EXPECT_NEAR(solve_reduced(p).energies.h, h_bar, 1e-4 * std::abs(h_bar));
}

TEST(Scan, SingleMassAndErrors) {
    const auto scan = scan_mass(psi_half(), {1.0}, SteadyProblem{psi_half()});
    EXPECT_EQ(scan.rows.size(), 1u);
    EXPECT_TRUE(scan.pairs.empty());
    EXPECT_TRUE(scan.pairs_hold());
    EXPECT_THROW(scan_mass(psi_half(), {1.0, 0.5}, SteadyProblem{psi_half()}), ConfigurationError);
    SteadyProblem bad{psi_half()};
    bad.solver.max_iterations = 2;
    EXPECT_THROW(scan_mass(psi_half(), {1.0}, bad), PartialResultError);
}

TEST(DynamicalTime, ScalesWithMass) {
    const auto& s = base_solution();
    const double t = dynamical_time(s);
    EXPECT_GT(t, 0.0);
    EXPECT_TRUE(std::isfinite(t));
    SteadyStateSolution heavy = s;
    for (double& v : heavy.rho0.values) v *= 4;
    for (double& v : heavy.u0.values) v *= 4;
    heavy.mass *= 4;
    EXPECT_NEAR(dynamical_time(heavy), 0.5 * t, 1e-12 * t);
    const double rh = poisson::mass_radius(s.rho0);
    EXPECT_NEAR(poisson::mass_radius(s.rho0, 1.0 - 1e-12), s.support_radius, 0.05 * s.support_radius);
    EXPECT_GT(rh, 0.0);
    EXPECT_LT(rh, s.support_radius);
}

TEST(Persist, RoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "flatgrav_solution_test";
    std::filesystem::remove_all(dir);
    save_solution(dir, base_solution());
    const auto back = load_solution(dir);
    const auto& s = base_solution();
    EXPECT_EQ(back.rho0.nodes, s.rho0.nodes);
    EXPECT_EQ(back.rho0.values, s.rho0.values);
    EXPECT_EQ(back.u0.values, s.u0.values);
    EXPECT_EQ(back.e0, s.e0);
    EXPECT_EQ(back.energies.h, s.energies.h);
    EXPECT_EQ(back.trace, s.trace);
    EXPECT_TRUE(back.phi.has_value());
    EXPECT_EQ(back.psi.coefficient(), s.psi.coefficient());
    EXPECT_THROW(load_solution(dir / "missing"), IoError);
    std::filesystem::remove_all(dir);
}

TEST(DReduced, VanishesAtSteadyStateAndIsNonnegative) {
    const auto& s = base_solution();
    EXPECT_EQ(casimir::d_reduced(s.psi, s.rho0, s.rho0, s.u0, s.e0), 0.0);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> amp(-0.3, 0.3), pos(0.0, 1.5), wid(0.05, 0.5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v = s.rho0.values;
        const double a = amp(rng), c = pos(rng) * s.support_radius, w = wid(rng) * s.support_radius;
        const double peak = s.rho0.values[0];
        for (std::size_t j = 0; j < v.size(); ++j) {
            const double x = (s.rho0.nodes[j] - c) / w;
            v[j] = std::max(0.0, v[j] + a * peak * std::exp(-x * x));
        }
        EXPECT_GE(casimir::d_reduced(s.psi, s.rho0.with_values(v), s.rho0, s.u0, s.e0), -1e-12) << trial;
    }
}

TEST(DReduced, SmallBumpMatchesSecondVariation) {
    const auto& s = base_solution();
    const double R = s.support_radius, peak = s.rho0.values[0];
    std::vector<double> dv(s.rho0.size());
    for (std::size_t j = 0; j < dv.size(); ++j) {
        const double x = (s.rho0.nodes[j] - 0.4 * R) / (0.1 * R);
        if (s.rho0.values[j] > 0.0) dv[j] = 1e-3 * peak * std::exp(-x * x);
    }
    std::vector<double> v = s.rho0.values, quad(dv.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        v[j] += dv[j];
        // psi'' for c rho^p
        const double p = s.psi.exponent();
        if (dv[j] != 0.0) quad[j] = 0.5 * s.psi.coefficient() * p * (p - 1) * std::pow(s.rho0.values[j], p - 2) * dv[j] * dv[j];
    }
    const double d = casimir::d_reduced(s.psi, s.rho0.with_values(v), s.rho0, s.u0, s.e0);
    const double taylor = poisson::radial_integral(s.rho0.nodes, quad);
    EXPECT_GT(d, 0.0);
    EXPECT_NEAR(d, taylor, 0.05 * taylor);
}

TEST(DReduced, MassOutsideSupportCostsPotentialGap) {
    const auto& s = base_solution();
    std::vector<double> v = s.rho0.values;
    std::size_t j = 0;
    while (s.rho0.nodes[j] < 2 * s.support_radius) ++j;
    v[j] = 1e-3;
    const double d = casimir::d_reduced(s.psi, s.rho0.with_values(v), s.rho0, s.u0, s.e0);
    EXPECT_GT(d, 0.0);
}
