#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "flatgrav/casimir/reduction.hpp"
#include "flatgrav/dynamics/run.hpp"
#include "flatgrav/steady/lift.hpp"
#include "flatgrav/steady/solver.hpp"

using namespace flatgrav;
using namespace flatgrav::dynamics;
using casimir::ConvexModel;
using std::numbers::pi;

namespace {

const steady::LiftedState& lifted_half() {
    static const steady::LiftedState s = [] {
        const ConvexModel phi = ConvexModel::polytrope_k(1.0, 0.5);
        steady::SteadyProblem p{casimir::reduce_phi_to_psi(phi), phi};
        auto sol = std::make_shared<const steady::SteadyStateSolution>(steady::solve_reduced(p));
        return steady::lift(sol, phi);
    }();
    return s;
}

SimConfig small_config() {
    SimConfig c;
    c.np = 20000;
    c.N = 128;
    c.dt = 0.01;
    c.n_steps = 100;
    c.diag_every = 5;
    c.seed = 7;
    return c;
}

poisson::PlanarField rho0_planar(const steady::LiftedState& s, int N, double h, double lambda = 1.0) {
    const auto& rho = s.solution().rho0;
    return poisson::sample_planar(N, h, [&](double x, double y) {
        return rho.at(std::hypot(x, y) / lambda) / (lambda * lambda);
    });
}

/// Kuzmin disk field: U = -M / sqrt(r^2 + a^2).
struct Kuzmin {
    double M = 1.0, a = 1.0;
    double potential(double x, double y) const { return -M / std::sqrt(x * x + y * y + a * a); }
    void operator()(ParticleEnsemble& e, std::vector<double>& ax, std::vector<double>& ay) const {
        ax.resize(e.size());
        ay.resize(e.size());
        for (std::size_t k = 0; k < e.size(); ++k) {
            const double s = std::pow(e.x[k] * e.x[k] + e.y[k] * e.y[k] + a * a, 1.5);
            ax[k] = -M * e.x[k] / s;
            ay[k] = -M * e.y[k] / s;
        }
    }
};

double orbit_energy(const ParticleEnsemble& e, const Kuzmin& k) {
    return 0.5 * (e.vx[0] * e.vx[0] + e.vy[0] * e.vy[0]) + k.potential(e.x[0], e.y[0]);
}

/// Largest energy error along one orbit started at (r, 0) with speed v.
double orbit_energy_error(double r, double v, double dt, int steps) {
    const Kuzmin k;
    ParticleEnsemble e;
    e.weight = 1.0;
    e.push(r, 0.0, 0.0, v);
    std::vector<double> ax, ay;
    k(e, ax, ay);
    const double e0 = orbit_energy(e, k);
    double worst = 0.0;
    for (int n = 0; n < steps; ++n) {
        kdk_step(e, ax, ay, dt, k);
        worst = std::max(worst, std::abs(orbit_energy(e, k) - e0));
    }
    return worst;
}

}  // namespace

TEST(Sampling, SameSeedSameEnsemble) {
    const auto a = sample_steady(lifted_half(), 5000, 3);
    const auto b = sample_steady(lifted_half(), 5000, 3);
    const auto c = sample_steady(lifted_half(), 5000, 4);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.vy, b.vy);
    EXPECT_NE(a.x, c.x);
    EXPECT_DOUBLE_EQ(a.mass(), 1.0);
    EXPECT_EQ(a.size(), 5000u);
}

TEST(Sampling, InsideEnergySupport) {
    const auto& s = lifted_half();
    const auto e = sample_steady(s, 20000, 11);
    for (std::size_t k = 0; k < e.size(); ++k) {
        const double energy = 0.5 * (e.vx[k] * e.vx[k] + e.vy[k] * e.vy[k]) + s.potential(std::hypot(e.x[k], e.y[k]));
        ASSERT_LT(energy, s.e0());
    }
}

TEST(Sampling, ZeroMomentumAndCentre) {
    const auto e = sample_steady(lifted_half(), 10001, 5);
    const auto p = e.momentum();
    const auto c = e.center_of_mass();
    const double scale = e.v_rms() * e.mass();
    EXPECT_LT(std::hypot(p[0], p[1]), 1e-3 * scale);
    EXPECT_LT(std::hypot(c[0], c[1]), 1e-3 * lifted_half().support_radius());
}

TEST(Sampling, DensityErrorScalesWithRootNp) {
    const auto& s = lifted_half();
    const int N = 64;
    const double h = 2.5 * s.support_radius() / N;
    const auto ref = rho0_planar(s, N, h);
    auto l1 = [&](std::size_t np, std::uint64_t seed) {
        const auto rho = deposit(sample_steady(s, np, seed), N, h);
        double err = 0.0;
        for (std::size_t q = 0; q < rho.values.size(); ++q) err += std::abs(rho.values[q] - ref.values[q]);
        return err * h * h;
    };
    // average a few seeds to tame the ratio's own scatter
    double small = 0.0, large = 0.0;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        small += l1(50000, seed);
        large += l1(200000, seed + 100);
    }
    const double ratio = small / large;
    EXPECT_GT(ratio, 1.6);
    EXPECT_LT(ratio, 2.4);
}

TEST(Sampling, KineticEnergyWithinThreeSigma) {
    const auto& s = lifted_half();
    const auto& nodes = s.solution().rho0.nodes;
    std::vector<double> kin(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) kin[j] = s.kinetic_density(nodes[j]);
    const double expected = poisson::radial_integral(nodes, kin);

    const std::size_t np = 40000;
    const auto e = sample_steady(s, np, 21);
    // antithetic pairs share |v|, so the independent samples are the pairs
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < np; k += 2) {
        const double q = 0.5 * (e.vx[k] * e.vx[k] + e.vy[k] * e.vy[k]);
        m1 += q;
        m2 += q * q;
    }
    const double pairs = static_cast<double>(np / 2);
    m1 /= pairs;
    m2 /= pairs;
    const double sigma = 2.0 * e.weight * std::sqrt(pairs * (m2 - m1 * m1));
    EXPECT_LT(std::abs(e.kinetic_energy() - expected), 3.0 * sigma);
}

TEST(Sampling, RejectsEmptyRequest) { EXPECT_THROW(sample_steady(lifted_half(), 0, 1), DomainError); }

TEST(Perturb, BoostAddsMomentum) {
    const auto e = sample_steady(lifted_half(), 4000, 2);
    const auto b = perturb(e, {PerturbationKind::boost, {0.05, 0.0}}, 2);
    const auto p0 = e.momentum(), p1 = b.momentum();
    EXPECT_NEAR(p1[0] - p0[0], e.mass() * 0.05, 1e-12);
    EXPECT_NEAR(p1[1] - p0[1], 0.0, 1e-12);
    EXPECT_EQ(b.x, e.x);
    EXPECT_DOUBLE_EQ(b.mass(), e.mass());
}

TEST(Perturb, UnitScaleIsIdentity) {
    const auto e = sample_steady(lifted_half(), 4000, 2);
    const auto b = perturb(e, {PerturbationKind::position_scale, {1.0, 0.0}}, 2);
    EXPECT_EQ(b.x, e.x);
    EXPECT_EQ(b.y, e.y);
    EXPECT_EQ(b.vx, e.vx);
}

TEST(Perturb, ScaleDistanceIsFirstOrder) {
    const auto& s = lifted_half();
    const int N = 128;
    const double h = 8.5 * s.support_radius() / N;
    const auto ref = rho0_planar(s, N, h);
    poisson::ShiftSearch search(N, h);
    const double d1 = search(rho0_planar(s, N, h, 1.01), ref).distance;
    const double d2 = search(rho0_planar(s, N, h, 1.02), ref).distance;
    EXPECT_GT(d1, 0.0);
    EXPECT_NEAR(d2 / d1, 2.0, 0.1);
}

TEST(Perturb, VelocityNoiseScale) {
    const auto e = sample_steady(lifted_half(), 20000, 2);
    const auto b = perturb(e, {PerturbationKind::velocity_noise, {0.1, 0.0}}, 9);
    double var = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) {
        const double dx = b.vx[k] - e.vx[k], dy = b.vy[k] - e.vy[k];
        var += dx * dx + dy * dy;
    }
    const double sigma = std::sqrt(var / (2.0 * e.size()));
    EXPECT_NEAR(sigma / (0.1 * e.v_rms()), 1.0, 0.02);
    EXPECT_EQ(b.x, e.x);
}

TEST(Perturb, NamesRoundTrip) {
    for (auto k : {PerturbationKind::none, PerturbationKind::boost, PerturbationKind::position_scale,
                   PerturbationKind::velocity_noise})
        EXPECT_EQ(perturbation_kind(to_string(k)), k);
    EXPECT_THROW(perturbation_kind("shear"), ConfigurationError);
}

TEST(NormRatio, BoostAndScale) {
    const auto& s = lifted_half();
    const double p = s.phi().exponent();
    EXPECT_DOUBLE_EQ(norm_ratio(s, {PerturbationKind::boost, {0.3, 0.1}}, 1.0), 1.0);
    EXPECT_NEAR(norm_ratio(s, {PerturbationKind::position_scale, {1.01, 0.0}}, 1.0), std::pow(1.01, 2.0 / p - 2.0),
                1e-15);
}

TEST(NormRatio, VelocityNoiseMatchesCartesianConvolution) {
    const auto& s = lifted_half();
    const double p = s.phi().exponent();
    const double v_rms = sample_steady(s, 20000, 1).v_rms();
    const double eps = 0.1, sigma = eps * v_rms;
    const double ratio = norm_ratio(s, {PerturbationKind::velocity_noise, {eps, 0.0}}, v_rms);

    // direct oracle: per radius, sample f0 on a Cartesian velocity grid and
    // convolve with the separable Gaussian
    const double R = s.support_radius();
    const double vmax = s.v_bound(0.0);
    const double L = vmax + 7.0 * sigma;
    const int n = 241;
    const double dv = 2.0 * L / (n - 1);
    std::vector<double> gk(n);
    for (int i = 0; i < n; ++i) {
        const double u = (i - (n - 1) / 2) * dv;
        gk[i] = std::exp(-u * u / (2 * sigma * sigma)) * dv / std::sqrt(2 * pi * sigma * sigma);
    }
    auto axis = [&](int i) { return -L + i * dv; };
    double base = 0.0, noisy = 0.0;
    const int nr = 48;
    for (int q = 0; q < nr; ++q) {
        // midpoint rule in r
        const double r = (q + 0.5) * R / nr;
        std::vector<double> f(n * n), tmp(n * n, 0.0), g(n * n, 0.0);
        double bsum = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                f[i * n + j] = s.f0(r, std::hypot(axis(i), axis(j)));
                bsum += std::pow(f[i * n + j], p);
            }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int m = std::max(0, j - (n - 1) / 2); m < std::min(n, j + (n - 1) / 2 + 1); ++m)
                    acc += f[i * n + m] * gk[j - m + (n - 1) / 2];
                tmp[i * n + j] = acc;
            }
        double nsum = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int m = std::max(0, i - (n - 1) / 2); m < std::min(n, i + (n - 1) / 2 + 1); ++m)
                    acc += tmp[m * n + j] * gk[i - m + (n - 1) / 2];
                nsum += std::pow(acc, p);
            }
        base += r * bsum;
        noisy += r * nsum;
    }
    const double oracle = std::pow(noisy / base, 1.0 / p);
    EXPECT_LT(ratio, 1.0);
    EXPECT_NEAR((1.0 - ratio) / (1.0 - oracle), 1.0, 0.05);
}

TEST(Step, FreeStreaming) {
    ParticleEnsemble e;
    e.weight = 0.5;
    e.push(0.1, -0.2, 1.5, 0.25);
    e.push(-0.3, 0.4, -0.5, 2.0);
    std::vector<double> ax(2, 0.0), ay(2, 0.0);
    auto none = [](ParticleEnsemble&, std::vector<double>& gx, std::vector<double>& gy) {
        std::fill(gx.begin(), gx.end(), 0.0);
        std::fill(gy.begin(), gy.end(), 0.0);
    };
    kdk_step(e, ax, ay, 0.1, none);
    EXPECT_DOUBLE_EQ(e.x[0], 0.1 + 0.15);
    EXPECT_DOUBLE_EQ(e.y[1], 0.4 + 0.2);
    EXPECT_DOUBLE_EQ(e.vx[0], 1.5);
}

TEST(Step, KuzminCircularOrbit) {
    const Kuzmin k;
    const double r = 1.0;
    const double v = std::sqrt(k.M * r * r / std::pow(r * r + k.a * k.a, 1.5));
    const double period = 2.0 * pi * r / v;
    const double dt = 1e-3 * period;
    ParticleEnsemble e;
    e.weight = 1.0;
    e.push(r, 0.0, 0.0, v);
    std::vector<double> ax, ay;
    k(e, ax, ay);
    double worst = 0.0;
    for (int n = 0; n < 10000; ++n) {
        kdk_step(e, ax, ay, dt, k);
        worst = std::max(worst, std::abs(std::hypot(e.x[0], e.y[0]) - r) / r);
    }
    EXPECT_LE(worst, 1e-3);
}

TEST(Step, SecondOrderEnergyError) {
    const double r = 1.0, v = 0.6;
    const double period = 2.0 * pi * r / v;
    const double e1 = orbit_energy_error(r, v, period / 500, 500);
    const double e2 = orbit_energy_error(r, v, period / 1000, 1000);
    EXPECT_NEAR(e1 / e2, 4.0, 0.4);
}

TEST(Pic, DepositConservesMass) {
    const auto e = sample_steady(lifted_half(), 10000, 4);
    const double h = 8.5 * lifted_half().support_radius() / 64;
    EXPECT_NEAR(poisson::mass(deposit(e, 64, h)), e.mass(), 1e-12);
}

TEST(Pic, SelfForceConservesMomentum) {
    // lopsided cloud, so the total force is not zero by symmetry
    ParticleEnsemble e;
    e.weight = 1e-3;
    Rng rng(3, Stream::sampling);
    for (int k = 0; k < 1000; ++k) e.push(0.3 * rng.normal() + (k % 3 == 0 ? 0.8 : 0.0), 0.2 * rng.normal(), 0, 0);
    SelfGravity g(128, 0.05);
    std::vector<double> ax, ay;
    g.update(e, ax, ay);
    double fx = 0.0, fy = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) {
        fx += ax[k];
        fy += ay[k];
        scale += std::hypot(ax[k], ay[k]);
    }
    EXPECT_LT(std::hypot(fx, fy), 1e-12 * scale);
}

TEST(Pic, EscapersDroppedWithMassLoss) {
    ParticleEnsemble e;
    e.weight = 0.25;
    e.push(0.0, 0.0, 0, 0);
    e.push(10.0, 0.0, 0, 0);
    e.push(0.1, -0.1, 0, 0);
    e.push(0.0, -7.0, 0, 0);
    const double lost = drop_escapers(e, 32, 0.1);
    EXPECT_DOUBLE_EQ(lost, 0.5);
    EXPECT_EQ(e.size(), 2u);
    EXPECT_DOUBLE_EQ(e.x[1], 0.1);
}

TEST(Run, ConfigValidation) {
    SimConfig c;
    c.dt = 0.03;
    EXPECT_THROW(c.validate(), ConfigurationError);
    c = SimConfig{};
    c.N = 100;
    EXPECT_THROW(c.validate(), ConfigurationError);
    c = SimConfig{};
    c.box_factor = 4.0;
    EXPECT_THROW(c.validate(), ConfigurationError);
    EXPECT_NO_THROW(SimConfig{}.validate());
}

TEST(Run, DiagnosticsInvariants) {
    const auto res = run(lifted_half(), small_config(), {});
    const auto& rows = res.series.rows;
    ASSERT_EQ(rows.size(), 21u);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i) EXPECT_GT(rows[i].t, rows[i - 1].t);
        EXPECT_LE(rows[i].dist_shift, rows[i].dist_raw);
        EXPECT_GE(rows[i].d_reduced, -1e-10);
        EXPECT_GE(rows[i].d_reduced_shift, -1e-10);
        EXPECT_DOUBLE_EQ(rows[i].mass, 1.0);
    }
    EXPECT_LE(res.energy_drift, 1e-3);
    EXPECT_FALSE(res.energy_flag);
    EXPECT_LE(res.momentum_step_drift, 1e-6);
    EXPECT_EQ(res.mass_lost, 0.0);
    EXPECT_DOUBLE_EQ(res.norm_ratio, 1.0);
}

TEST(Run, BitIdenticalRepeats) {
    SimConfig c = small_config();
    c.n_steps = 20;
    const auto a = run(lifted_half(), c, {PerturbationKind::velocity_noise, {0.05, 0.0}});
    const auto b = run(lifted_half(), c, {PerturbationKind::velocity_noise, {0.05, 0.0}});
    std::ostringstream sa, sb;
    a.series.write_csv(sa);
    b.series.write_csv(sb);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(a.final_state.x, b.final_state.x);
}

TEST(Run, BoostTracksShift) {
    SimConfig c = small_config();
    const double v = 0.05 * sample_steady(lifted_half(), c.np, c.seed).v_rms();
    const auto res = run(lifted_half(), c, {PerturbationKind::boost, {v, 0.0}});
    for (std::size_t i = 1; i < res.series.rows.size(); ++i) {
        const auto& r = res.series.rows[i];
        EXPECT_GT(r.dist_raw, res.series.rows[i - 1].dist_raw);
        EXPECT_NEAR(r.shift_x, v * r.t, res.h);
        EXPECT_NEAR(r.shift_y, 0.0, res.h);
    }
}

TEST(Run, EnergyFlagRaised) {
    SimConfig c = small_config();
    c.n_steps = 10;
    c.energy_tolerance = 1e-12;
    const auto res = run(lifted_half(), c, {});
    EXPECT_TRUE(res.energy_flag);
    EXPECT_FALSE(res.warnings.empty());
    EXPECT_EQ(res.series.rows.size(), 3u);
}

TEST(Run, CsvHeaderNamesEveryColumn) {
    DiagnosticsSeries s;
    s.rows.push_back({});
    std::ostringstream out;
    s.write_csv(out);
    const std::string text = out.str();
    const std::string header = text.substr(0, text.find('\n'));
    EXPECT_EQ(header,
              "t,E_kin,E_pot,E_total,px,py,com_x,com_y,mass,dist_raw,dist_shift,shift_x,shift_y,d_reduced,"
              "d_reduced_shift,stability");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST(Run, SnapshotsAtCadence) {
    SimConfig c = small_config();
    c.n_steps = 12;
    c.snapshot_every = 4;
    std::vector<int> steps;
    run(lifted_half(), c, {}, [&](const Snapshot& s) {
        steps.push_back(s.step);
        EXPECT_EQ(s.rho.N, c.N);
    });
    EXPECT_EQ(steps, (std::vector<int>{0, 4, 8, 12}));
}
