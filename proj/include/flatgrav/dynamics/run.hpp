#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "flatgrav/casimir/d_reduced.hpp"
#include "flatgrav/core/error.hpp"
#include "flatgrav/dynamics/particles.hpp"
#include "flatgrav/dynamics/pic.hpp"
#include "flatgrav/poisson/shift.hpp"
#include "flatgrav/steady/lift.hpp"

namespace flatgrav::dynamics {

struct SimConfig {
    double dt = 0.01;  // in dynamical times
    int n_steps = 1000;
    int N = 256;
    double box_factor = 8.5;  // box side in support radii
    int diag_every = 10;
    int snapshot_every = 0;  // 0: none
    std::size_t np = 200000;
    std::uint64_t seed = 1;
    double energy_tolerance = 1e-3;

    void validate() const {
        if (!(dt > 0.0) || dt > 0.02) throw ConfigurationError("dt must lie in (0, 0.02] dynamical times");
        if (n_steps < 0) throw ConfigurationError("n_steps must be nonnegative");
        if (N < 16 || (N & (N - 1)) != 0) throw ConfigurationError("grid N must be a power of two >= 16");
        if (!(box_factor >= 8.0)) throw ConfigurationError("box_factor must be at least 8 support radii");
        if (diag_every < 1) throw ConfigurationError("diag_every must be positive");
        if (snapshot_every < 0) throw ConfigurationError("snapshot_every must be nonnegative");
        if (np < 1) throw ConfigurationError("np must be positive");
    }
};

struct DiagnosticsRow {
    double t = 0.0;
    double e_kin = 0.0, e_pot = 0.0, e_total = 0.0;
    double px = 0.0, py = 0.0;
    double com_x = 0.0, com_y = 0.0;
    double mass = 0.0;
    double dist_raw = 0.0, dist_shift = 0.0;
    double shift_x = 0.0, shift_y = 0.0;
    double d_reduced = 0.0, d_reduced_shift = 0.0;
    double stability = 0.0;  // d_reduced_shift + dist_shift^2
};

struct DiagnosticsSeries {
    std::vector<DiagnosticsRow> rows;

    static const std::vector<std::string>& columns() {
        static const std::vector<std::string> names{
            "t",          "E_kin",   "E_pot",   "E_total",  "px",        "py",
            "com_x",      "com_y",   "mass",    "dist_raw", "dist_shift", "shift_x",
            "shift_y",    "d_reduced", "d_reduced_shift", "stability"};
        return names;
    }

    void write_csv(std::ostream& out) const {
        const auto& c = columns();
        for (std::size_t i = 0; i < c.size(); ++i) out << (i ? "," : "") << c[i];
        out << '\n';
        char buf[32];
        for (const auto& r : rows) {
            const double v[] = {r.t,        r.e_kin,      r.e_pot,   r.e_total,  r.px,
                                r.py,       r.com_x,      r.com_y,   r.mass,     r.dist_raw,
                                r.dist_shift, r.shift_x,  r.shift_y, r.d_reduced, r.d_reduced_shift,
                                r.stability};
            for (std::size_t i = 0; i < std::size(v); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", v[i]);
                out << (i ? "," : "") << buf;
            }
            out << '\n';
        }
    }
};

struct Snapshot {
    int step;
    double t;
    const poisson::PlanarField& rho;
    const ParticleEnsemble& particles;
};

struct RunResult {
    DiagnosticsSeries series;
    double t_dyn = 0.0;
    double dt = 0.0;  // absolute time step
    double h = 0.0;   // grid spacing
    double mass_lost = 0.0;
    double energy_drift = 0.0;  // max |E(t) - E(0)| / |E(0)|
    bool energy_flag = false;
    double momentum_step_drift = 0.0;  // max |p(t+dt) - p(t)| / (M v_rms)
    double norm_ratio = 1.0;           // ||f(0)||_p / ||f0||_p, p = 1 + 1/k
    ParticleEnsemble final_state;
    std::vector<std::string> warnings;
};

/// Planar grid for a steady state: side box_factor x support radius.
inline double grid_spacing(const steady::LiftedState& lifted, const SimConfig& cfg) {
    return cfg.box_factor * lifted.support_radius() / cfg.N;
}

/// Evolves an ensemble in its own field, sampling the stability diagnostics
/// against the steady state every diag_every steps.
inline RunResult run_ensemble(const steady::LiftedState& lifted, const SimConfig& cfg, ParticleEnsemble e,
                              const std::function<void(const Snapshot&)>& on_snapshot = {}) {
    cfg.validate();
    const steady::SteadyStateSolution& sol = lifted.solution();
    RunResult res;
    res.t_dyn = steady::dynamical_time(sol);
    res.dt = cfg.dt * res.t_dyn;
    res.h = grid_spacing(lifted, cfg);
    const int N = cfg.N;
    const double h = res.h;
    const double M = sol.mass;

    auto rho0_at = [&](double x, double y) { return sol.rho0.at(std::hypot(x, y)); };
    auto u0_at = [&](double x, double y) { return steady::potential_at(sol, std::hypot(x, y)); };
    const poisson::PlanarField rho0 = poisson::sample_planar(N, h, rho0_at);
    const poisson::PlanarField u0 = poisson::sample_planar(N, h, u0_at);

    SelfGravity gravity(N, h);
    poisson::ShiftSearch search(N, h);
    SelfGravity::Fields fields;
    std::vector<double> ax, ay;
    auto accel = [&](ParticleEnsemble& p, std::vector<double>& gx, std::vector<double>& gy) {
        res.mass_lost += drop_escapers(p, N, h);
        fields = gravity.update(p, gx, gy);
    };
    accel(e, ax, ay);

    const double v_rms0 = e.v_rms();
    double e_total0 = 0.0;
    auto diagnose = [&](double t) {
        DiagnosticsRow r;
        r.t = t;
        r.e_kin = e.kinetic_energy();
        r.e_pot = -poisson::pot_inner_with(fields.u, fields.rho);
        r.e_total = r.e_kin + r.e_pot;
        const auto p = e.momentum();
        r.px = p[0];
        r.py = p[1];
        const auto c = e.center_of_mass();
        r.com_x = c[0];
        r.com_y = c[1];
        r.mass = e.mass();
        const poisson::ShiftResult s = search(fields.rho, rho0);
        r.dist_raw = s.raw_distance;
        r.dist_shift = s.distance;
        r.shift_x = s.shift[0];
        r.shift_y = s.shift[1];
        r.d_reduced = casimir::d_reduced(sol.psi, fields.rho, rho0, u0, sol.e0);
        const double sx = s.shift[0], sy = s.shift[1];
        const auto rho0_s = poisson::sample_planar(N, h, [&](double x, double y) { return rho0_at(x - sx, y - sy); });
        const auto u0_s = poisson::sample_planar(N, h, [&](double x, double y) { return u0_at(x - sx, y - sy); });
        r.d_reduced_shift = casimir::d_reduced(sol.psi, fields.rho, rho0_s, u0_s, sol.e0);
        r.stability = r.d_reduced_shift + r.dist_shift * r.dist_shift;
        res.series.rows.push_back(r);
        if (res.series.rows.size() == 1) e_total0 = r.e_total;
        res.energy_drift = std::max(res.energy_drift, std::abs(r.e_total - e_total0) / std::abs(e_total0));
    };

    diagnose(0.0);
    if (cfg.snapshot_every > 0 && on_snapshot) on_snapshot({0, 0.0, fields.rho, e});
    auto p_prev = e.momentum();
    for (int step = 1; step <= cfg.n_steps; ++step) {
        kdk_step(e, ax, ay, res.dt, accel);
        const auto p = e.momentum();
        res.momentum_step_drift =
            std::max(res.momentum_step_drift, std::hypot(p[0] - p_prev[0], p[1] - p_prev[1]) / (M * v_rms0));
        p_prev = p;
        const double t = step * res.dt;
        if (step % cfg.diag_every == 0) diagnose(t);
        if (cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 && on_snapshot)
            on_snapshot({step, t, fields.rho, e});
    }
    res.energy_flag = res.energy_drift > cfg.energy_tolerance;
    if (res.mass_lost > 0.0)
        res.warnings.push_back("escaping particles dropped; mass lost " + std::to_string(res.mass_lost));
    if (res.energy_flag)
        res.warnings.push_back("energy drift " + std::to_string(res.energy_drift) + " exceeds tolerance");
    res.final_state = std::move(e);
    return res;
}

/// Samples f0, applies the perturbation and evolves.
inline RunResult run(const steady::LiftedState& lifted, const SimConfig& cfg, const Perturbation& pert,
                     const std::function<void(const Snapshot&)>& on_snapshot = {}) {
    cfg.validate();
    const ParticleEnsemble base = sample_steady(lifted, cfg.np, cfg.seed);
    ParticleEnsemble start = perturb(base, pert, cfg.seed);
    RunResult res = run_ensemble(lifted, cfg, std::move(start), on_snapshot);
    res.norm_ratio = norm_ratio(lifted, pert, base.v_rms());
    return res;
}

}  // namespace flatgrav::dynamics
