#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "flatgrav/casimir/model_json.hpp"
#include "flatgrav/casimir/reduction.hpp"
#include "flatgrav/casimir/table_io.hpp"
#include "flatgrav/cli/config.hpp"
#include "flatgrav/cli/manifest.hpp"
#include "flatgrav/dynamics/run.hpp"
#include "flatgrav/poisson/grid_io.hpp"
#include "flatgrav/steady/checks.hpp"
#include "flatgrav/steady/lift.hpp"
#include "flatgrav/steady/persist.hpp"
#include "flatgrav/steady/scan.hpp"
#include "flatgrav/steady/solver.hpp"
#include "flatgrav/verify/checks.hpp"

namespace flatgrav::cli {

/// Request that cannot run as given: exit status 2.
class UsageError : public Error {
public:
    using Error::Error;
};

enum ExitStatus : int { exit_ok = 0, exit_check_failed = 1, exit_usage = 2 };

namespace detail {

using casimir::ConvexModel;

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline ConvexModel phase_model(const RunConfig& cfg) {
    const auto& m = cfg.model;
    if (m.kind == "table") {
        if (!std::filesystem::exists(m.table)) throw UsageError("model table " + m.table.string() + " does not exist");
        return casimir::load_model_table(m.table.string());
    }
    if (!m.k) throw UsageError("this subcommand needs a phase-space model: set k in [model]");
    return ConvexModel::polytrope_k(m.coefficient, *m.k);
}

struct Models {
    std::optional<ConvexModel> phi;
    ConvexModel psi;
};

inline Models resolve_models(const RunConfig& cfg) {
    if (cfg.model.kind == "polytrope" && cfg.model.n)
        return {std::nullopt, ConvexModel::polytrope(cfg.model.coefficient, 1.0 + 1.0 / *cfg.model.n)};
    ConvexModel phi = phase_model(cfg);
    ConvexModel psi = casimir::reduce_phi_to_psi(phi);
    return {std::move(phi), std::move(psi)};
}

inline steady::SteadyProblem problem_of(const RunConfig& cfg, const Models& models, double mass) {
    const auto& p = cfg.problem;
    steady::SteadyProblem prob{models.psi, models.phi, mass};
    prob.grid = {static_cast<std::size_t>(p.J), p.r_inner, p.r_outer};
    prob.solver.theta = p.theta;
    prob.solver.tolerance = p.tolerance;
    prob.solver.el_tolerance = p.el_tolerance;
    prob.solver.max_iterations = p.max_iterations;
    return prob;
}

inline steady::SteadyStateSolution load_solution_or_usage(const RunConfig& cfg) {
    const auto dir = cfg.solution_dir();
    if (!std::filesystem::is_directory(dir))
        throw UsageError("solution directory " + dir.string() + " not found; run 'solve' first");
    return steady::load_solution(dir);
}

inline nlohmann::json solution_input(const RunConfig& cfg) {
    return {{"solution.json", sha256_file(cfg.solution_dir() / "solution.json")}};
}

inline void archive_config(OutputDir& out, const RunConfig& cfg, Command c) {
    out.write_text("config/" + std::string(command_name(c)) + ".ini", cfg.text);
}

inline void write_json(OutputDir& out, const std::string& rel, const nlohmann::json& j) {
    out.write_text(rel, j.dump(2) + "\n");
}

}  // namespace detail

inline int run_reduce(const RunConfig& cfg, std::ostream& log) {
    if (cfg.model.n) throw UsageError("reduce needs a phase-space model: set k or a table in [model]");
    const auto phi = detail::phase_model(cfg);
    const auto res = casimir::reduce_phi_to_psi_detailed(phi);
    OutputDir out(cfg.output.directory);
    detail::archive_config(out, cfg, Command::reduce);
    {
        std::ostringstream t;
        casimir::write_table(t, res.psi_numeric.args(), res.psi_numeric.values());
        out.write_text("psi.csv", t.str());
        std::ostringstream s;
        casimir::write_table(s, res.psi_star.args(), res.psi_star.values());
        out.write_text("psi_star.csv", s.str());
    }
    nlohmann::json summary = {{"phi", casimir::model_to_json(phi)},
                              {"psi_closed_form", res.psi.is_polytrope() ? casimir::model_to_json(res.psi) : nullptr},
                              {"fitted_exponent", res.fitted_exponent},
                              {"fitted_n", res.fitted_n},
                              {"fitted_n_small", res.fitted_n_small},
                              {"fitted_n_large", res.fitted_n_large},
                              {"achieved_error", res.achieved_error},
                              {"closed_form_error", verify::detail::number_to_json(res.closed_form_error)}};
    detail::write_json(out, "reduce.json", summary);
    write_manifest(out, "reduce", cfg.canonical(), cfg.seed);
    log << "psi: fitted n = " << detail::fmt(res.fitted_n) << " (small " << detail::fmt(res.fitted_n_small)
        << ", large " << detail::fmt(res.fitted_n_large) << ")";
    if (res.psi.is_polytrope())
        log << ", closed form " << detail::fmt(res.psi.coefficient()) << " rho^" << detail::fmt(res.psi.exponent());
    log << "\nwrote " << (out.root() / "psi.csv").string() << '\n';
    return exit_ok;
}

inline int run_solve(const RunConfig& cfg, std::ostream& log) {
    const auto models = detail::resolve_models(cfg);
    const auto sol = steady::solve_reduced(detail::problem_of(cfg, models, cfg.problem.mass));
    const double t_dyn = steady::dynamical_time(sol);
    OutputDir out(cfg.output.directory);
    detail::archive_config(out, cfg, Command::solve);
    const std::string rel = cfg.output.solution.lexically_normal().generic_string();
    steady::save_solution(out.root() / rel, sol);
    out.adopt_tree(rel);
    detail::write_json(out, "solve.json",
                       {{"M", sol.mass},
                        {"h", sol.energies.h},
                        {"E0", sol.e0},
                        {"E_pot", sol.energies.e_pot},
                        {"support_radius", sol.support_radius},
                        {"T_dyn", t_dyn},
                        {"iterations", sol.iterations},
                        {"residuals",
                         {{"el", sol.residuals.el},
                          {"virial", sol.residuals.virial},
                          {"hydrostatic", sol.residuals.hydrostatic}}}});
    write_manifest(out, "solve", cfg.canonical(), cfg.seed);
    log << "h = " << detail::fmt(sol.energies.h) << ", E0 = " << detail::fmt(sol.e0)
        << ", R = " << detail::fmt(sol.support_radius) << ", T_dyn = " << detail::fmt(t_dyn) << " after "
        << sol.iterations << " iterations\n"
        << "EL residual " << detail::fmt(sol.residuals.el) << ", virial " << detail::fmt(sol.residuals.virial)
        << ", hydrostatic " << detail::fmt(sol.residuals.hydrostatic) << '\n'
        << "wrote " << (out.root() / rel).string() << '\n';
    return exit_ok;
}

inline int run_lift(const RunConfig& cfg, std::ostream& log) {
    auto sol = std::make_shared<const steady::SteadyStateSolution>(detail::load_solution_or_usage(cfg));
    const auto phi = detail::phase_model(cfg);
    const auto lifted = steady::lift(sol, phi);
    const auto rep = steady::consistency_check(lifted);
    OutputDir out(cfg.output.directory);
    detail::archive_config(out, cfg, Command::lift);
    detail::write_json(out, "lifted.json",
                       {{"phi", casimir::model_to_json(phi)},
                        {"E0", lifted.e0()},
                        {"f_max", lifted.f_max()},
                        {"support_radius", lifted.support_radius()},
                        {"v_max", lifted.v_bound(0.0)},
                        {"solution", cfg.output.solution.lexically_normal().generic_string()},
                        {"consistency",
                         {{"density_error", rep.density_error},
                          {"worst_radius", rep.worst_radius},
                          {"value_error", rep.value_error},
                          {"h_kinetic", rep.h_kinetic},
                          {"h_reduced", rep.h_reduced},
                          {"tolerance", rep.tolerance},
                          {"passed", rep.passed()}}}});
    write_manifest(out, "lift", cfg.canonical(), cfg.seed, detail::solution_input(cfg));
    log << "lifted: f_max = " << detail::fmt(lifted.f_max()) << ", density error " << detail::fmt(rep.density_error)
        << ", value error " << detail::fmt(rep.value_error) << (rep.passed() ? "" : "  FAILED") << '\n';
    return rep.passed() ? exit_ok : exit_check_failed;
}

inline dynamics::SimConfig sim_config(const RunConfig& cfg) {
    dynamics::SimConfig sc;
    sc.dt = cfg.sim.dt;
    sc.n_steps = cfg.sim.steps;
    sc.N = cfg.sim.N;
    sc.box_factor = cfg.sim.box_factor;
    sc.diag_every = cfg.sim.diag_every;
    sc.snapshot_every = cfg.output.snapshot_every;
    sc.np = static_cast<std::size_t>(cfg.sim.np);
    sc.seed = cfg.seed;
    sc.energy_tolerance = cfg.sim.energy_tolerance;
    return sc;
}

/// Perturbation from the [sim] amplitude, given the unperturbed v_rms.
inline dynamics::Perturbation perturbation_of(const SimSection& s, double v_rms) {
    dynamics::Perturbation p;
    p.kind = dynamics::perturbation_kind(s.perturbation);
    switch (p.kind) {
        case dynamics::PerturbationKind::none: break;
        case dynamics::PerturbationKind::boost: p.magnitude = {s.amplitude * v_rms, 0.0}; break;
        case dynamics::PerturbationKind::position_scale: p.magnitude = {1.0 + s.amplitude, 0.0}; break;
        case dynamics::PerturbationKind::velocity_noise: p.magnitude = {s.amplitude, 0.0}; break;
    }
    return p;
}

inline int run_simulate(const RunConfig& cfg, std::ostream& log) {
    auto sol = std::make_shared<const steady::SteadyStateSolution>(detail::load_solution_or_usage(cfg));
    std::optional<casimir::ConvexModel> phi = sol->phi;
    if (!phi) {
        if (!cfg.has_section("model"))
            throw UsageError("the solution has no phase-space model; give k or a table in [model]");
        phi = detail::phase_model(cfg);
    }
    const auto lifted = steady::lift(sol, *phi);
    const auto sc = sim_config(cfg);
    sc.validate();

    OutputDir out(cfg.output.directory);
    detail::archive_config(out, cfg, Command::simulate);
    const auto base = dynamics::sample_steady(lifted, sc.np, sc.seed);
    const double v_rms = base.v_rms();
    const auto pert = perturbation_of(cfg.sim, v_rms);
    auto on_snapshot = [&](const dynamics::Snapshot& s) {
        char name[64];
        std::snprintf(name, sizeof name, "snapshots/rho_%06d.fgrid", s.step);
        io::save_grid(out.file(name).string(), s.rho);
        std::snprintf(name, sizeof name, "snapshots/particles_%06d.fpart", s.step);
        std::ofstream o(out.file(name), std::ios::binary);
        io::write_particles(o, s.particles.arrays());
        if (!o) throw IoError(std::string("write failed for ") + name);
    };
    auto res = dynamics::run_ensemble(lifted, sc, dynamics::perturb(base, pert, sc.seed), on_snapshot);
    res.norm_ratio = dynamics::norm_ratio(lifted, pert, v_rms);

    {
        std::ostringstream csv;
        res.series.write_csv(csv);
        out.write_text("diagnostics.csv", csv.str());
        std::ofstream o(out.file("final.fpart"), std::ios::binary);
        io::write_particles(o, res.final_state.arrays());
        if (!o) throw IoError("write failed for final.fpart");
    }
    detail::write_json(out, "simulate.json",
                       {{"t_dyn", res.t_dyn},
                        {"dt", res.dt},
                        {"h", res.h},
                        {"v_rms", v_rms},
                        {"perturbation", {{"kind", cfg.sim.perturbation}, {"magnitude", pert.magnitude}}},
                        {"energy_drift", res.energy_drift},
                        {"energy_flag", res.energy_flag},
                        {"momentum_step_drift", res.momentum_step_drift},
                        {"mass_lost", res.mass_lost},
                        {"norm_ratio", res.norm_ratio},
                        {"warnings", res.warnings}});
    write_manifest(out, "simulate", cfg.canonical(), cfg.seed, detail::solution_input(cfg));
    for (const auto& w : res.warnings) log << "warning: " << w << '\n';
    log << "simulated " << sc.n_steps << " steps (" << detail::fmt(sc.n_steps * sc.dt) << " T_dyn), energy drift "
        << detail::fmt(res.energy_drift) << (res.energy_flag ? "  FAILED" : "") << '\n';
    return res.energy_flag ? exit_check_failed : exit_ok;
}

inline verify::VerifyConfig verify_config(const RunConfig& cfg) {
    verify::VerifyConfig vc;
    const auto& m = cfg.model;
    if (m.kind == "table") {
        if (!std::filesystem::exists(m.table)) throw UsageError("model table " + m.table.string() + " does not exist");
        vc.models.emplace_back(casimir::load_table_columns(m.table.string()));
    } else if (m.k) {
        vc.models.emplace_back(casimir::ConvexModel::polytrope_k(m.coefficient, *m.k));
    } else if (m.n) {
        vc.psi = casimir::ConvexModel::polytrope(m.coefficient, 1.0 + 1.0 / *m.n);
    }
    for (double k : cfg.verify.extra_k) vc.models.emplace_back(casimir::ConvexModel::polytrope_k(m.coefficient, k));
    for (auto [a, b] : cfg.verify.scaling) vc.scaling.push_back({a, b});
    if (cfg.verify.family) {
        verify::FamilySpec fam;
        fam.count = cfg.verify.family_count;
        fam.N = cfg.verify.family_N;
        fam.box = cfg.verify.family_box;
        fam.seed = cfg.seed;
        vc.family = fam;
    }
    vc.inequalities = {cfg.verify.radii, cfg.verify.headroom};
    const auto& p = cfg.problem;
    verify::SteadySpec spec;
    spec.mass = p.mass;
    spec.grid = {static_cast<std::size_t>(p.J), p.r_inner, p.r_outer};
    spec.solver.theta = p.theta;
    spec.solver.tolerance = p.tolerance;
    spec.solver.el_tolerance = p.el_tolerance;
    spec.solver.max_iterations = p.max_iterations;
    if (cfg.verify.steady) vc.steady = spec;
    if (cfg.verify.scan) {
        vc.scan_masses = p.masses;
        vc.scan_spec = spec;
    }
    vc.tolerance = cfg.verify.tolerance;
    return vc;
}

inline int run_verify(const RunConfig& cfg, std::ostream& log) {
    verify::VerifyConfig vc;
    std::vector<verify::CheckReport> early;
    try {
        vc = verify_config(cfg);
    } catch (const IoError& e) {
        // unreadable table contents fail the check rather than the invocation
        verify::CheckReport r;
        r.id = "reduction[0]";
        r.reference = "model table is readable";
        r.inputs_digest = digest(cfg.model.table.filename().string());
        r.notes = e.what();
        early.push_back(r);
        RunConfig rest = cfg;
        rest.model.kind = "polytrope";
        rest.model.table.clear();
        vc = verify_config(rest);
    }
    OutputDir out(cfg.output.directory);
    detail::archive_config(out, cfg, Command::verify);
    auto outcome = verify::full_report(vc);
    outcome.reports.insert(outcome.reports.begin(), early.begin(), early.end());
    {
        std::ostringstream jl, csv;
        verify::write_jsonl(jl, outcome.reports);
        verify::write_summary_csv(csv, outcome.reports);
        out.write_text("checks.jsonl", jl.str());
        out.write_text("checks_summary.csv", csv.str());
    }
    nlohmann::json inputs = nlohmann::json::object();
    if (cfg.model.kind == "table" && std::filesystem::exists(cfg.model.table))
        inputs[cfg.model.table.filename().string()] = sha256_file(cfg.model.table);
    write_manifest(out, "verify", cfg.canonical(), cfg.seed, inputs);
    int failed = 0;
    for (const auto& r : outcome.reports) {
        log << (r.passed ? "pass  " : "FAIL  ") << r.id;
        if (!r.flags.empty()) {
            log << "  [";
            for (std::size_t i = 0; i < r.flags.size(); ++i) log << (i ? ", " : "") << r.flags[i];
            log << ']';
        }
        if (!r.passed && !r.notes.empty()) log << "  " << r.notes;
        log << '\n';
        failed += r.passed ? 0 : 1;
    }
    log << outcome.reports.size() - failed << " of " << outcome.reports.size() << " checks passed\n";
    return outcome.exit_status();
}

inline int run_scan_mass(const RunConfig& cfg, std::ostream& log) {
    const auto models = detail::resolve_models(cfg);
    const auto scan = steady::scan_mass(models.psi, cfg.problem.masses, detail::problem_of(cfg, models, 1.0));
    OutputDir out(cfg.output.directory);
    detail::archive_config(out, cfg, Command::scan_mass);
    {
        std::ostringstream csv;
        csv << "M,h,E0,iterations\n";
        char row[128];
        for (const auto& r : scan.rows) {
            std::snprintf(row, sizeof row, "%.17g,%.17g,%.17g,%d\n", r.mass, r.h, r.e0, r.iterations);
            csv << row;
        }
        out.write_text("scan_mass.csv", csv.str());
    }
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : scan.pairs)
        pairs.push_back({{"small", p.small}, {"large", p.large}, {"lhs", p.lhs}, {"rhs", p.rhs}, {"holds", p.holds()}});
    nlohmann::json summary = {{"all_negative", scan.all_negative()}, {"pairs", pairs}, {"pairs_hold", scan.pairs_hold()}};
    if (scan.polytrope) {
        summary["expected_exponent"] = scan.expected_exponent;
        summary["fitted_exponent"] = scan.fitted_exponent;
    }
    detail::write_json(out, "scan_mass.json", summary);
    write_manifest(out, "scan-mass", cfg.canonical(), cfg.seed);
    for (const auto& r : scan.rows) log << "M = " << detail::fmt(r.mass) << "  h = " << detail::fmt(r.h) << '\n';
    const bool ok = scan.all_negative() && scan.pairs_hold();
    log << (ok ? "all masses negative, pair bound holds\n" : "scan checks FAILED\n");
    return ok ? exit_ok : exit_check_failed;
}

/// Runs one subcommand and maps errors to the exit-status contract:
/// configuration and usage problems give 2, failed checks and numerical
/// failures give 1.
inline int dispatch(Command c, const RunConfig& cfg, std::ostream& log, std::ostream& err) {
    try {
        switch (c) {
            case Command::reduce: return run_reduce(cfg, log);
            case Command::solve: return run_solve(cfg, log);
            case Command::lift: return run_lift(cfg, log);
            case Command::verify: return run_verify(cfg, log);
            case Command::simulate: return run_simulate(cfg, log);
            case Command::scan_mass: return run_scan_mass(cfg, log);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const ConfigurationError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_check_failed;
    }
    return exit_usage;
}

/// Parses the config file for `c` and dispatches. `output` overrides the
/// configured output directory when non-empty.
inline int run_command(Command c, const std::filesystem::path& config_path, const std::filesystem::path& output,
                       std::ostream& log, std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = load_config(config_path, c);
    } catch (const ConfigError& e) {
        err << config_path.string() << ": " << e.what() << '\n';
        return exit_usage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }
    if (!output.empty()) cfg.output.directory = output;
    return dispatch(c, cfg, log, err);
}

}  // namespace flatgrav::cli
