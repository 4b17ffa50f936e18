#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flatgrav/casimir/model_json.hpp"
#include "flatgrav/core/error.hpp"
#include "flatgrav/steady/solver.hpp"
#include "json.hpp"

namespace flatgrav::steady {

inline constexpr const char* solution_format = "flatgrav-solution v1";

namespace detail {

inline void write_profile(const std::filesystem::path& path, const char* column, const RadialField& f) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "r," << column << '\n';
    char buf[64];
    for (std::size_t j = 0; j < f.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", f.nodes[j], f.values[j]);
        out << buf;
    }
    if (!out) throw IoError("write failed for " + path.string());
}

inline RadialField read_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<double> r, v;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        double a, b;
        char comma;
        if (!(ss >> a >> comma >> b) || comma != ',')
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 'r,value'");
        r.push_back(a);
        v.push_back(b);
    }
    return RadialField(std::move(r), std::move(v));
}

}  // namespace detail

inline nlohmann::json solution_to_json(const SteadyStateSolution& s) {
    nlohmann::json j;
    j["format"] = solution_format;
    j["M"] = s.mass;
    j["E0"] = s.e0;
    j["support_radius"] = s.support_radius;
    j["energies"] = {{"e_pot", s.energies.e_pot}, {"casimir", s.energies.casimir}, {"h", s.energies.h}};
    j["residuals"] = {{"el", s.residuals.el},
                      {"virial", s.residuals.virial},
                      {"hydrostatic", s.residuals.hydrostatic},
                      {"mass_error", s.residuals.mass_error}};
    j["iterations"] = s.iterations;
    j["converged"] = s.converged;
    j["theta"] = s.theta;
    j["trace"] = s.trace;
    j["grid_nodes"] = s.rho0.size();
    j["psi"] = casimir::model_to_json(s.psi);
    j["phi"] = s.phi ? casimir::model_to_json(*s.phi) : nlohmann::json(nullptr);
    return j;
}

/// Writes solution.json, rho0.csv and U0.csv into dir (created if needed).
inline void save_solution(const std::filesystem::path& dir, const SteadyStateSolution& s) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    detail::write_profile(dir / "rho0.csv", "rho0", s.rho0);
    detail::write_profile(dir / "U0.csv", "U0", s.u0);
    std::ofstream out(dir / "solution.json");
    if (!out) throw IoError("cannot write " + (dir / "solution.json").string());
    out << solution_to_json(s).dump(2) << '\n';
    if (!out) throw IoError("write failed for " + (dir / "solution.json").string());
}

inline SteadyStateSolution load_solution(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("solution directory " + dir.string() + " does not exist");
    std::ifstream in(dir / "solution.json");
    if (!in) throw IoError("cannot open " + (dir / "solution.json").string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        if (j.at("format") != solution_format) throw IoError("unsupported solution format");
        RadialField rho = detail::read_profile(dir / "rho0.csv");
        RadialField u = detail::read_profile(dir / "U0.csv");
        if (rho.nodes != u.nodes) throw IoError("rho0.csv and U0.csv use different radii");
        std::optional<ConvexModel> phi;
        if (!j.at("phi").is_null()) phi = casimir::model_from_json(j.at("phi"));
        SteadyStateSolution s{casimir::model_from_json(j.at("psi")), phi, j.at("M"), std::move(rho), std::move(u),
                              j.at("E0")};
        s.support_radius = j.at("support_radius");
        const auto& e = j.at("energies");
        s.energies = {e.at("e_pot"), e.at("casimir"), e.at("h")};
        const auto& r = j.at("residuals");
        s.residuals = {r.at("el"), r.at("virial"), r.at("hydrostatic"), r.at("mass_error")};
        s.iterations = j.at("iterations");
        s.converged = j.at("converged");
        s.theta = j.at("theta");
        s.trace = j.at("trace").get<std::vector<double>>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed solution.json: " + std::string(e.what()));
    }
}

}  // namespace flatgrav::steady
