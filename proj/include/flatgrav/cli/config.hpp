#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "flatgrav/core/error.hpp"

namespace flatgrav::cli {

enum class Command : unsigned {
    reduce = 1u << 0,
    solve = 1u << 1,
    lift = 1u << 2,
    verify = 1u << 3,
    simulate = 1u << 4,
    scan_mass = 1u << 5,
};

inline constexpr unsigned all_commands = 0x3f;

inline constexpr unsigned operator|(Command a, Command b) { return static_cast<unsigned>(a) | static_cast<unsigned>(b); }
inline constexpr unsigned operator|(unsigned a, Command b) { return a | static_cast<unsigned>(b); }

inline std::string_view command_name(Command c) {
    switch (c) {
        case Command::reduce: return "reduce";
        case Command::solve: return "solve";
        case Command::lift: return "lift";
        case Command::verify: return "verify";
        case Command::simulate: return "simulate";
        case Command::scan_mass: return "scan-mass";
    }
    return "";
}

inline constexpr Command all_command_list[] = {Command::reduce, Command::verify, Command::solve,
                                               Command::lift, Command::simulate, Command::scan_mass};

enum class ValueType { number, integer, boolean, text, number_list, text_list };

inline std::string_view type_name(ValueType t) {
    switch (t) {
        case ValueType::number: return "number";
        case ValueType::integer: return "integer";
        case ValueType::boolean: return "boolean";
        case ValueType::text: return "text";
        case ValueType::number_list: return "list of numbers";
        case ValueType::text_list: return "list";
    }
    return "";
}

struct KeyInfo {
    std::string_view section;  // "" for top-level keys
    std::string_view key;
    ValueType type;
    std::string_view fallback;  // "" means no default
    std::string_view help;
    unsigned used_by;
};

inline constexpr unsigned model_users = all_commands;
inline constexpr unsigned problem_users = Command::solve | Command::scan_mass | Command::verify;
inline constexpr unsigned output_users = all_commands;

// clang-format off
inline const std::vector<KeyInfo>& key_registry() {
    static const std::vector<KeyInfo> keys = {
        {"", "seed", ValueType::integer, "1", "top-level seed; every random stream is derived from it", all_commands},

        {"model", "kind", ValueType::text, "polytrope", "polytrope or table", model_users},
        {"model", "k", ValueType::number, "", "phase-space index: phi(f) = c f^(1+1/k)", model_users},
        {"model", "n", ValueType::number, "", "reduced index: psi(rho) = c rho^(1+1/n), no phase-space model", model_users},
        {"model", "coefficient", ValueType::number, "1", "power-law coefficient c", model_users},
        {"model", "table", ValueType::text, "", "phi table file for kind = table ('# convex-model v1')", model_users},

        {"problem", "M", ValueType::number, "1", "total mass", problem_users},
        {"problem", "J", ValueType::integer, "512", "radial grid nodes", problem_users},
        {"problem", "r_inner", ValueType::number, "1e-3", "innermost radial node (initial grid)", problem_users},
        {"problem", "r_outer", ValueType::number, "20", "outermost radial node (initial grid)", problem_users},
        {"problem", "theta", ValueType::number, "0.5", "relaxation of the fixed-point step, in (0, 1]", problem_users},
        {"problem", "tolerance", ValueType::number, "1e-8", "relative L1 change per step at convergence", problem_users},
        {"problem", "el_tolerance", ValueType::number, "1e-6", "Euler-Lagrange residual at convergence", problem_users},
        {"problem", "max_iterations", ValueType::integer, "20000", "fixed-point iteration cap", problem_users},
        {"problem", "masses", ValueType::number_list, "0.5, 1, 2", "ascending masses for scan-mass", Command::scan_mass | Command::verify},

        {"sim", "Np", ValueType::integer, "200000", "particle count", static_cast<unsigned>(Command::simulate)},
        {"sim", "dt", ValueType::number, "0.01", "time step in dynamical times, at most 0.02", static_cast<unsigned>(Command::simulate)},
        {"sim", "steps", ValueType::integer, "1000", "number of time steps", static_cast<unsigned>(Command::simulate)},
        {"sim", "N", ValueType::integer, "256", "PIC grid cells per side (power of two)", static_cast<unsigned>(Command::simulate)},
        {"sim", "box_factor", ValueType::number, "8.5", "PIC box side in support radii, at least 8", static_cast<unsigned>(Command::simulate)},
        {"sim", "diag_every", ValueType::integer, "10", "steps between diagnostics rows", static_cast<unsigned>(Command::simulate)},
        {"sim", "perturbation", ValueType::text, "none", "none, boost, position_scale or velocity_noise", static_cast<unsigned>(Command::simulate)},
        {"sim", "amplitude", ValueType::number, "0", "boost: V/v_rms along x; position_scale: lambda - 1; velocity_noise: sigma/v_rms", static_cast<unsigned>(Command::simulate)},
        {"sim", "energy_tolerance", ValueType::number, "1e-3", "relative energy drift that fails the run", static_cast<unsigned>(Command::simulate)},

        {"output", "directory", ValueType::text, "out", "output directory; every file is written below it", output_users},
        {"output", "solution", ValueType::text, "solution", "solution directory, relative to the output directory", Command::solve | Command::lift | Command::simulate},
        {"output", "snapshot_every", ValueType::integer, "0", "steps between FGRID1/FPART1 snapshots, 0 for none", static_cast<unsigned>(Command::simulate)},

        {"verify", "extra_k", ValueType::number_list, "0.9", "additional polytropic indices for the reduction checks", static_cast<unsigned>(Command::verify)},
        {"verify", "scaling", ValueType::text_list, "1:1, 2:3", "scaling cases a:b (empty to skip)", static_cast<unsigned>(Command::verify)},
        {"verify", "family", ValueType::boolean, "true", "run the inequality battery on the density family", static_cast<unsigned>(Command::verify)},
        {"verify", "family_count", ValueType::integer, "100", "number of family densities", static_cast<unsigned>(Command::verify)},
        {"verify", "family_N", ValueType::integer, "128", "family grid cells per side", static_cast<unsigned>(Command::verify)},
        {"verify", "family_box", ValueType::number, "16", "family box side", static_cast<unsigned>(Command::verify)},
        {"verify", "radii", ValueType::number_list, "1.5, 2, 4", "ball radii for the shifting bound", static_cast<unsigned>(Command::verify)},
        {"verify", "headroom", ValueType::number, "0.1", "headroom on fitted constants", static_cast<unsigned>(Command::verify)},
        {"verify", "steady", ValueType::boolean, "true", "solve and check the steady state of [problem]", static_cast<unsigned>(Command::verify)},
        {"verify", "scan", ValueType::boolean, "true", "run the mass scan over [problem] masses", static_cast<unsigned>(Command::verify)},
        {"verify", "tolerance", ValueType::number, "", "replaces every accuracy tolerance when set", static_cast<unsigned>(Command::verify)},
    };
    return keys;
}
// clang-format on

/// Sections each subcommand needs in the config file.
inline std::vector<std::string_view> required_sections(Command c) {
    switch (c) {
        case Command::reduce: return {"model"};
        case Command::solve: return {"model", "problem"};
        case Command::lift: return {"model"};
        case Command::verify: return {"model", "verify"};
        case Command::simulate: return {"sim"};
        case Command::scan_mass: return {"model", "problem"};
    }
    return {};
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            const bool same = std::tolower(static_cast<unsigned char>(a[i - 1])) ==
                              std::tolower(static_cast<unsigned char>(b[j - 1]));
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (same ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

struct Diagnostic {
    int line = 0;  // 0 when no line applies
    std::string message;

    std::string str() const { return line > 0 ? "line " + std::to_string(line) + ": " + message : message; }
};

/// Config rejected; carries every problem found.
class ConfigError : public ConfigurationError {
public:
    explicit ConfigError(std::vector<Diagnostic> diagnostics)
        : ConfigurationError(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}
    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    static std::string join(const std::vector<Diagnostic>& d) {
        std::string s = "invalid configuration:";
        for (const auto& x : d) s += "\n  " + x.str();
        return s;
    }
    std::vector<Diagnostic> diagnostics_;
};

struct ModelSection {
    std::string kind = "polytrope";
    std::optional<double> k, n;
    double coefficient = 1.0;
    std::filesystem::path table;
};

struct ProblemSection {
    double mass = 1.0;
    int J = 512;
    double r_inner = 1e-3, r_outer = 20.0;
    double theta = 0.5;
    double tolerance = 1e-8, el_tolerance = 1e-6;
    int max_iterations = 20000;
    std::vector<double> masses{0.5, 1.0, 2.0};
};

struct SimSection {
    long long np = 200000;
    double dt = 0.01;
    int steps = 1000;
    int N = 256;
    double box_factor = 8.5;
    int diag_every = 10;
    std::string perturbation = "none";
    double amplitude = 0.0;
    double energy_tolerance = 1e-3;
};

struct OutputSection {
    std::filesystem::path directory = "out";
    std::filesystem::path solution = "solution";
    int snapshot_every = 0;
};

struct VerifySection {
    std::vector<double> extra_k{0.9};
    std::vector<std::pair<double, double>> scaling{{1.0, 1.0}, {2.0, 3.0}};
    bool family = true;
    int family_count = 100, family_N = 128;
    double family_box = 16.0;
    std::vector<double> radii{1.5, 2.0, 4.0};
    double headroom = 0.1;
    bool steady = true, scan = true;
    std::optional<double> tolerance;
};

struct RunConfig {
    std::uint64_t seed = 1;
    ModelSection model;
    ProblemSection problem;
    SimSection sim;
    OutputSection output;
    VerifySection verify;
    std::vector<std::string> sections;  // as present in the file
    std::string text;                   // verbatim source

    bool has_section(std::string_view s) const { return std::find(sections.begin(), sections.end(), s) != sections.end(); }
    std::filesystem::path solution_dir() const { return output.directory / output.solution; }

    /// Effective settings, without the output location, for digests.
    nlohmann::json canonical() const {
        nlohmann::json m = {{"kind", model.kind}, {"coefficient", model.coefficient}};
        if (model.k) m["k"] = *model.k;
        if (model.n) m["n"] = *model.n;
        if (!model.table.empty()) m["table"] = model.table.filename().string();
        nlohmann::json scaling = nlohmann::json::array();
        for (auto [a, b] : verify.scaling) scaling.push_back({a, b});
        nlohmann::json v = {{"extra_k", verify.extra_k}, {"scaling", scaling}, {"family", verify.family},
                            {"family_count", verify.family_count}, {"family_N", verify.family_N},
                            {"family_box", verify.family_box}, {"radii", verify.radii}, {"headroom", verify.headroom},
                            {"steady", verify.steady}, {"scan", verify.scan}};
        if (verify.tolerance) v["tolerance"] = *verify.tolerance;
        return {{"seed", seed},
                {"model", m},
                {"problem",
                 {{"M", problem.mass}, {"J", problem.J}, {"r_inner", problem.r_inner}, {"r_outer", problem.r_outer},
                  {"theta", problem.theta}, {"tolerance", problem.tolerance}, {"el_tolerance", problem.el_tolerance},
                  {"max_iterations", problem.max_iterations}, {"masses", problem.masses}}},
                {"sim",
                 {{"Np", sim.np}, {"dt", sim.dt}, {"steps", sim.steps}, {"N", sim.N}, {"box_factor", sim.box_factor},
                  {"diag_every", sim.diag_every}, {"perturbation", sim.perturbation}, {"amplitude", sim.amplitude},
                  {"energy_tolerance", sim.energy_tolerance}}},
                {"output", {{"snapshot_every", output.snapshot_every}}},
                {"verify", v}};
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::optional<double> to_number(const std::string& s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<long long> to_integer(const std::string& s) {
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size()) return v;
    // accept integral values written like 2e5
    if (auto d = to_number(s); d && *d == std::floor(*d) && std::abs(*d) < 9e18) return static_cast<long long>(*d);
    return std::nullopt;
}

inline std::optional<bool> to_bool(const std::string& s) {
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    return std::nullopt;
}

inline const KeyInfo* find_key(std::string_view section, std::string_view key) {
    for (const auto& k : key_registry())
        if (k.section == section && k.key == key) return &k;
    return nullptr;
}

inline bool known_section(std::string_view s) {
    for (const auto& k : key_registry())
        if (k.section == s) return true;
    return false;
}

inline std::string nearest_key(std::string_view section, std::string_view key) {
    std::string best;
    std::size_t dist = std::string::npos;
    for (const auto& k : key_registry()) {
        if (k.section != section) continue;
        const std::size_t d = edit_distance(key, k.key);
        if (d < dist) {
            dist = d;
            best = k.key;
        }
    }
    return best;
}

inline std::string nearest_section(std::string_view s) {
    std::string best;
    std::size_t dist = std::string::npos;
    for (std::string_view c : {"model", "problem", "sim", "output", "verify"}) {
        const std::size_t d = edit_distance(s, c);
        if (d < dist) {
            dist = d;
            best = c;
        }
    }
    return best;
}

struct Entry {
    std::string value;
    int line = 0;
};

/// Typed access to the raw entries; conversion failures are collected.
class Reader {
public:
    Reader(std::map<std::string, std::map<std::string, Entry>>& raw, std::vector<Diagnostic>& errors)
        : raw_(raw), errors_(errors) {}

    const Entry* entry(std::string_view section, std::string_view key) const {
        auto s = raw_.find(std::string(section));
        if (s == raw_.end()) return nullptr;
        auto k = s->second.find(std::string(key));
        return k == s->second.end() ? nullptr : &k->second;
    }
    int line(std::string_view section, std::string_view key) const {
        const Entry* e = entry(section, key);
        return e ? e->line : 0;
    }

    void number(std::string_view s, std::string_view k, double& out) {
        if (const Entry* e = entry(s, k)) {
            if (auto v = to_number(e->value)) out = *v;
            else mismatch(*e, k, ValueType::number);
        }
    }
    void number(std::string_view s, std::string_view k, std::optional<double>& out) {
        if (entry(s, k)) {
            double v = 0.0;
            const auto before = errors_.size();
            number(s, k, v);
            if (errors_.size() == before) out = v;
        }
    }
    template <class Int>
    void integer(std::string_view s, std::string_view k, Int& out) {
        if (const Entry* e = entry(s, k)) {
            if (auto v = to_integer(e->value)) out = static_cast<Int>(*v);
            else mismatch(*e, k, ValueType::integer);
        }
    }
    void boolean(std::string_view s, std::string_view k, bool& out) {
        if (const Entry* e = entry(s, k)) {
            if (auto v = to_bool(e->value)) out = *v;
            else mismatch(*e, k, ValueType::boolean);
        }
    }
    void text(std::string_view s, std::string_view k, std::string& out) {
        if (const Entry* e = entry(s, k)) out = e->value;
    }
    void path(std::string_view s, std::string_view k, std::filesystem::path& out) {
        if (const Entry* e = entry(s, k)) out = e->value;
    }
    void numbers(std::string_view s, std::string_view k, std::vector<double>& out) {
        if (const Entry* e = entry(s, k)) {
            std::vector<double> v;
            for (const auto& item : split_list(e->value)) {
                if (auto d = to_number(item)) {
                    v.push_back(*d);
                } else {
                    mismatch(*e, k, ValueType::number_list);
                    return;
                }
            }
            out = std::move(v);
        }
    }
    void scaling(std::string_view s, std::string_view k, std::vector<std::pair<double, double>>& out) {
        if (const Entry* e = entry(s, k)) {
            std::vector<std::pair<double, double>> v;
            for (const auto& item : split_list(e->value)) {
                const auto colon = item.find(':');
                std::optional<double> a, b;
                if (colon != std::string::npos) {
                    a = to_number(trim(item.substr(0, colon)));
                    b = to_number(trim(item.substr(colon + 1)));
                }
                if (!a || !b) {
                    errors_.push_back({e->line, std::string(k) + ": expected pairs a:b, got '" + item + "'"});
                    return;
                }
                v.emplace_back(*a, *b);
            }
            out = std::move(v);
        }
    }

    void fail(std::string_view s, std::string_view k, std::string message) {
        errors_.push_back({line(s, k), std::move(message)});
    }

private:
    void mismatch(const Entry& e, std::string_view k, ValueType t) {
        errors_.push_back({e.line, std::string(k) + ": expected " + std::string(type_name(t)) + ", got '" + e.value + "'"});
    }

    std::map<std::string, std::map<std::string, Entry>>& raw_;
    std::vector<Diagnostic>& errors_;
};

}  // namespace detail

/// Parses `key = value` lines grouped in [section]s; '#' and ';' start
/// comments. Relative paths are resolved against base_dir. Validation is
/// against the needs of `command` when given. Throws ConfigError listing
/// every problem found.
inline RunConfig parse_config(std::string_view text, std::optional<Command> command = std::nullopt,
                              const std::filesystem::path& base_dir = {}) {
    std::vector<Diagnostic> errors;
    std::map<std::string, std::map<std::string, detail::Entry>> raw;
    std::map<std::string, int> section_lines;
    RunConfig cfg;
    cfg.text = std::string(text);

    std::string section;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    bool skipping = false;  // inside an unknown section
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        const auto hash = line.find_first_of("#;");
        std::string body = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') {
                errors.push_back({lineno, "malformed section header '" + body + "'"});
                skipping = true;
                continue;
            }
            section = detail::trim(body.substr(1, body.size() - 2));
            if (!detail::known_section(section) || section.empty()) {
                errors.push_back({lineno, "unknown section [" + section + "]; did you mean [" +
                                              detail::nearest_section(section) + "]?"});
                skipping = true;
                continue;
            }
            skipping = false;
            if (section_lines.count(section)) {
                errors.push_back({lineno, "section [" + section + "] repeated (first at line " +
                                              std::to_string(section_lines[section]) + ")"});
            } else {
                section_lines[section] = lineno;
                cfg.sections.push_back(section);
            }
            continue;
        }
        if (skipping) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            errors.push_back({lineno, "expected 'key = value', got '" + body + "'"});
            continue;
        }
        const std::string key = detail::trim(body.substr(0, eq));
        const std::string value = detail::trim(body.substr(eq + 1));
        const std::string where = section.empty() ? "at top level" : "in [" + section + "]";
        if (key.empty()) {
            errors.push_back({lineno, "missing key before '='"});
            continue;
        }
        if (!detail::find_key(section, key)) {
            std::string msg = "unknown key '" + key + "' " + where;
            if (auto s = detail::nearest_key(section, key); !s.empty()) msg += "; did you mean '" + s + "'?";
            errors.push_back({lineno, msg});
            continue;
        }
        auto& slot = raw[section];
        if (auto it = slot.find(key); it != slot.end()) {
            errors.push_back({lineno, "key '" + key + "' repeated " + where + " (first at line " +
                                          std::to_string(it->second.line) + ")"});
            continue;
        }
        slot[key] = {value, lineno};
    }

    detail::Reader r(raw, errors);
    r.integer("", "seed", cfg.seed);

    r.text("model", "kind", cfg.model.kind);
    r.number("model", "k", cfg.model.k);
    r.number("model", "n", cfg.model.n);
    r.number("model", "coefficient", cfg.model.coefficient);
    r.path("model", "table", cfg.model.table);

    auto& p = cfg.problem;
    r.number("problem", "M", p.mass);
    r.integer("problem", "J", p.J);
    r.number("problem", "r_inner", p.r_inner);
    r.number("problem", "r_outer", p.r_outer);
    r.number("problem", "theta", p.theta);
    r.number("problem", "tolerance", p.tolerance);
    r.number("problem", "el_tolerance", p.el_tolerance);
    r.integer("problem", "max_iterations", p.max_iterations);
    r.numbers("problem", "masses", p.masses);

    auto& s = cfg.sim;
    r.integer("sim", "Np", s.np);
    r.number("sim", "dt", s.dt);
    r.integer("sim", "steps", s.steps);
    r.integer("sim", "N", s.N);
    r.number("sim", "box_factor", s.box_factor);
    r.integer("sim", "diag_every", s.diag_every);
    r.text("sim", "perturbation", s.perturbation);
    r.number("sim", "amplitude", s.amplitude);
    r.number("sim", "energy_tolerance", s.energy_tolerance);

    r.path("output", "directory", cfg.output.directory);
    r.path("output", "solution", cfg.output.solution);
    r.integer("output", "snapshot_every", cfg.output.snapshot_every);

    auto& v = cfg.verify;
    r.numbers("verify", "extra_k", v.extra_k);
    r.scaling("verify", "scaling", v.scaling);
    r.boolean("verify", "family", v.family);
    r.integer("verify", "family_count", v.family_count);
    r.integer("verify", "family_N", v.family_N);
    r.number("verify", "family_box", v.family_box);
    r.numbers("verify", "radii", v.radii);
    r.number("verify", "headroom", v.headroom);
    r.boolean("verify", "steady", v.steady);
    r.boolean("verify", "scan", v.scan);
    r.number("verify", "tolerance", v.tolerance);

    // value checks
    const auto& m = cfg.model;
    if (m.kind != "polytrope" && m.kind != "table")
        r.fail("model", "kind", "kind must be 'polytrope' or 'table', got '" + m.kind + "'");
    if (m.kind == "polytrope") {
        if (m.k && m.n) r.fail("model", "n", "give either k or n, not both");
        if (m.k && !(*m.k > 0.0)) r.fail("model", "k", "k must be positive");
        if (m.n && !(*m.n > 0.0 && *m.n < 2.0)) r.fail("model", "n", "n must lie in (0, 2)");
        if (!(m.coefficient > 0.0)) r.fail("model", "coefficient", "coefficient must be positive");
        if (!m.table.empty()) r.fail("model", "table", "table is only read for kind = table");
    } else if (m.kind == "table") {
        if (m.table.empty()) errors.push_back({section_lines.count("model") ? section_lines["model"] : 0,
                                               "missing key 'table' in [model] (required for kind = table)"});
        if (m.k || m.n) r.fail("model", m.k ? "k" : "n", "k and n are not read for kind = table");
    }
    if (!(p.mass > 0.0)) r.fail("problem", "M", "M must be positive");
    if (p.J < 16) r.fail("problem", "J", "J must be at least 16");
    if (!(p.r_inner > 0.0)) r.fail("problem", "r_inner", "r_inner must be positive");
    if (!(p.r_outer > p.r_inner)) r.fail("problem", "r_outer", "r_outer must exceed r_inner");
    if (!(p.theta > 0.0 && p.theta <= 1.0)) r.fail("problem", "theta", "theta must lie in (0, 1]");
    if (!(p.tolerance > 0.0)) r.fail("problem", "tolerance", "tolerance must be positive");
    if (!(p.el_tolerance > 0.0)) r.fail("problem", "el_tolerance", "el_tolerance must be positive");
    if (p.max_iterations < 1) r.fail("problem", "max_iterations", "max_iterations must be positive");
    for (std::size_t i = 0; i < p.masses.size(); ++i) {
        if (!(p.masses[i] > 0.0)) {
            r.fail("problem", "masses", "masses must be positive");
            break;
        }
        if (i > 0 && !(p.masses[i] > p.masses[i - 1])) {
            r.fail("problem", "masses", "masses must be strictly ascending");
            break;
        }
    }
    if (s.np < 1) r.fail("sim", "Np", "Np must be positive");
    if (!(s.dt > 0.0 && s.dt <= 0.02)) r.fail("sim", "dt", "dt must lie in (0, 0.02] dynamical times");
    if (s.steps < 0) r.fail("sim", "steps", "steps must be nonnegative");
    if (s.N < 16 || (s.N & (s.N - 1)) != 0) r.fail("sim", "N", "N must be a power of two >= 16");
    if (!(s.box_factor >= 8.0)) r.fail("sim", "box_factor", "box_factor must be at least 8");
    if (s.diag_every < 1) r.fail("sim", "diag_every", "diag_every must be positive");
    if (s.perturbation != "none" && s.perturbation != "boost" && s.perturbation != "position_scale" &&
        s.perturbation != "velocity_noise")
        r.fail("sim", "perturbation", "perturbation must be none, boost, position_scale or velocity_noise");
    if (s.perturbation == "position_scale" && !(s.amplitude > -1.0))
        r.fail("sim", "amplitude", "position_scale amplitude must exceed -1");
    if (s.perturbation == "velocity_noise" && !(s.amplitude >= 0.0))
        r.fail("sim", "amplitude", "velocity_noise amplitude must be nonnegative");
    if (!(s.energy_tolerance > 0.0)) r.fail("sim", "energy_tolerance", "energy_tolerance must be positive");
    if (cfg.output.directory.empty()) r.fail("output", "directory", "directory must not be empty");
    if (const auto sol = cfg.output.solution.lexically_normal();
        sol.empty() || sol.is_absolute() || *sol.begin() == "..")
        r.fail("output", "solution", "solution must be a path inside the output directory");
    if (cfg.output.snapshot_every < 0)r.fail("output", "snapshot_every", "snapshot_every must be nonnegative");
    for (double k : v.extra_k)
        if (!(k > 0.0)) {
            r.fail("verify", "extra_k", "extra_k values must be positive");
            break;
        }
    for (auto [a, b] : v.scaling)
        if (!(a > 0.0 && b > 0.0)) {
            r.fail("verify", "scaling", "scaling factors must be positive");
            break;
        }
    if (v.family_count < 1) r.fail("verify", "family_count", "family_count must be positive");
    if (v.family_N < 16 || (v.family_N & (v.family_N - 1)) != 0)
        r.fail("verify", "family_N", "family_N must be a power of two >= 16");
    if (!(v.family_box > 0.0)) r.fail("verify", "family_box", "family_box must be positive");
    if (!(v.headroom >= 0.0)) r.fail("verify", "headroom", "headroom must be nonnegative");
    if (v.tolerance && !(*v.tolerance > 0.0)) r.fail("verify", "tolerance", "tolerance must be positive");

    if (command) {
        for (auto need : required_sections(*command))
            if (!cfg.has_section(need))
                errors.push_back({0, "missing section [" + std::string(need) + "] required by '" +
                                         std::string(command_name(*command)) + "'"});
        if (cfg.has_section("model") && m.kind == "polytrope" && !m.k && !m.n)
            errors.push_back({section_lines["model"], "missing key 'k' (or 'n') in [model]"});
        if ((*command == Command::lift) && m.n)
            r.fail("model", "n", "lift needs a phase-space model: give k instead of n");
    }

    std::stable_sort(errors.begin(), errors.end(), [](const Diagnostic& a, const Diagnostic& b) {
        return (a.line == 0 ? 1 << 30 : a.line) < (b.line == 0 ? 1 << 30 : b.line);
    });
    if (!errors.empty()) throw ConfigError(std::move(errors));

    if (!base_dir.empty()) {
        auto resolve = [&](std::filesystem::path& q) {
            if (!q.empty() && q.is_relative()) q = base_dir / q;
        };
        resolve(cfg.model.table);
        resolve(cfg.output.directory);
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path, std::optional<Command> command = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), command, path.parent_path().empty() ? "." : path.parent_path());
}

/// Text listing the keys read by `c`, for --help.
inline std::string keys_help(Command c) {
    std::ostringstream out;
    out << "Config keys read by '" << command_name(c) << "':\n";
    std::string_view current = "\x01";
    for (const auto& k : key_registry()) {
        if (!(k.used_by & static_cast<unsigned>(c))) continue;
        if (k.section != current) {
            current = k.section;
            out << (current.empty() ? std::string("  (top level)") : "  [" + std::string(current) + "]") << '\n';
        }
        out << "    " << k.key << " (" << type_name(k.type) << ", default "
            << (k.fallback.empty() ? std::string("unset") : std::string(k.fallback)) << "): " << k.help << '\n';
    }
    return out.str();
}

}  // namespace flatgrav::cli
