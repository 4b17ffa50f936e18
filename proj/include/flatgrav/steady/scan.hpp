#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "flatgrav/core/error.hpp"
#include "flatgrav/steady/solver.hpp"

namespace flatgrav::steady {

struct MassRow {
    double mass = 0.0;
    double h = 0.0;
    double e0 = 0.0;
    int iterations = 0;
};

struct PairCheck {
    double small = 0.0, large = 0.0;
    double lhs = 0.0;  // h at the smaller mass
    double rhs = 0.0;  // (small/large)^(3/2) h at the larger mass
    bool holds() const noexcept { return lhs >= rhs - 1e-12 * std::abs(rhs); }
};

struct MassScan {
    std::vector<MassRow> rows;
    std::vector<PairCheck> pairs;
    bool polytrope = false;
    double expected_exponent = 0.0;  // (3 - n)/(2 - n)
    double fitted_exponent = 0.0;    // least-squares slope of log|h| in log M
    bool all_negative() const noexcept {
        for (const auto& r : rows)
            if (!(r.h < 0.0)) return false;
        return true;
    }
    bool pairs_hold() const noexcept {
        for (const auto& p : pairs)
            if (!p.holds()) return false;
        return true;
    }
};

/// Solves the reduced problem for each mass (ascending) and checks the
/// sign of h_M, the subadditivity-type bound h_small >= (small/large)^(3/2)
/// h_large for every pair, and for pure power laws the homogeneity exponent.
inline MassScan scan_mass(const ConvexModel& psi, const std::vector<double>& masses, const SteadyProblem& base) {
    for (std::size_t i = 0; i < masses.size(); ++i) {
        if (!(masses[i] > 0.0)) throw ConfigurationError("masses must be positive");
        if (i > 0 && !(masses[i] > masses[i - 1])) throw ConfigurationError("masses must be sorted ascending");
    }
    MassScan scan;
    std::string failures;
    for (double m : masses) {
        SteadyProblem p = base;
        p.psi = psi;
        p.mass = m;
        p.initial.reset();
        try {
            const SteadyStateSolution s = solve_reduced(p);
            if (!s.converged) throw AccuracyError("not converged", s.residuals.el);
            scan.rows.push_back({m, s.energies.h, s.e0, s.iterations});
        } catch (const Error& e) {
            failures += " M=" + std::to_string(m) + " (" + e.what() + ")";
        }
    }
    if (!failures.empty()) throw PartialResultError("mass scan failed for" + failures);

    for (std::size_t i = 0; i < scan.rows.size(); ++i)
        for (std::size_t j = i + 1; j < scan.rows.size(); ++j) {
            const MassRow& a = scan.rows[i];
            const MassRow& b = scan.rows[j];
            scan.pairs.push_back({a.mass, b.mass, a.h, std::pow(a.mass / b.mass, 1.5) * b.h});
        }

    scan.polytrope = psi.is_polytrope();
    if (scan.polytrope) {
        const double n = 1.0 / (psi.exponent() - 1.0);
        scan.expected_exponent = (3.0 - n) / (2.0 - n);
    }
    if (scan.rows.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double k = static_cast<double>(scan.rows.size());
        for (const auto& r : scan.rows) {
            const double x = std::log(r.mass), y = std::log(std::abs(r.h));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        scan.fitted_exponent = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    }
    return scan;
}

}  // namespace flatgrav::steady
