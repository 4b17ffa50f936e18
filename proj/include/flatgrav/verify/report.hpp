#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "flatgrav/core/error.hpp"
#include "flatgrav/core/hash.hpp"

namespace flatgrav::verify {

/// Outcome of one executable check.
struct CheckReport {
    std::string id;
    std::string reference;      // the statement being checked, in words
    std::string inputs_digest;  // digest of the canonical inputs
    std::map<std::string, double> measured;
    double tolerance = 0.0;
    bool passed = false;
    std::string notes;
    std::vector<std::string> flags;

    bool operator==(const CheckReport& o) const {
        if (id != o.id || reference != o.reference || inputs_digest != o.inputs_digest || passed != o.passed ||
            notes != o.notes || flags != o.flags || measured.size() != o.measured.size() || !same(tolerance, o.tolerance))
            return false;
        for (auto a = measured.begin(), b = o.measured.begin(); a != measured.end(); ++a, ++b)
            if (a->first != b->first || !same(a->second, b->second)) return false;
        return true;
    }

private:
    static bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }
};

namespace detail {

// JSON has no non-finite numbers; they travel as strings.
inline nlohmann::json number_to_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline double number_from_json(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    const std::string s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw IoError("bad number in report: " + s);
}

}  // namespace detail

inline nlohmann::json to_json(const CheckReport& r) {
    nlohmann::json measured = nlohmann::json::object();
    for (const auto& [k, v] : r.measured) measured[k] = detail::number_to_json(v);
    return {{"id", r.id},
            {"reference", r.reference},
            {"inputs_digest", r.inputs_digest},
            {"measured", measured},
            {"tolerance", detail::number_to_json(r.tolerance)},
            {"passed", r.passed},
            {"notes", r.notes},
            {"flags", r.flags}};
}

inline CheckReport report_from_json(const nlohmann::json& j) {
    try {
        CheckReport r;
        r.id = j.at("id").get<std::string>();
        r.reference = j.at("reference").get<std::string>();
        r.inputs_digest = j.at("inputs_digest").get<std::string>();
        for (const auto& [k, v] : j.at("measured").items()) r.measured[k] = detail::number_from_json(v);
        r.tolerance = detail::number_from_json(j.at("tolerance"));
        r.passed = j.at("passed").get<bool>();
        r.notes = j.at("notes").get<std::string>();
        r.flags = j.at("flags").get<std::vector<std::string>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed check report: ") + e.what());
    }
}

inline void write_jsonl(std::ostream& out, std::span<const CheckReport> reports) {
    for (const auto& r : reports) out << to_json(r).dump() << '\n';
}

inline std::vector<CheckReport> read_jsonl(std::istream& in) {
    std::vector<CheckReport> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(report_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw IoError(std::string("report line is not JSON: ") + e.what());
        }
    }
    return out;
}

inline void write_summary_csv(std::ostream& out, std::span<const CheckReport> reports) {
    out << "id,passed,tolerance,inputs_digest,flags\n";
    for (const auto& r : reports) {
        std::string flags;
        for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
        out << r.id << ',' << (r.passed ? "pass" : "fail") << ',' << detail::number_to_json(r.tolerance).dump() << ','
            << r.inputs_digest << ',' << flags << '\n';
    }
}

inline bool all_passed(std::span<const CheckReport> reports) {
    for (const auto& r : reports)
        if (!r.passed) return false;
    return true;
}

/// Digest of a JSON description of a check's inputs.
inline std::string inputs_digest(const nlohmann::json& inputs) { return digest(inputs.dump()); }

}  // namespace flatgrav::verify
