#pragma once

#include <string>

#include "flatgrav/casimir/convex_model.hpp"
#include "flatgrav/core/error.hpp"
#include "json.hpp"

namespace flatgrav::casimir {

inline nlohmann::json model_to_json(const ConvexModel& m) {
    if (m.is_polytrope()) return {{"kind", "polytrope"}, {"coefficient", m.coefficient()}, {"exponent", m.exponent()}};
    return {{"kind", "tabulated"}, {"args", m.args()}, {"values", m.values()}, {"slopes", m.slopes()}};
}

inline ConvexModel model_from_json(const nlohmann::json& j) {
    try {
        const std::string kind = j.at("kind");
        if (kind == "polytrope") return ConvexModel::polytrope(j.at("coefficient"), j.at("exponent"));
        if (kind == "tabulated")
            return ConvexModel::tabulated(j.at("args").get<std::vector<double>>(), j.at("values").get<std::vector<double>>(),
                                          j.at("slopes").get<std::vector<double>>());
        throw IoError("unknown model kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed model description: ") + e.what());
    }
}

}  // namespace flatgrav::casimir
