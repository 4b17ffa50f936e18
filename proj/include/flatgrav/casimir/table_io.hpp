#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "flatgrav/casimir/convex_model.hpp"
#include "flatgrav/core/error.hpp"

namespace flatgrav::casimir {

inline constexpr const char* table_header = "# convex-model v1";

struct TableColumns {
    std::vector<double> args, values;
};

/// Reads the two-column (argument, value) table format without validating
/// the samples.
inline TableColumns read_table_columns(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind(table_header, 0) != 0)
        throw IoError("missing '# convex-model v1' header");
    std::vector<double> args, values;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream row(line);
        double a = 0, v = 0;
        if (!(row >> a >> v)) throw IoError("malformed table row at line " + std::to_string(lineno));
        args.push_back(a);
        values.push_back(v);
    }
    return {std::move(args), std::move(values)};
}

inline ConvexModel parse_model_table(std::istream& in) {
    TableColumns t = read_table_columns(in);
    return ConvexModel::tabulated(std::move(t.args), std::move(t.values));
}

inline TableColumns load_table_columns(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model table " + path);
    return read_table_columns(in);
}

inline ConvexModel load_model_table(const std::string& path) {
    TableColumns t = load_table_columns(path);
    return ConvexModel::tabulated(std::move(t.args), std::move(t.values));
}

inline void write_table(std::ostream& out, const std::vector<double>& args, const std::vector<double>& values) {
    out << table_header << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < args.size(); ++i) out << args[i] << ',' << values[i] << '\n';
}

inline void save_model_table(const std::string& path, const std::vector<double>& args,
                             const std::vector<double>& values) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model table " + path);
    write_table(out, args, values);
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace flatgrav::casimir
