#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "koopsafe/common.hpp"
#include "koopsafe/simulation.hpp"

namespace koopsafe {

inline constexpr const char* kCsvHeader =
    "t,x,y,vx,vy,ax,ay,dx_true,dy_true,dx_hat,dy_hat,delta,h1,h2,qp_active,"
    "qp_iters,slack";

namespace detail {

// Shortest decimal that round-trips a double exactly.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// Fixed-schema CSV, one row per decimation step. Barrier columns carry the
// first two obstacles (NaN when absent).
inline void emit_csv(const RunLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(format_msg("cannot write CSV '", path, "'"));
    out << kCsvHeader << "\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < log.rows.size(); ++k) {
        if (k % static_cast<std::size_t>(log.decimation) != 0) continue;
        const RunRow& r = log.rows[k];
        const double h1 = r.h.size() > 0 ? r.h[0] : nan;
        const double h2 = r.h.size() > 1 ? r.h[1] : nan;
        using detail::fmt_double;
        out << fmt_double(r.t) << ',' << fmt_double(r.z(0)) << ','
            << fmt_double(r.z(1)) << ',' << fmt_double(r.z(2)) << ','
            << fmt_double(r.z(3)) << ',' << fmt_double(r.u(0)) << ','
            << fmt_double(r.u(1)) << ',' << fmt_double(r.d_true(2)) << ','
            << fmt_double(r.d_true(3)) << ',' << fmt_double(r.d_hat(2)) << ','
            << fmt_double(r.d_hat(3)) << ',' << fmt_double(r.delta) << ','
            << fmt_double(h1) << ',' << fmt_double(h2) << ',' << r.qp_active
            << ',' << r.qp_iters << ',' << fmt_double(r.slack) << "\n";
    }
    if (!out) throw IoError(format_msg("write failed for CSV '", path, "'"));
}

inline void emit_summary(const RunLog& log, const std::string& path) {
    const RunSummary& s = log.summary;
    nlohmann::json j;
    j["regime"] = s.regime;
    j["seed"] = s.seed;
    j["noise"] = s.noise_enabled;
    j["min_h"] = s.min_h;
    j["min_h_per_obstacle"] = s.min_h_per_obstacle;
    j["settling_time"] = s.settling_time;
    j["max_dtilde_after_T"] = s.max_dtilde_after_T;
    j["settling_achieved"] = s.settling_achieved;
    j["delta_monotone"] = s.delta_monotone;
    j["runtime_ms"] = s.runtime_ms;
    j["steps"] = s.steps;
    j["dt"] = log.dt;
    std::ofstream out(path);
    if (!out) throw IoError(format_msg("cannot write summary '", path, "'"));
    out << j.dump(2) << "\n";
    if (!out)
        throw IoError(format_msg("write failed for summary '", path, "'"));
}

// Parsed CSV for replotting: column-major doubles keyed by header name.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;  // data[col][row]
    std::string label;

    const std::vector<double>& col(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return data[i];
        throw IoError(format_msg("CSV has no column '", name, "'"));
    }
};

inline CsvTable parse_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(format_msg("cannot open CSV '", path, "'"));
    CsvTable table;
    std::string line;
    if (!std::getline(in, line))
        throw IoError(format_msg("CSV '", path, "' is empty"));
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) table.columns.push_back(cell);
    table.data.resize(table.columns.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::size_t i = 0;
        while (std::getline(row, cell, ',')) {
            if (i >= table.columns.size())
                throw IoError(format_msg("CSV '", path, "' has a long row"));
            table.data[i++].push_back(std::strtod(cell.c_str(), nullptr));
        }
        if (i != table.columns.size())
            throw IoError(format_msg("CSV '", path, "' has a short row"));
    }
    table.label = path;
    const auto slash = table.label.find_last_of('/');
    if (slash != std::string::npos) table.label = table.label.substr(slash + 1);
    const auto dot = table.label.find_last_of('.');
    if (dot != std::string::npos) table.label = table.label.substr(0, dot);
    return table;
}

}  // namespace koopsafe
