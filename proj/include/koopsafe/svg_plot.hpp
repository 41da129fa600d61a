#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "koopsafe/common.hpp"
#include "koopsafe/output.hpp"
#include "koopsafe/simulation.hpp"

namespace koopsafe {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotCircle {
    double cx = 0.0, cy = 0.0, r = 1.0;
};

struct AxisRange {
    double lo = 0.0;
    double hi = 1.0;
    double span() const { return hi - lo; }
};

// Data range padded by 5% on both sides; degenerate ranges get a unit pad.
inline AxisRange padded_range(double mn, double mx) {
    if (!(mn <= mx)) return {0.0, 1.0};
    double span = mx - mn;
    if (span <= 0.0) span = std::max(1.0, std::abs(mn));
    return {mn - 0.05 * span, mx + 0.05 * span};
}

namespace detail {

inline const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '"') out += "&quot;";
        else out += c;
    }
    return out;
}

inline std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

inline double nice_step(double span, int target_ticks = 6) {
    if (!(span > 0.0)) return 1.0;
    const double raw = span / target_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    const double step = norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0
                                                                         : 10.0;
    return step * mag;
}

}  // namespace detail

// Hand-rolled line chart: axes with ticks, legend, optional circles (data
// coordinates; drawn as ellipses under the two axis scales). No external
// renderer involved.
inline void write_line_chart(const std::string& path, const std::string& title,
                             const std::string& xlabel,
                             const std::string& ylabel,
                             const std::vector<PlotSeries>& series,
                             const std::vector<PlotCircle>& circles = {},
                             bool equal_aspect = false) {
    constexpr double W = 860.0, H = 600.0;
    constexpr double ml = 70.0, mr = 30.0, mt = 45.0, mb = 55.0;
    const double pw = W - ml - mr, ph = H - mt - mb;

    double mnx = std::numeric_limits<double>::infinity(), mxx = -mnx;
    double mny = mnx, mxy = -mnx;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            mnx = std::min(mnx, s.x[i]);
            mxx = std::max(mxx, s.x[i]);
            mny = std::min(mny, s.y[i]);
            mxy = std::max(mxy, s.y[i]);
        }
    for (const auto& c : circles) {
        mnx = std::min(mnx, c.cx - c.r);
        mxx = std::max(mxx, c.cx + c.r);
        mny = std::min(mny, c.cy - c.r);
        mxy = std::max(mxy, c.cy + c.r);
    }
    AxisRange xr = padded_range(mnx, mxx);
    AxisRange yr = padded_range(mny, mxy);
    if (equal_aspect) {
        const double unit_x = xr.span() / pw, unit_y = yr.span() / ph;
        const double unit = std::max(unit_x, unit_y);
        const double cx = 0.5 * (xr.lo + xr.hi), cy = 0.5 * (yr.lo + yr.hi);
        xr = {cx - 0.5 * unit * pw, cx + 0.5 * unit * pw};
        yr = {cy - 0.5 * unit * ph, cy + 0.5 * unit * ph};
    }

    const auto sx = [&](double x) {
        return ml + (x - xr.lo) / xr.span() * pw;
    };
    const auto sy = [&](double y) {
        return mt + ph - (y - yr.lo) / yr.span() * ph;
    };

    std::ofstream out(path);
    if (!out) throw IoError(format_msg("cannot write SVG '", path, "'"));
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
        << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H
        << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">"
        << detail::xml_escape(title) << "</text>\n";

    // frame + ticks
    out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
        << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
    const double tx = detail::nice_step(xr.span());
    for (double v = std::ceil(xr.lo / tx) * tx; v <= xr.hi + 1e-12 * tx;
         v += tx) {
        const double px = sx(v);
        out << "<line x1=\"" << detail::fmt_coord(px) << "\" y1=\"" << mt + ph
            << "\" x2=\"" << detail::fmt_coord(px) << "\" y2=\""
            << mt + ph + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << detail::fmt_coord(px) << "\" y=\""
            << mt + ph + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"11\">"
            << detail::fmt_tick(v) << "</text>\n";
    }
    const double ty = detail::nice_step(yr.span());
    for (double v = std::ceil(yr.lo / ty) * ty; v <= yr.hi + 1e-12 * ty;
         v += ty) {
        const double py = sy(v);
        out << "<line x1=\"" << ml - 5 << "\" y1=\"" << detail::fmt_coord(py)
            << "\" x2=\"" << ml << "\" y2=\"" << detail::fmt_coord(py)
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\""
            << detail::fmt_coord(py + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
               "font-size=\"11\">"
            << detail::fmt_tick(v) << "</text>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"13\">"
        << detail::xml_escape(xlabel) << "</text>\n";
    out << "<text x=\"18\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"13\" transform=\"rotate(-90 18 "
        << mt + ph / 2 << ")\">" << detail::xml_escape(ylabel) << "</text>\n";

    // obstacle outlines
    for (const auto& c : circles) {
        const double rx = c.r / xr.span() * pw;
        const double ry = c.r / yr.span() * ph;
        out << "<ellipse cx=\"" << detail::fmt_coord(sx(c.cx)) << "\" cy=\""
            << detail::fmt_coord(sy(c.cy)) << "\" rx=\""
            << detail::fmt_coord(rx) << "\" ry=\"" << detail::fmt_coord(ry)
            << "\" fill=\"#cccccc\" fill-opacity=\"0.5\" stroke=\"#555555\" "
            << "data-cx=\"" << detail::fmt_tick(c.cx) << "\" data-cy=\""
            << detail::fmt_tick(c.cy) << "\" data-r=\""
            << detail::fmt_tick(c.r) << "\"/>\n";
    }

    // series polylines, decimated to keep files small
    int color_idx = 0;
    for (const auto& s : series) {
        const char* color =
            detail::kPalette[color_idx++ % (sizeof(detail::kPalette) /
                                            sizeof(detail::kPalette[0]))];
        const std::size_t n = s.x.size();
        const std::size_t stride = std::max<std::size_t>(1, n / 1500);
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < n; i += stride) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            out << detail::fmt_coord(sx(s.x[i])) << ','
                << detail::fmt_coord(sy(s.y[i])) << ' ';
        }
        if (n > 0 && (n - 1) % stride != 0 && std::isfinite(s.x[n - 1]) &&
            std::isfinite(s.y[n - 1]))
            out << detail::fmt_coord(sx(s.x[n - 1])) << ','
                << detail::fmt_coord(sy(s.y[n - 1]));
        out << "\"/>\n";
    }

    // legend
    double ly = mt + 14;
    color_idx = 0;
    for (const auto& s : series) {
        const char* color =
            detail::kPalette[color_idx++ % (sizeof(detail::kPalette) /
                                            sizeof(detail::kPalette[0]))];
        const double lx = ml + pw - 180;
        out << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\""
            << lx + 24 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << lx + 30 << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"12\">"
            << detail::xml_escape(s.label) << "</text>\n";
        ly += 16;
    }
    out << "</svg>\n";
    if (!out) throw IoError(format_msg("write failed for SVG '", path, "'"));
}

// The four standard charts from one or more run tables: xy paths with
// obstacles and the reference curve, barrier traces, true vs estimated
// disturbance, and input components.
inline std::vector<std::string> emit_plot_files(
    const std::vector<CsvTable>& tables, const std::vector<PlotCircle>& discs,
    const Reference& ref, const std::string& out_dir) {
    if (tables.empty()) throw DomainError("emit_plots: no run data");
    std::vector<std::string> files;

    std::vector<PlotSeries> xy;
    {
        PlotSeries ref_curve{"reference", {}, {}};
        const double period = 2.0 * kPi / ref.omega;
        for (int i = 0; i <= 800; ++i) {
            const double t = period * i / 800.0;
            const auto p = reference_at(ref, t);
            ref_curve.x.push_back(p.pos(0));
            ref_curve.y.push_back(p.pos(1));
        }
        xy.push_back(std::move(ref_curve));
        for (const auto& tbl : tables)
            xy.push_back({tbl.label, tbl.col("x"), tbl.col("y")});
    }
    files.push_back(out_dir + "/xy_paths.svg");
    write_line_chart(files.back(), "XY paths", "x [m]", "y [m]", xy, discs,
                     true);

    std::vector<PlotSeries> hh;
    for (const auto& tbl : tables) {
        hh.push_back({tbl.label + " h1", tbl.col("t"), tbl.col("h1")});
        hh.push_back({tbl.label + " h2", tbl.col("t"), tbl.col("h2")});
    }
    files.push_back(out_dir + "/barriers.svg");
    write_line_chart(files.back(), "Barrier functions", "t [s]", "h", hh);

    std::vector<PlotSeries> dd;
    for (const auto& tbl : tables) {
        dd.push_back({tbl.label + " dx", tbl.col("t"), tbl.col("dx_true")});
        dd.push_back(
            {tbl.label + " dx est", tbl.col("t"), tbl.col("dx_hat")});
        dd.push_back({tbl.label + " dy", tbl.col("t"), tbl.col("dy_true")});
        dd.push_back(
            {tbl.label + " dy est", tbl.col("t"), tbl.col("dy_hat")});
    }
    files.push_back(out_dir + "/disturbance.svg");
    write_line_chart(files.back(), "Disturbance: true vs estimate", "t [s]",
                     "d [m/s^2]", dd);

    std::vector<PlotSeries> uu;
    for (const auto& tbl : tables) {
        uu.push_back({tbl.label + " ax", tbl.col("t"), tbl.col("ax")});
        uu.push_back({tbl.label + " ay", tbl.col("t"), tbl.col("ay")});
    }
    files.push_back(out_dir + "/inputs.svg");
    write_line_chart(files.back(), "Control inputs", "t [s]", "u [m/s^2]", uu);
    return files;
}

inline CsvTable table_from_log(const RunLog& log, const std::string& label) {
    CsvTable t;
    t.label = label;
    t.columns = {"t",       "x",      "y",      "vx",     "vy",   "ax",
                 "ay",      "dx_true", "dy_true", "dx_hat", "dy_hat", "delta",
                 "h1",      "h2",     "qp_active", "qp_iters", "slack"};
    t.data.resize(t.columns.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < log.rows.size(); ++k) {
        if (k % static_cast<std::size_t>(log.decimation) != 0) continue;
        const RunRow& r = log.rows[k];
        const double row[] = {r.t,
                              r.z(0),
                              r.z(1),
                              r.z(2),
                              r.z(3),
                              r.u(0),
                              r.u(1),
                              r.d_true(2),
                              r.d_true(3),
                              r.d_hat(2),
                              r.d_hat(3),
                              r.delta,
                              r.h.size() > 0 ? r.h[0] : nan,
                              r.h.size() > 1 ? r.h[1] : nan,
                              static_cast<double>(r.qp_active),
                              static_cast<double>(r.qp_iters),
                              r.slack};
        for (std::size_t i = 0; i < t.columns.size(); ++i)
            t.data[i].push_back(row[i]);
    }
    return t;
}

// Library-level plot entry point over in-memory logs.
inline std::vector<std::string> emit_plots(const std::vector<RunLog>& logs,
                                           const std::string& out_dir) {
    if (logs.empty()) throw DomainError("emit_plots: no logs");
    std::vector<CsvTable> tables;
    for (const auto& log : logs)
        tables.push_back(table_from_log(log, log.summary.regime));
    std::vector<PlotCircle> discs;
    for (const auto& o : logs.front().obstacles)
        discs.push_back({o.cx, o.cy, o.radius});
    return emit_plot_files(tables, discs, logs.front().reference, out_dir);
}

}  // namespace koopsafe
