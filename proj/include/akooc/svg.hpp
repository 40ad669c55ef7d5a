#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "akooc/errors.hpp"
#include "akooc/harness.hpp"

namespace akooc {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

namespace detail {

inline const char* series_color(size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % 8];
}

inline std::string svg_num(double v) { return fmt_double(v); }

}  // namespace detail

/// Minimal line plot: axes box, linear ticks, one polyline per series with a
/// legend. NaN samples break the polyline.
inline void render_plot(const std::vector<PlotSeries>& series, const std::string& title,
                        const std::string& x_label, const std::string& y_label,
                        const std::string& path) {
    if (series.empty()) throw IoError("render_plot: no series");
    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const PlotSeries& s : series) {
        if (s.x.size() != s.y.size()) throw DimensionMismatch("render_plot: x/y size");
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, s.y[i]);
            y_max = std::max(y_max, s.y[i]);
        }
    }
    if (!std::isfinite(x_min) || !std::isfinite(y_min))
        throw IoError("render_plot: no finite samples");
    if (x_max == x_min) x_max = x_min + 1.0;
    if (y_max == y_min) {
        y_max += 0.5;
        y_min -= 0.5;
    }
    const double pad_y = 0.05 * (y_max - y_min);
    y_min -= pad_y;
    y_max += pad_y;

    const double W = 860, H = 480;
    const double ml = 80, mr = 20, mt = 40, mb = 55;
    const double pw = W - ml - mr, ph = H - mt - mb;
    auto sx = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * pw; };
    auto sy = [&](double y) { return mt + (y_max - y) / (y_max - y_min) * ph; };

    std::ofstream out(path);
    if (!out) throw IoError("cannot open SVG output: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\""
        << " font-size=\"15\">" << title << "</text>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
        << "</text>\n";
    out << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\""
        << " font-size=\"12\" transform=\"rotate(-90 16 " << H / 2 << ")\">" << y_label
        << "</text>\n";

    const int n_tick = 6;
    for (int i = 0; i <= n_tick; ++i) {
        const double xv = x_min + (x_max - x_min) * i / n_tick;
        const double yv = y_min + (y_max - y_min) * i / n_tick;
        out << "<line x1=\"" << sx(xv) << "\" y1=\"" << mt + ph << "\" x2=\"" << sx(xv)
            << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"#333\"/>\n";
        out << "<text x=\"" << sx(xv) << "\" y=\"" << mt + ph + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
            << detail::svg_num(std::round(xv * 1e6) / 1e6) << "</text>\n";
        out << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy(yv) << "\" x2=\"" << ml << "\" y2=\""
            << sy(yv) << "\" stroke=\"#333\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << sy(yv) + 3
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
            << detail::svg_num(std::round(yv * 1e6) / 1e6) << "</text>\n";
    }

    for (size_t si = 0; si < series.size(); ++si) {
        const PlotSeries& s = series[si];
        std::string points;
        bool open = false;
        auto flush = [&]() {
            if (open && !points.empty())
                out << "<polyline fill=\"none\" stroke=\"" << detail::series_color(si)
                    << "\" stroke-width=\"1.4\" points=\"" << points << "\"/>\n";
            points.clear();
            open = false;
        };
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                flush();
                continue;
            }
            points += detail::svg_num(sx(s.x[i])) + "," + detail::svg_num(sy(s.y[i])) + " ";
            open = true;
        }
        flush();
        const double lx = ml + 12, ly = mt + 16 + 16 * static_cast<double>(si);
        out << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 24 << "\" y2=\""
            << ly - 4 << "\" stroke=\"" << detail::series_color(si) << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << lx + 30 << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.name << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw IoError("short write: " + path);
}

/// Extract a named channel from a trace CSV as a plot series against time.
inline PlotSeries channel_series(const CsvTable& table, const std::string& channel,
                                 const std::string& label) {
    PlotSeries s;
    s.name = label;
    s.x = table.col("time_s");
    s.y = table.col(channel);  // throws UnknownChannel
    return s;
}

}  // namespace akooc
