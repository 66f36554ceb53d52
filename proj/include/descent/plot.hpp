#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "descent/bench.hpp"
#include "descent/error.hpp"

namespace descent {

namespace detail {

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> pts; // (epoch, value)
};

inline std::vector<Series> collect_series(const std::vector<MetricsRow>& rows, bool accuracy) {
    std::vector<Series> series;
    for (const auto& row : rows) {
        if (row.final_row) continue;
        auto it = std::find_if(series.begin(), series.end(),
                               [&row](const Series& s) { return s.name == row.optimizer; });
        if (it == series.end()) {
            series.push_back({row.optimizer, {}});
            it = series.end() - 1;
        }
        it->pts.emplace_back(static_cast<double>(row.epoch),
                             accuracy ? row.val_accuracy : row.train_loss);
    }
    return series;
}

inline const char* series_color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % (sizeof palette / sizeof palette[0])];
}

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Minimal line chart. Fixed canvas, left/bottom axes with five ticks each,
// legend on the right. No external renderer involved.
inline std::string render_chart(const std::vector<Series>& series, const std::string& title,
                                const std::string& y_label) {
    const double width = 760, height = 480;
    const double left = 72, right = width - 170, top = 48, bottom = height - 56;

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.pts) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmax - xmin < 1e-12) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax - ymin < 1e-12) {
        double pad = std::max(0.5, std::fabs(ymax) * 0.1);
        ymin -= pad;
        ymax += pad;
    } else {
        double pad = (ymax - ymin) * 0.05;
        ymin -= pad;
        ymax += pad;
    }

    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
    auto sy = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                  "viewBox=\"0 0 %.0f %.0f\">\n",
                  width, height, width, height);
    out << buf;
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
                  "text-anchor=\"middle\">%s</text>\n",
                  (left + right) / 2, title.c_str());
    out << buf;

    for (int t = 0; t <= 4; ++t) {
        double fx = xmin + (xmax - xmin) * t / 4.0;
        double fy = ymin + (ymax - ymin) * t / 4.0;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n",
                      sx(fx), top, sx(fx), bottom);
        out << buf;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n",
                      left, sy(fy), right, sy(fy));
        out << buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\" "
                      "text-anchor=\"middle\">%s</text>\n",
                      sx(fx), bottom + 18, fmt_tick(fx).c_str());
        out << buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\" "
                      "text-anchor=\"end\">%s</text>\n",
                      left - 8, sy(fy) + 4, fmt_tick(fy).c_str());
        out << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  left, top, left, bottom);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  left, bottom, right, bottom);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\" "
                  "text-anchor=\"middle\">epoch</text>\n",
                  (left + right) / 2, height - 14);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"18\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\" "
                  "text-anchor=\"middle\" transform=\"rotate(-90 18 %.1f)\">%s</text>\n",
                  (top + bottom) / 2, (top + bottom) / 2, y_label.c_str());
    out << buf;

    for (std::size_t i = 0; i < series.size(); ++i) {
        const Series& s = series[i];
        out << "<polyline fill=\"none\" stroke=\"" << series_color(i)
            << "\" stroke-width=\"1.8\" points=\"";
        for (const auto& [x, y] : s.pts) {
            std::snprintf(buf, sizeof buf, "%.1f,%.1f ", sx(x), sy(y));
            out << buf;
        }
        out << "\"/>\n";
        double ly = top + 10 + 18.0 * static_cast<double>(i);
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" "
                      "stroke-width=\"1.8\"/>\n",
                      right + 12, ly, right + 36, ly, series_color(i));
        out << buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" "
                      "font-size=\"12\">%s</text>\n",
                      right + 42, ly + 4, s.name.c_str());
        out << buf;
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace detail

inline std::string render_loss_svg(const std::vector<MetricsRow>& rows) {
    auto series = detail::collect_series(rows, false);
    if (series.empty()) throw Error("format", "no epoch rows to plot");
    return detail::render_chart(series, "train loss by epoch", "train loss");
}

inline std::string render_accuracy_svg(const std::vector<MetricsRow>& rows) {
    auto series = detail::collect_series(rows, true);
    if (series.empty()) throw Error("format", "no epoch rows to plot");
    return detail::render_chart(series, "validation accuracy by epoch", "val accuracy");
}

// Writes loss.svg and accuracy.svg under out_dir, returns the two paths.
inline std::vector<std::string> emit_plots(const std::vector<MetricsRow>& rows,
                                           const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> written;
    const std::pair<const char*, std::string> files[] = {
        {"loss.svg", render_loss_svg(rows)},
        {"accuracy.svg", render_accuracy_svg(rows)},
    };
    for (const auto& [name, body] : files) {
        fs::path path = fs::path(out_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("io", "cannot write " + path.string());
        out << body;
        if (!out) throw Error("io", "short write to " + path.string());
        written.push_back(path.string());
    }
    return written;
}

} // namespace descent
