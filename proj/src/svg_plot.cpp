#include "doa/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace doa {

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string rows_to_svg(const std::vector<BenchRow>& rows, const std::string& axis_label) {
    const int W = 720, H = 480;
    const int L = 70, R = 160, T = 30, B = 50;

    std::map<Method, std::vector<std::pair<double, double>>> series;  // axis -> mse_db
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const BenchRow& r : rows) {
        if (r.trials_used <= 0 || !(r.mse > 0.0)) continue;
        const double y = 10.0 * std::log10(r.mse);
        series[r.method].emplace_back(r.axis_value, y);
        xmin = std::min(xmin, r.axis_value);
        xmax = std::max(xmax, r.axis_value);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    if (series.empty()) {
        xmin = 0; xmax = 1; ymin = -1; ymax = 1;
    }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto sy = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
           "viewBox=\"0 0 720 480\">\n";
    svg += "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
    // axes
    svg += "<line x1=\"" + fmt(L) + "\" y1=\"" + fmt(H - B) + "\" x2=\"" + fmt(W - R) +
           "\" y2=\"" + fmt(H - B) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt(L) + "\" y1=\"" + fmt(T) + "\" x2=\"" + fmt(L) + "\" y2=\"" +
           fmt(H - B) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double x = xmin + (xmax - xmin) * i / 5.0;
        const double y = ymin + (ymax - ymin) * i / 5.0;
        svg += "<text x=\"" + fmt(sx(x)) + "\" y=\"" + fmt(H - B + 18) +
               "\" font-size=\"11\" text-anchor=\"middle\">" + fmt(x) + "</text>\n";
        svg += "<text x=\"" + fmt(L - 8) + "\" y=\"" + fmt(sy(y) + 4) +
               "\" font-size=\"11\" text-anchor=\"end\">" + fmt(y) + "</text>\n";
    }
    svg += "<text x=\"" + fmt((L + W - R) / 2.0) + "\" y=\"" + fmt(H - 12) +
           "\" font-size=\"13\" text-anchor=\"middle\">" + axis_label + "</text>\n";
    svg += "<text x=\"16\" y=\"" + fmt((T + H - B) / 2.0) +
           "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
           fmt((T + H - B) / 2.0) + ")\">MSE (dB rad^2)</text>\n";

    int ci = 0;
    int legend_y = T + 10;
    for (const auto& [method, pts] : series) {
        const char* color = kColors[ci % 5];
        std::string points;
        for (auto [x, y] : pts) points += fmt(sx(x)) + "," + fmt(sy(y)) + " ";
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.6\" points=\"" + points + "\"/>\n";
        svg += "<line x1=\"" + fmt(W - R + 14) + "\" y1=\"" + fmt(legend_y) + "\" x2=\"" +
               fmt(W - R + 40) + "\" y2=\"" + fmt(legend_y) + "\" stroke=\"" + color +
               "\" stroke-width=\"1.6\"/>\n";
        svg += "<text x=\"" + fmt(W - R + 46) + "\" y=\"" + fmt(legend_y + 4) +
               "\" font-size=\"12\">" + method_name(method) + "</text>\n";
        legend_y += 18;
        ++ci;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace doa
