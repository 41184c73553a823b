#pragma once

#include <string>
#include <vector>

namespace cosim {

// Minimal static SVG charts for the run artifacts.
struct PlotSeries {
    enum class Style { kLine, kPoints, kBars };
    std::string label;
    std::vector<double> x;
    std::vector<double> y;  // NaN breaks a line and hides a point
    Style style = Style::kLine;
    std::string color = "#1f77b4";
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    int width = 900;
    int height = 420;
};

std::string render_svg(const PlotSpec& spec);

}  // namespace cosim
