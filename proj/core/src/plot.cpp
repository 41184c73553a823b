#include "cosim/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace cosim {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

// Round tick step of roughly range / 6.
double nice_step(double range) {
    const double raw = range / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (raw <= m * mag) return m * mag;
    }
    return 10.0 * mag;
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
    double xmin = std::numeric_limits<double>::infinity();
    double xmax = -xmin;
    double ymin = xmin;
    double ymax = -xmin;
    for (const PlotSeries& s : spec.series) {
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
        if (s.style == PlotSeries::Style::kBars) ymin = std::min(ymin, 0.0);
    }
    if (!std::isfinite(xmin)) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (!(xmax > xmin)) xmax = xmin + 1.0;
    if (!(ymax > ymin)) ymax = ymin + 1.0;
    ymin = std::min(ymin, 0.0);

    const double left = 80;
    const double right = spec.width - 20.0;
    const double top = 40;
    const double bottom = spec.height - 50.0;
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
    auto py = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << spec.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(spec.title)
      << "</text>\n";

    const double xs = nice_step(xmax - xmin);
    for (double t = std::ceil(xmin / xs) * xs; t <= xmax + 1e-9 * xs; t += xs) {
        o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(top) << "\" x2=\"" << num(px(t)) << "\" y2=\""
          << num(bottom) << "\" stroke=\"#e0e0e0\"/>\n";
        o << "<text x=\"" << num(px(t)) << "\" y=\"" << num(bottom + 16) << "\" text-anchor=\"middle\">"
          << tick_label(t) << "</text>\n";
    }
    const double ys = nice_step(ymax - ymin);
    for (double t = std::ceil(ymin / ys) * ys; t <= ymax + 1e-9 * ys; t += ys) {
        o << "<line x1=\"" << num(left) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(right) << "\" y2=\""
          << num(py(t)) << "\" stroke=\"#e0e0e0\"/>\n";
        o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">"
          << tick_label(t) << "</text>\n";
    }
    o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left) << "\" height=\""
      << num(bottom - top) << "\" fill=\"none\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << spec.height - 12
      << "\" text-anchor=\"middle\">" << escape(spec.x_label) << "</text>\n";
    o << "<text transform=\"translate(18," << num((top + bottom) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(spec.y_label) << "</text>\n";

    double legend_y = top + 16;
    for (const PlotSeries& s : spec.series) {
        const size_t n = std::min(s.x.size(), s.y.size());
        switch (s.style) {
            case PlotSeries::Style::kLine: {
                std::string path;
                bool pen_down = false;
                for (size_t i = 0; i < n; ++i) {
                    if (!std::isfinite(s.y[i]) || !std::isfinite(s.x[i])) {
                        pen_down = false;
                        continue;
                    }
                    path += (pen_down ? "L" : "M") + num(px(s.x[i])) + "," + num(py(s.y[i]));
                    pen_down = true;
                }
                o << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"/>\n";
                break;
            }
            case PlotSeries::Style::kPoints:
                for (size_t i = 0; i < n; ++i) {
                    if (!std::isfinite(s.y[i]) || !std::isfinite(s.x[i])) continue;
                    o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"1.6\" fill=\""
                      << s.color << "\" fill-opacity=\"0.6\"/>\n";
                }
                break;
            case PlotSeries::Style::kBars: {
                // x holds the left edges; a bar extends to the next edge.
                for (size_t i = 0; i < n; ++i) {
                    const double x1 = i + 1 < s.x.size() ? s.x[i + 1] : s.x[i] + (i > 0 ? s.x[i] - s.x[i - 1] : 1.0);
                    const double h = py(ymin) - py(s.y[i]);
                    o << "<rect x=\"" << num(px(s.x[i])) << "\" y=\"" << num(py(s.y[i])) << "\" width=\""
                      << num(std::max(0.0, px(x1) - px(s.x[i]) - 1)) << "\" height=\"" << num(std::max(0.0, h))
                      << "\" fill=\"" << s.color << "\" fill-opacity=\"0.5\"/>\n";
                }
                break;
            }
        }
        if (!s.label.empty()) {
            o << "<rect x=\"" << num(right - 170) << "\" y=\"" << num(legend_y - 9) << "\" width=\"10\" height=\"10\" fill=\""
              << s.color << "\"/>\n";
            o << "<text x=\"" << num(right - 155) << "\" y=\"" << num(legend_y) << "\">" << escape(s.label)
              << "</text>\n";
            legend_y += 16;
        }
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace cosim
