#include "handsoff/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace handsoff {

namespace {

std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

constexpr double kWidth = 800.0;
constexpr double kHeight = 600.0;
constexpr double kMarginL = 70.0;
constexpr double kMarginR = 20.0;
constexpr double kMarginT = 20.0;
constexpr double kMarginB = 55.0;

}  // namespace

std::string render_value_curve_svg(const CsvTable& table) {
    if (table.dim != 1) {
        throw std::invalid_argument("plot: only one-dimensional value tables are supported");
    }

    const std::size_t rows = table.points.size();
    double xmin = 0.0, xmax = 0.0;
    bool have_x = false;
    double vmax = 0.0;
    bool have_v = false;
    for (std::size_t i = 0; i < rows; ++i) {
        const double x = table.points[i](0);
        if (!have_x) {
            xmin = xmax = x;
            have_x = true;
        } else {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
        }
        if (table.feasible[i]) {
            vmax = std::max(vmax, table.values[i]);
            have_v = true;
        }
    }
    if (!have_x) {
        throw std::invalid_argument("plot: table has no rows");
    }
    const double ymax = have_v && vmax > 0.0 ? 1.05 * vmax : 1.0;
    const double plot_w = kWidth - kMarginL - kMarginR;
    const double plot_h = kHeight - kMarginT - kMarginB;

    auto px = [&](double x) {
        if (xmax == xmin) return kMarginL + 0.5 * plot_w;
        return kMarginL + (x - xmin) / (xmax - xmin) * plot_w;
    };
    auto py = [&](double v) { return kMarginT + plot_h - v / ymax * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
           "viewBox=\"0 0 800 600\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";

    // axes
    svg << "<line x1=\"" << fmt12(kMarginL) << "\" y1=\"" << fmt12(kMarginT + plot_h)
        << "\" x2=\"" << fmt12(kMarginL + plot_w) << "\" y2=\"" << fmt12(kMarginT + plot_h)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<line x1=\"" << fmt12(kMarginL) << "\" y1=\"" << fmt12(kMarginT) << "\" x2=\""
        << fmt12(kMarginL) << "\" y2=\"" << fmt12(kMarginT + plot_h)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

    // ticks
    for (int k = 0; k <= 4; ++k) {
        const double fx = xmin + (xmax - xmin) * k / 4.0;
        const double gx = px(fx);
        svg << "<line x1=\"" << fmt12(gx) << "\" y1=\"" << fmt12(kMarginT + plot_h)
            << "\" x2=\"" << fmt12(gx) << "\" y2=\"" << fmt12(kMarginT + plot_h + 5)
            << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << fmt12(gx) << "\" y=\"" << fmt12(kMarginT + plot_h + 20)
            << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
            << fmt6(fx) << "</text>\n";

        const double fv = ymax * k / 4.0;
        const double gy = py(fv);
        svg << "<line x1=\"" << fmt12(kMarginL - 5) << "\" y1=\"" << fmt12(gy) << "\" x2=\""
            << fmt12(kMarginL) << "\" y2=\"" << fmt12(gy)
            << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << fmt12(kMarginL - 8) << "\" y=\"" << fmt12(gy + 4)
            << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">" << fmt6(fv)
            << "</text>\n";
    }

    // axis labels
    svg << "<text x=\"" << fmt12(kMarginL + 0.5 * plot_w) << "\" y=\"" << fmt12(kHeight - 12)
        << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">xi</text>\n";
    svg << "<text x=\"18\" y=\"" << fmt12(kMarginT + 0.5 * plot_h)
        << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 18 "
        << fmt12(kMarginT + 0.5 * plot_h) << ")\">V0(xi)</text>\n";

    if (!have_v) {
        svg << "<text x=\"" << fmt12(kMarginL + 0.5 * plot_w) << "\" y=\""
            << fmt12(kMarginT + 0.5 * plot_h)
            << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" "
               "fill=\"#a33\">no feasible points</text>\n";
        svg << "</svg>\n";
        return svg.str();
    }

    // feasible runs: polyline for runs of length >= 2, a marker for singletons
    std::size_t i = 0;
    while (i < rows) {
        if (!table.feasible[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < rows && table.feasible[j + 1]) ++j;
        if (j > i) {
            svg << "<polyline fill=\"none\" stroke=\"#1f6fb4\" stroke-width=\"1.5\" points=\"";
            for (std::size_t k = i; k <= j; ++k) {
                if (k > i) svg << " ";
                svg << fmt12(px(table.points[k](0))) << "," << fmt12(py(table.values[k]));
            }
            svg << "\"/>\n";
        } else {
            svg << "<circle cx=\"" << fmt12(px(table.points[i](0))) << "\" cy=\""
                << fmt12(py(table.values[i]))
                << "\" r=\"2.5\" fill=\"#1f6fb4\"/>\n";
        }
        i = j + 1;
    }

    svg << "</svg>\n";
    return svg.str();
}

}  // namespace handsoff
