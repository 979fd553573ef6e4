#pragma once

#include <string>

#include "handsoff/value.hpp"

namespace handsoff {

// Self-contained SVG (800x600) of a one-dimensional value table: polyline
// through consecutive feasible points, markers for isolated ones, gaps where
// the table is infeasible. Axis labels are "xi" and "V0(xi)". Coordinates
// are printed with 12 significant digits, so equal inputs give equal bytes.
// Throws std::invalid_argument for tables with dim != 1.
std::string render_value_curve_svg(const CsvTable& table);

}  // namespace handsoff
