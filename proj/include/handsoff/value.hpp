#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "handsoff/lp.hpp"
#include "handsoff/shooting.hpp"

// Value-function analysis over the reachable set: grid sweeps of the LP
// value, the closed-form scalar oracle, level-set identity checks, and the
// discrete continuity diagnostic.

namespace handsoff {

struct GridAxis {
    double min = 0.0;
    double max = 0.0;
    int count = 0;
};

// Axis-aligned lattice; row ordering is row-major with the last axis
// varying fastest.
struct GridSpec {
    std::vector<GridAxis> axes;

    int dim() const { return static_cast<int>(axes.size()); }
    long points() const;
    Vector point(long index) const;
    double step(int axis) const;
    double max_step() const;
};

enum class PointStatus : unsigned char { Feasible, Infeasible, SolverFailure };

struct ValueTable {
    GridSpec grid;
    std::vector<double> values;        // NaN where not feasible
    std::vector<PointStatus> status;
    int n_cells = 0;
    std::uint64_t system_hash = 0;
    std::string created;  // wall-clock tag; never serialized into data files

    long feasible_count() const;
};

// V at every lattice point by LP; infeasible points are marked, solver
// failures recorded per point, neither aborts the sweep. jobs <= 0 picks
// the hardware concurrency; the result is identical for any jobs value.
ValueTable sweep(const LtiSystem& sys, const GridSpec& grid, int n_cells, int jobs = 0);

// CSV with header "xi_1,...,xi_n,V,feasible", 12 significant digits, V
// empty when infeasible, rows in lattice row-major order.
void write_csv(const ValueTable& table, std::ostream& out);
std::string to_csv(const ValueTable& table);

// Row-oriented view used by the plot command.
struct CsvTable {
    int dim = 0;
    std::vector<Vector> points;
    std::vector<double> values;  // NaN where infeasible
    std::vector<bool> feasible;
};
CsvTable read_csv(std::istream& in);

// ---- closed-form scalar oracle -------------------------------------------

// dx/dt = a x + b u with a > 0, b != 0 on [0, T]: everything below has a
// closed form, which anchors the numerical paths.
struct Oracle1dParams {
    double a;
    double b;
    double T;
    Oracle1dParams(double a_, double b_, double T_);
};

// Reachable set is [-x1, x1] with x1 = (1 - e^{-aT}) |b| / a.
double oracle1d_reach(const Oracle1dParams& p);

// V(0) = 0, V(xi) = -(1/a) log(1 - a|xi|/|b|) for 0 < |xi| < x1, and
// exactly T at |xi| = x1. Throws std::domain_error outside [-x1, x1].
double oracle1d_value(const Oracle1dParams& p, double xi);

// -sgn(b) sgn(xi) on [0, tau), 0 afterwards, with tau = V(xi).
SwitchingStructure oracle1d_control(const Oracle1dParams& p, double xi);

// ---- continuity diagnostic -------------------------------------------------

struct ContinuityReport {
    double max_adjacent_jump = 0.0;                    // finest table
    std::vector<std::pair<double, double>> modulus_curve;  // (h, max jump) per table
    std::vector<double> ratios;                        // jump[k+1] / jump[k]
    long excluded_pairs = 0;                           // pairs touching a non-feasible point
};

// Max |V_i - V_j| over lattice-adjacent feasible pairs for each table
// (ordered coarse to fine; tables should share their domain so the jumps
// are comparable). Throws on tables with fewer than two feasible points.
ContinuityReport continuity_report(const std::vector<ValueTable>& tables);

// ---- level-set suite --------------------------------------------------------

struct LevelSetCheck {
    std::string name;
    bool pass = false;
    double slack = 0.0;  // worst violation observed (0 when clean)
    std::string detail;
};

struct LevelSetReport {
    std::vector<LevelSetCheck> checks;
    bool all_pass() const;
};

// Five checks against the budget LP: sublevel nesting in alpha, agreement
// of budget feasibility with V <= alpha (within 2n dt), the full budget
// alpha = T never binding, the zero budget admitting only the origin, and
// the value approaching T along rays toward the boundary.
LevelSetReport level_set_suite(const LtiSystem& sys, std::vector<double> alphas,
                               const std::vector<Vector>& sample_xis, int n_cells);

// Largest c with c * direction reachable, by doubling plus bisection on
// LP phase-1 feasibility. The returned scale is on the feasible side.
double boundary_scale(const LtiSystem& sys, const Vector& direction, int n_cells);

// Deterministic sample states: the origin plus fractions {0.25, 0.5, 0.75,
// 0.9} of the boundary scale along every +-axis direction.
std::vector<Vector> default_samples(const LtiSystem& sys, int n_cells);

// ---- whole-system check (backs the `check` CLI command) -------------------

struct CheckOptions {
    int cells = 2000;
    int jobs = 0;
    std::uint64_t seed = 0;
    bool force = false;
    int cross_points = 8;
    int shoot_starts = 20;
};

struct CrossCheckSummary {
    int total = 0;
    int converged = 0;
    int agreeing = 0;
    double tolerance = 0.0;
    double worst_gap = 0.0;
};

struct CheckReport {
    NormalityReport normality;
    LevelSetReport level_sets;
    ContinuityReport continuity;
    CrossCheckSummary cross;
    bool normality_pass = false;
    bool level_pass = false;
    bool continuity_pass = false;
    bool cross_pass = false;
    bool all_pass() const {
        return normality_pass && level_pass && continuity_pass && cross_pass;
    }
};

// Runs the normality gate, the level-set suite, the continuity diagnostic at
// two grid refinements, and the LP-vs-shooting cross-check. Throws when the
// system is not normal unless opts.force is set.
CheckReport run_system_check(const LtiSystem& sys, const CheckOptions& opts);

}  // namespace handsoff
