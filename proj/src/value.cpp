#include "handsoff/value.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace handsoff {

namespace {

std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void validate_grid(const GridSpec& grid) {
    if (grid.axes.empty()) {
        throw std::invalid_argument("grid: needs at least one axis");
    }
    for (const GridAxis& ax : grid.axes) {
        if (ax.count < 1) {
            throw std::invalid_argument("grid: empty axis (count must be >= 1)");
        }
        if (!std::isfinite(ax.min) || !std::isfinite(ax.max) || ax.max < ax.min) {
            throw std::invalid_argument("grid: axis range must be finite with min <= max");
        }
    }
}

}  // namespace

long GridSpec::points() const {
    long p = 1;
    for (const GridAxis& ax : axes) p *= std::max(ax.count, 0);
    return axes.empty() ? 0 : p;
}

Vector GridSpec::point(long index) const {
    const int n = dim();
    Vector x(n);
    long rem = index;
    for (int a = n - 1; a >= 0; --a) {
        const GridAxis& ax = axes[static_cast<std::size_t>(a)];
        const long idx = rem % ax.count;
        rem /= ax.count;
        x(a) = (ax.count > 1)
                   ? ax.min + static_cast<double>(idx) * (ax.max - ax.min) /
                                  static_cast<double>(ax.count - 1)
                   : ax.min;
    }
    return x;
}

double GridSpec::step(int axis) const {
    const GridAxis& ax = axes[static_cast<std::size_t>(axis)];
    if (ax.count < 2) return 0.0;
    return (ax.max - ax.min) / static_cast<double>(ax.count - 1);
}

double GridSpec::max_step() const {
    double h = 0.0;
    for (int a = 0; a < dim(); ++a) h = std::max(h, step(a));
    return h;
}

long ValueTable::feasible_count() const {
    long c = 0;
    for (PointStatus s : status) {
        if (s == PointStatus::Feasible) ++c;
    }
    return c;
}

ValueTable sweep(const LtiSystem& sys, const GridSpec& grid, int n_cells, int jobs) {
    validate_grid(grid);
    if (grid.dim() != sys.dim()) {
        throw std::invalid_argument("sweep: grid dimension must match the system");
    }
    if (n_cells < 1) {
        throw std::invalid_argument("sweep: n_cells must be >= 1");
    }

    const long total = grid.points();
    ValueTable table;
    table.grid = grid;
    table.values.assign(static_cast<std::size_t>(total),
                        std::numeric_limits<double>::quiet_NaN());
    table.status.assign(static_cast<std::size_t>(total), PointStatus::Infeasible);
    table.n_cells = n_cells;
    table.system_hash = sys.hash();
    {
        std::time_t now = std::time(nullptr);
        char buf[40];
        std::tm tm_utc{};
        gmtime_r(&now, &tm_utc);
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
        table.created = buf;
    }

    int workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = static_cast<int>(std::min<long>(workers, total));

    std::atomic<long> next{0};
    auto run = [&]() {
        for (long i = next.fetch_add(1); i < total; i = next.fetch_add(1)) {
            const Vector xi = grid.point(i);
            try {
                const ValueOutcome v = value_l1(sys, xi, n_cells);
                if (v.status == SolveStatus::Solved && v.feasible) {
                    table.values[static_cast<std::size_t>(i)] = v.value;
                    table.status[static_cast<std::size_t>(i)] = PointStatus::Feasible;
                } else if (v.status == SolveStatus::Infeasible) {
                    table.status[static_cast<std::size_t>(i)] = PointStatus::Infeasible;
                } else {
                    table.status[static_cast<std::size_t>(i)] = PointStatus::SolverFailure;
                }
            } catch (const std::exception&) {
                table.status[static_cast<std::size_t>(i)] = PointStatus::SolverFailure;
            }
        }
    };

    if (workers == 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(run);
        for (std::thread& t : pool) t.join();
    }
    return table;
}

void write_csv(const ValueTable& table, std::ostream& out) {
    const int n = table.grid.dim();
    for (int a = 0; a < n; ++a) {
        out << "xi_" << (a + 1) << ",";
    }
    out << "V,feasible\n";
    const long total = table.grid.points();
    for (long i = 0; i < total; ++i) {
        const Vector x = table.grid.point(i);
        for (int a = 0; a < n; ++a) {
            out << fmt12(x(a)) << ",";
        }
        if (table.status[static_cast<std::size_t>(i)] == PointStatus::Feasible) {
            out << fmt12(table.values[static_cast<std::size_t>(i)]) << ",1\n";
        } else {
            out << ",0\n";
        }
    }
}

std::string to_csv(const ValueTable& table) {
    std::ostringstream ss;
    write_csv(table, ss);
    return ss.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument("csv: empty input");
    }
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 3 || header[header.size() - 2] != "V" || header.back() != "feasible") {
        throw std::invalid_argument("csv: header must be xi_1,...,xi_n,V,feasible");
    }
    const int n = static_cast<int>(header.size()) - 2;
    for (int a = 0; a < n; ++a) {
        if (header[static_cast<std::size_t>(a)] != "xi_" + std::to_string(a + 1)) {
            throw std::invalid_argument("csv: header must be xi_1,...,xi_n,V,feasible");
        }
    }

    CsvTable t;
    t.dim = n;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (static_cast<int>(f.size()) != n + 2) {
            throw std::invalid_argument("csv: row " + std::to_string(lineno) +
                                        " has the wrong number of fields");
        }
        Vector x(n);
        try {
            for (int a = 0; a < n; ++a) x(a) = std::stod(f[static_cast<std::size_t>(a)]);
            const std::string& flag = f[static_cast<std::size_t>(n + 1)];
            const bool feas = (flag == "1" || flag == "true");
            double v = std::numeric_limits<double>::quiet_NaN();
            if (feas) v = std::stod(f[static_cast<std::size_t>(n)]);
            t.points.push_back(std::move(x));
            t.values.push_back(v);
            t.feasible.push_back(feas);
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("csv: row " + std::to_string(lineno) +
                                        " has a malformed number");
        }
    }
    return t;
}

// ---- oracle ---------------------------------------------------------------

Oracle1dParams::Oracle1dParams(double a_, double b_, double T_) : a(a_), b(b_), T(T_) {
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw std::invalid_argument("oracle1d: a must be positive");
    }
    if (b == 0.0 || !std::isfinite(b)) {
        throw std::invalid_argument("oracle1d: b must be nonzero");
    }
    if (!(T > 0.0) || !std::isfinite(T)) {
        throw std::invalid_argument("oracle1d: T must be positive");
    }
}

double oracle1d_reach(const Oracle1dParams& p) {
    return -std::expm1(-p.a * p.T) * std::abs(p.b) / p.a;
}

double oracle1d_value(const Oracle1dParams& p, double xi) {
    const double x1 = oracle1d_reach(p);
    const double ax = std::abs(xi);
    if (ax > x1) {
        throw std::domain_error("oracle1d: xi lies outside the reachable set [-x1, x1]");
    }
    if (ax == x1) return p.T;  // the boundary attains the horizon exactly
    if (xi == 0.0) return 0.0;
    return -std::log1p(-p.a * ax / std::abs(p.b)) / p.a;
}

SwitchingStructure oracle1d_control(const Oracle1dParams& p, double xi) {
    const double tau = oracle1d_value(p, xi);  // throws when out of reach
    const double level = (xi == 0.0) ? 0.0 : -((p.b > 0.0) ? 1.0 : -1.0) * ((xi > 0.0) ? 1.0 : -1.0);
    return make_switching(p.T, {0.0, tau, p.T}, {level, 0.0});
}

// ---- continuity -------------------------------------------------------------

ContinuityReport continuity_report(const std::vector<ValueTable>& tables) {
    if (tables.empty()) {
        throw std::invalid_argument("continuity_report: needs at least one table");
    }
    ContinuityReport rep;
    for (const ValueTable& table : tables) {
        if (table.feasible_count() < 2) {
            throw std::invalid_argument(
                "continuity_report: degenerate table (fewer than 2 feasible points)");
        }
        const int n = table.grid.dim();
        const long total = table.grid.points();
        std::vector<long> counts(static_cast<std::size_t>(n));
        std::vector<long> strides(static_cast<std::size_t>(n));
        for (int a = 0; a < n; ++a) {
            counts[static_cast<std::size_t>(a)] = table.grid.axes[static_cast<std::size_t>(a)].count;
        }
        strides[static_cast<std::size_t>(n - 1)] = 1;
        for (int a = n - 2; a >= 0; --a) {
            strides[static_cast<std::size_t>(a)] =
                strides[static_cast<std::size_t>(a + 1)] * counts[static_cast<std::size_t>(a + 1)];
        }

        double max_jump = 0.0;
        for (long i = 0; i < total; ++i) {
            long rem = i;
            for (int a = 0; a < n; ++a) {
                const long idx = rem / strides[static_cast<std::size_t>(a)];
                rem %= strides[static_cast<std::size_t>(a)];
                if (idx + 1 >= counts[static_cast<std::size_t>(a)]) continue;
                const long j = i + strides[static_cast<std::size_t>(a)];
                const bool fi = table.status[static_cast<std::size_t>(i)] == PointStatus::Feasible;
                const bool fj = table.status[static_cast<std::size_t>(j)] == PointStatus::Feasible;
                if (fi && fj) {
                    max_jump = std::max(max_jump,
                                        std::abs(table.values[static_cast<std::size_t>(i)] -
                                                 table.values[static_cast<std::size_t>(j)]));
                } else {
                    ++rep.excluded_pairs;
                }
            }
        }
        rep.modulus_curve.emplace_back(table.grid.max_step(), max_jump);
    }
    rep.max_adjacent_jump = rep.modulus_curve.back().second;
    for (std::size_t k = 0; k + 1 < rep.modulus_curve.size(); ++k) {
        const double prev = rep.modulus_curve[k].second;
        const double next = rep.modulus_curve[k + 1].second;
        rep.ratios.push_back(prev > 0.0 ? next / prev : 0.0);
    }
    return rep;
}

// ---- level sets -------------------------------------------------------------

double boundary_scale(const LtiSystem& sys, const Vector& direction, int n_cells) {
    if (direction.size() != sys.dim() || direction.norm() == 0.0) {
        throw std::invalid_argument("boundary_scale: direction must be a nonzero n-vector");
    }
    const Vector d = direction / direction.norm();
    double lo = 0.0;
    double hi = 1.0;
    if (reachable(sys, d, n_cells)) {
        lo = 1.0;
        hi = 2.0;
        while (reachable(sys, hi * d, n_cells)) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e18) {
                throw std::runtime_error("boundary_scale: reachable set appears unbounded");
            }
        }
    }
    for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (reachable(sys, mid * d, n_cells)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

namespace {

// +e_1, -e_1, +e_2, ... with their boundary scales, computed once.
struct AxisRays {
    std::vector<Vector> dirs;
    std::vector<double> cstar;
};

AxisRays axis_rays(const LtiSystem& sys, int n_cells) {
    AxisRays rays;
    for (int a = 0; a < sys.dim(); ++a) {
        for (double sign : {1.0, -1.0}) {
            Vector d = Vector::Zero(sys.dim());
            d(a) = sign;
            rays.cstar.push_back(boundary_scale(sys, d, n_cells));
            rays.dirs.push_back(std::move(d));
        }
    }
    return rays;
}

std::vector<Vector> samples_from_rays(const AxisRays& rays, int n) {
    std::vector<Vector> out;
    out.push_back(Vector::Zero(n));
    const double fracs[] = {0.25, 0.5, 0.75, 0.9};
    for (std::size_t r = 0; r < rays.dirs.size(); ++r) {
        for (double f : fracs) {
            out.push_back(f * rays.cstar[r] * rays.dirs[r]);
        }
    }
    return out;
}

}  // namespace

std::vector<Vector> default_samples(const LtiSystem& sys, int n_cells) {
    return samples_from_rays(axis_rays(sys, n_cells), sys.dim());
}

namespace {

struct BoundaryProbe {
    bool pass = true;
    double slack = 0.0;
    std::string detail;
};

BoundaryProbe boundary_check(const LtiSystem& sys, int n_cells, double tol) {
    const double T = sys.horizon();
    const int n = sys.dim();
    BoundaryProbe probe;
    const double eps_list[] = {0.05, 0.02, 0.01, 0.005};
    double worst_ratio = 0.0;
    for (int a = 0; a < n; ++a) {
        for (double sign : {1.0, -1.0}) {
            Vector d = Vector::Zero(n);
            d(a) = sign;
            const double cstar = boundary_scale(sys, d, n_cells);
            if (cstar <= 0.0) {
                probe.pass = false;
                probe.detail = "reachable set degenerate along an axis";
                return probe;
            }
            double first = 0.0, last = 0.0, prev = -1.0;
            for (std::size_t k = 0; k < std::size(eps_list); ++k) {
                const ValueOutcome v =
                    value_l1(sys, (1.0 - eps_list[k]) * cstar * d, n_cells);
                if (!v.feasible) {
                    probe.pass = false;
                    probe.detail = "near-boundary point unexpectedly infeasible";
                    return probe;
                }
                if (k == 0) first = v.value;
                last = v.value;
                if (prev >= 0.0 && v.value < prev - tol) {
                    probe.pass = false;
                    probe.slack = std::max(probe.slack, prev - v.value);
                }
                prev = v.value;
            }
            const double gap_first = T - first;
            const double gap_last = T - last;
            if (gap_last > 0.8 * gap_first + tol) {
                probe.pass = false;
                probe.slack = std::max(probe.slack, gap_last - 0.8 * gap_first);
            }
            if (gap_first > 0.0) {
                worst_ratio = std::max(worst_ratio, gap_last / gap_first);
            }
        }
    }
    probe.detail = "worst boundary-gap ratio " + fmt12(worst_ratio);
    return probe;
}

}  // namespace

bool LevelSetReport::all_pass() const {
    for (const LevelSetCheck& c : checks) {
        if (!c.pass) return false;
    }
    return !checks.empty();
}

LevelSetReport level_set_suite(const LtiSystem& sys, std::vector<double> alphas,
                               const std::vector<Vector>& sample_xis, int n_cells) {
    const double T = sys.horizon();
    const int n = sys.dim();
    const double dt = T / static_cast<double>(n_cells);
    const double tol = 2.0 * n * dt;

    for (double a : alphas) {
        if (a < 0.0 || a > T) {
            throw std::invalid_argument("level_set_suite: alphas must lie in [0, T]");
        }
    }
    std::sort(alphas.begin(), alphas.end());
    if (alphas.empty() || alphas.front() > 0.0) alphas.insert(alphas.begin(), 0.0);
    if (alphas.back() < T) alphas.push_back(T);

    const std::size_t P = sample_xis.size();
    const std::size_t A = alphas.size();
    std::vector<bool> reach_flag(P);
    std::vector<double> value(P, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::vector<bool>> bf(P, std::vector<bool>(A));

    for (std::size_t i = 0; i < P; ++i) {
        reach_flag[i] = reachable(sys, sample_xis[i], n_cells);
        if (reach_flag[i]) {
            const ValueOutcome v = value_l1(sys, sample_xis[i], n_cells);
            if (!v.feasible) {
                throw std::runtime_error("level_set_suite: inconsistent feasibility result");
            }
            value[i] = v.value;
        }
        for (std::size_t j = 0; j < A; ++j) {
            bf[i][j] = budget_feasible(sys, sample_xis[i], n_cells, alphas[j]);
        }
    }

    LevelSetReport rep;

    {
        LevelSetCheck c;
        c.name = "sublevel-nesting";
        c.pass = true;
        long violations = 0;
        for (std::size_t i = 0; i < P; ++i) {
            for (std::size_t j = 0; j + 1 < A; ++j) {
                if (bf[i][j] && !bf[i][j + 1]) ++violations;
            }
        }
        if (violations > 0) {
            c.pass = false;
            c.slack = static_cast<double>(violations);
        }
        c.detail = std::to_string(violations) + " nesting violations";
        rep.checks.push_back(std::move(c));
    }

    {
        LevelSetCheck c;
        c.name = "sublevel-identity";
        c.pass = true;
        double worst = 0.0;
        for (std::size_t i = 0; i < P; ++i) {
            for (std::size_t j = 0; j < A; ++j) {
                if (bf[i][j]) {
                    if (!reach_flag[i]) {
                        c.pass = false;
                        worst = std::max(worst, 1.0);
                    } else if (value[i] > alphas[j] + tol) {
                        c.pass = false;
                        worst = std::max(worst, value[i] - alphas[j]);
                    }
                } else if (reach_flag[i] && value[i] < alphas[j] - tol) {
                    c.pass = false;
                    worst = std::max(worst, alphas[j] - value[i]);
                }
            }
        }
        c.slack = worst;
        c.detail = "tolerance " + fmt12(tol);
        rep.checks.push_back(std::move(c));
    }

    {
        LevelSetCheck c;
        c.name = "budget-at-horizon";
        c.pass = true;
        for (std::size_t i = 0; i < P; ++i) {
            if (bf[i][A - 1] != reach_flag[i]) {
                c.pass = false;
                c.slack += 1.0;
            }
        }
        c.detail = "budget T binds on " + fmt12(c.slack) + " samples";
        rep.checks.push_back(std::move(c));
    }

    {
        LevelSetCheck c;
        c.name = "zero-budget-origin";
        c.pass = true;
        for (std::size_t i = 0; i < P; ++i) {
            const bool is_origin = sample_xis[i].norm() <= 1e-6;
            if (bf[i][0] != is_origin) {
                c.pass = false;
                c.slack += 1.0;
            }
        }
        c.detail = "zero-budget feasibility mismatches: " + fmt12(c.slack);
        rep.checks.push_back(std::move(c));
    }

    {
        const BoundaryProbe probe = boundary_check(sys, n_cells, tol);
        LevelSetCheck c;
        c.name = "boundary-attains-horizon";
        c.pass = probe.pass;
        c.slack = probe.slack;
        c.detail = probe.detail;
        rep.checks.push_back(std::move(c));
    }

    return rep;
}

// ---- whole-system check -----------------------------------------------------

CheckReport run_system_check(const LtiSystem& sys, const CheckOptions& opts) {
    const NormalityReport normality = sys.normality();
    if (!normality.normal && !opts.force) {
        std::string why;
        if (!normality.a_nonsingular) why = "A is singular";
        if (!normality.controllable) {
            if (!why.empty()) why += " and ";
            why += "the system is not controllable";
        }
        throw std::runtime_error("check: normality gate failed: " + why +
                                 ". Override with force to run the suite anyway.");
    }

    CheckReport rep;
    rep.normality = normality;
    rep.normality_pass = normality.normal;

    const double T = sys.horizon();
    const int n = sys.dim();
    const double dt = T / static_cast<double>(opts.cells);

    const AxisRays rays = axis_rays(sys, opts.cells);

    const std::vector<double> alphas = {0.0, 0.25 * T, 0.5 * T, 0.75 * T, T};
    const std::vector<Vector> samples = samples_from_rays(rays, n);
    rep.level_sets = level_set_suite(sys, alphas, samples, opts.cells);
    rep.level_pass = rep.level_sets.all_pass();

    // Continuity at two refinements on a band-excluded domain. In 1D the
    // outer 0.1% of the reachable interval is excluded; in higher dimensions
    // the domain is an axis box shrunk until all corners are reachable, so
    // every grid point is feasible and jumps measure the interior modulus.
    {
        std::vector<GridAxis> axes(static_cast<std::size_t>(n));
        if (n == 1) {
            const double cstar = rays.cstar[0];
            axes[0] = {-0.999 * cstar, 0.999 * cstar, 0};
        } else {
            std::vector<double> cstar(static_cast<std::size_t>(n));
            for (int a = 0; a < n; ++a) {
                cstar[static_cast<std::size_t>(a)] = rays.cstar[2 * static_cast<std::size_t>(a)];
            }
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 25; ++it) {
                const double s = 0.5 * (lo + hi);
                bool all_ok = true;
                for (long corner = 0; corner < (1L << n) && all_ok; ++corner) {
                    Vector x(n);
                    for (int a = 0; a < n; ++a) {
                        const double sign = (corner >> a) & 1 ? -1.0 : 1.0;
                        x(a) = sign * s * cstar[static_cast<std::size_t>(a)];
                    }
                    all_ok = reachable(sys, x, opts.cells);
                }
                (all_ok ? lo : hi) = s;
            }
            for (int a = 0; a < n; ++a) {
                const double half = 0.95 * lo * cstar[static_cast<std::size_t>(a)];
                axes[static_cast<std::size_t>(a)] = {-half, half, 0};
            }
        }

        const int coarse_count = (n == 1) ? 101 : 21;
        const int fine_count = 2 * (coarse_count - 1) + 1;
        GridSpec coarse{axes}, fine{axes};
        for (auto& ax : coarse.axes) ax.count = coarse_count;
        for (auto& ax : fine.axes) ax.count = fine_count;
        const ValueTable t0 = sweep(sys, coarse, opts.cells, opts.jobs);
        const ValueTable t1 = sweep(sys, fine, opts.cells, opts.jobs);
        rep.continuity = continuity_report({t0, t1});
        rep.continuity_pass = true;
        for (double r : rep.continuity.ratios) {
            if (!(r <= 0.75)) rep.continuity_pass = false;
        }
    }

    // LP vs shooting cross-check on interior points along the axes.
    {
        rep.cross.tolerance = std::max(2.0 * n * dt, 1e-6);
        const double fracs[] = {0.15, 0.35, 0.55, 0.75};
        for (int j = 0; j < opts.cross_points; ++j) {
            const std::size_t di = static_cast<std::size_t>(j) % rays.dirs.size();
            const double frac = fracs[(static_cast<std::size_t>(j) / rays.dirs.size()) %
                                      std::size(fracs)];
            const Vector xi = frac * rays.cstar[di] * rays.dirs[di];
            ++rep.cross.total;

            const SolveResult lp = solve_lp(transcribe(sys, xi, opts.cells));
            if (!lp.feasible) continue;

            ShootOptions sopt;
            sopt.allow_abnormal = opts.force;
            const std::uint64_t point_seed =
                opts.seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(j + 1));
            const std::vector<Vector> seeds =
                default_costate_seeds(sys, opts.shoot_starts, point_seed, lp.dual);
            const ShootResult sh = shoot_solve(sys, xi, seeds, sopt);
            if (!sh.converged) continue;
            ++rep.cross.converged;
            const double gap = std::abs(sh.value - lp.value);
            rep.cross.worst_gap = std::max(rep.cross.worst_gap, gap);
            if (gap <= rep.cross.tolerance) ++rep.cross.agreeing;
        }
        rep.cross_pass = rep.cross.agreeing * 10 >= rep.cross.total * 9;
    }

    return rep;
}

}  // namespace handsoff
