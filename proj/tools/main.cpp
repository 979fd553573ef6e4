#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "handsoff/lp.hpp"
#include "handsoff/lti.hpp"
#include "handsoff/shooting.hpp"
#include "handsoff/svgplot.hpp"
#include "handsoff/value.hpp"

namespace {

using handsoff::GridAxis;
using handsoff::GridSpec;
using handsoff::LtiSystem;
using handsoff::Vector;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

Vector parse_xi(const std::string& text, int n) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        const double v = std::stod(item, &pos);
        if (pos != item.size()) throw std::invalid_argument("--xi: malformed number \"" + item + "\"");
        vals.push_back(v);
    }
    if (static_cast<int>(vals.size()) != n) {
        throw std::invalid_argument("--xi: expected " + std::to_string(n) +
                                    " comma-separated values, got " + std::to_string(vals.size()));
    }
    Vector xi(n);
    for (int i = 0; i < n; ++i) xi(i) = vals[static_cast<std::size_t>(i)];
    return xi;
}

GridSpec parse_grid(const std::string& text) {
    GridSpec grid;
    std::stringstream ss(text);
    std::string axis;
    while (std::getline(ss, axis, ',')) {
        GridAxis ax;
        if (std::sscanf(axis.c_str(), "%lf:%lf:%d", &ax.min, &ax.max, &ax.count) != 3) {
            throw std::invalid_argument("--grid: axis must be min:max:count, got \"" + axis + "\"");
        }
        grid.axes.push_back(ax);
    }
    if (grid.axes.empty()) {
        throw std::invalid_argument("--grid: empty grid specification");
    }
    return grid;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open output file \"" + path + "\"");
    }
    out << content;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct SolveArgs {
    std::string system_path;
    std::string xi_text;
    std::string method = "lp";
    std::string out_path;
    int cells = 2000;
    double zero_tol = handsoff::kDefaultZeroTol;
    std::uint64_t seed = 0;
    bool force = false;
};

json shoot_to_json(const handsoff::ShootResult& sres, double zero_tol) {
    json j;
    j["converged"] = sres.converged;
    if (sres.converged) {
        j["value_l1"] = sres.value;
        j["value_l0"] = sres.value_l0;
        j["residual"] = sres.residual_norm;
        j["switching_times"] = sres.structure.times;
        j["levels"] = sres.structure.levels;
        j["singular_fraction"] = sres.singular_fraction;
        j["l0_measured"] = handsoff::l0_norm(*sres.control, zero_tol);
    } else {
        j["residual"] = sres.residual_norm;
    }
    return j;
}

int cmd_solve(const SolveArgs& a) {
    const LtiSystem sys = handsoff::load_system(a.system_path);
    const Vector xi = parse_xi(a.xi_text, sys.dim());

    json out;
    if (a.method == "shoot") {
        handsoff::ShootOptions sopt;
        sopt.allow_abnormal = a.force;
        const auto seeds = handsoff::default_costate_seeds(sys, 20, a.seed, std::nullopt);
        const handsoff::ShootResult sres = handsoff::shoot_solve(sys, xi, seeds, sopt);
        if (!sres.converged) {
            if (!handsoff::reachable(sys, xi, a.cells)) {
                out["status"] = "infeasible";
                out["method"] = "shoot";
                out["cells"] = a.cells;
                out["seed"] = a.seed;
                out["system_hash"] = hash_hex(sys.hash());
                write_output(a.out_path, out.dump(2) + "\n");
                return kExitInfeasible;
            }
            std::cerr << "solve: shooting failed to converge (best residual "
                      << sres.residual_norm << "); try --method lp or another --seed\n";
            return kExitError;
        }
        out["status"] = "solved";
        out["value_l1"] = sres.value;
        out["value_l0"] = sres.value_l0;
        out["fractional_cells"] = 0;
        out["residual"] = sres.residual_norm;
        out["switching_times"] = sres.structure.times;
        out["levels"] = sres.structure.levels;
        out["control"] = handsoff::rasterize(sres.structure, a.cells).values();
        out["method"] = "shoot";
        out["cells"] = a.cells;
        out["seed"] = a.seed;
        out["system_hash"] = hash_hex(sys.hash());
        write_output(a.out_path, out.dump(2) + "\n");
        return kExitOk;
    }

    const handsoff::SolveResult res =
        handsoff::solve_lp(handsoff::transcribe(sys, xi, a.cells), a.zero_tol);
    if (res.status == handsoff::SolveStatus::Infeasible) {
        out["status"] = "infeasible";
        out["method"] = a.method;
        out["cells"] = a.cells;
        out["seed"] = a.seed;
        out["system_hash"] = hash_hex(sys.hash());
        write_output(a.out_path, out.dump(2) + "\n");
        return kExitInfeasible;
    }
    if (res.status == handsoff::SolveStatus::IterationLimit) {
        std::cerr << "solve: solver failure (iteration limit); best feasible value "
                  << res.value << "\n";
        return kExitError;
    }

    out["status"] = "solved";
    out["value_l1"] = res.value;
    out["value_l0"] = handsoff::l0_norm(*res.control, a.zero_tol);
    out["fractional_cells"] = res.fractional_cells;
    out["residual"] = res.residual;
    out["control"] = res.control->values();
    out["method"] = a.method;
    out["cells"] = a.cells;
    out["seed"] = a.seed;
    out["system_hash"] = hash_hex(sys.hash());

    if (a.method == "both") {
        handsoff::ShootOptions sopt;
        sopt.allow_abnormal = a.force;
        const auto seeds = handsoff::default_costate_seeds(sys, 20, a.seed, res.dual);
        const handsoff::ShootResult sres = handsoff::shoot_solve(sys, xi, seeds, sopt);
        json sj = shoot_to_json(sres, a.zero_tol);
        if (sres.converged) {
            sj["lp_gap"] = std::abs(sres.value - res.value);
        }
        out["shooting"] = sj;
    }

    write_output(a.out_path, out.dump(2) + "\n");
    return kExitOk;
}

struct SweepArgs {
    std::string system_path;
    std::string grid_text;
    std::string out_path;
    int cells = 2000;
    int jobs = 0;
    std::uint64_t seed = 0;
};

int cmd_sweep(const SweepArgs& a) {
    const LtiSystem sys = handsoff::load_system(a.system_path);
    const GridSpec grid = parse_grid(a.grid_text);
    if (grid.dim() != sys.dim()) {
        throw std::invalid_argument("--grid: dimension " + std::to_string(grid.dim()) +
                                    " does not match the system dimension " +
                                    std::to_string(sys.dim()));
    }

    const handsoff::ValueTable table = handsoff::sweep(sys, grid, a.cells, a.jobs);
    write_output(a.out_path, handsoff::to_csv(table));

    long feas = 0, fail = 0;
    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < table.status.size(); ++i) {
        if (table.status[i] == handsoff::PointStatus::Feasible) {
            ++feas;
            vmin = std::min(vmin, table.values[i]);
            vmax = std::max(vmax, table.values[i]);
        } else if (table.status[i] == handsoff::PointStatus::SolverFailure) {
            ++fail;
            std::cerr << "sweep: solver failure at point index " << i << "\n";
        }
    }
    std::cerr << "sweep: " << table.grid.points() << " points, " << feas << " feasible, " << fail
              << " failures";
    if (feas > 0) std::cerr << ", V in [" << vmin << ", " << vmax << "]";
    std::cerr << ", cells=" << a.cells << ", seed=" << a.seed
              << ", system=" << hash_hex(table.system_hash) << ", created=" << table.created
              << "\n";
    return kExitOk;
}

struct CheckArgs {
    std::string system_path;
    int cells = 2000;
    int jobs = 0;
    std::uint64_t seed = 0;
    bool force = false;
};

int cmd_check(const CheckArgs& a) {
    const LtiSystem sys = handsoff::load_system(a.system_path);
    handsoff::CheckOptions opts;
    opts.cells = a.cells;
    opts.jobs = a.jobs;
    opts.seed = a.seed;
    opts.force = a.force;
    const handsoff::CheckReport rep = handsoff::run_system_check(sys, opts);

    auto line = [](const std::string& name, bool pass, const std::string& detail) {
        std::printf("%-28s %s  %s\n", name.c_str(), pass ? "PASS" : "FAIL", detail.c_str());
    };
    line("normality", rep.normality_pass,
         std::string("controllable=") + (rep.normality.controllable ? "yes" : "no") +
             ", A nonsingular=" + (rep.normality.a_nonsingular ? "yes" : "no"));
    for (const auto& c : rep.level_sets.checks) {
        line("level-set: " + c.name, c.pass, c.detail);
    }
    {
        std::string detail = "jump ratios:";
        for (double r : rep.continuity.ratios) {
            char buf[32];
            std::snprintf(buf, sizeof buf, " %.3f", r);
            detail += buf;
        }
        detail += " (require <= 0.75)";
        line("continuity-refinement", rep.continuity_pass, detail);
    }
    {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%d/%d agree within %.3g (worst gap %.3g)",
                      rep.cross.agreeing, rep.cross.total, rep.cross.tolerance,
                      rep.cross.worst_gap);
        line("lp-vs-shooting", rep.cross_pass, buf);
    }
    return rep.all_pass() ? kExitOk : kExitError;
}

struct PlotArgs {
    std::string input_path;
    std::string out_path;
};

int cmd_plot(const PlotArgs& a) {
    std::ifstream in(a.input_path);
    if (!in) {
        throw std::invalid_argument("plot: cannot open \"" + a.input_path + "\"");
    }
    const handsoff::CsvTable table = handsoff::read_csv(in);
    bool any_feasible = false;
    for (bool f : table.feasible) any_feasible = any_feasible || f;
    const std::string svg = handsoff::render_value_curve_svg(table);
    if (!any_feasible) {
        std::cerr << "plot: warning: table has no feasible points; plot area is empty\n";
    }
    write_output(a.out_path, svg);
    return kExitOk;
}

struct OracleArgs {
    double a = 0.0;
    double b = 0.0;
    double T = 0.0;
    double xi = 0.0;
    std::string out_path;
};

int cmd_oracle1d(const OracleArgs& args) {
    const handsoff::Oracle1dParams params(args.a, args.b, args.T);  // validates a, b, T
    const double x1 = handsoff::oracle1d_reach(params);
    if (std::abs(args.xi) > x1) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "oracle1d: xi=%.12g outside the reachable set [-%.12g, %.12g]\n",
                      args.xi, x1, x1);
        std::cerr << buf;
        return kExitInfeasible;
    }
    const double v = handsoff::oracle1d_value(params, args.xi);
    const handsoff::SwitchingStructure ctrl = handsoff::oracle1d_control(params, args.xi);
    json out;
    out["x1"] = x1;
    out["V0"] = v;
    out["tau"] = v;
    out["level"] = static_cast<int>(ctrl.levels.front());
    write_output(args.out_path, out.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse (L0/L1-optimal) control of linear time-invariant systems"};
    app.require_subcommand(1);

    SolveArgs solve_args;
    CLI::App* solve = app.add_subcommand("solve", "Solve one steering instance");
    solve->add_option("--system", solve_args.system_path, "System JSON file")->required();
    solve->add_option("--xi", solve_args.xi_text, "Initial state (comma-separated)")->required();
    solve->add_option("--cells", solve_args.cells, "LP grid cells")->check(CLI::PositiveNumber);
    solve->add_option("--method", solve_args.method, "lp | shoot | both")
        ->check(CLI::IsMember({"lp", "shoot", "both"}));
    solve->add_option("--zero-tol", solve_args.zero_tol, "Support tolerance");
    solve->add_option("--seed", solve_args.seed, "Seed for shooting multi-start");
    solve->add_option("--out", solve_args.out_path, "Output JSON path (default stdout)");
    solve->add_flag("--force", solve_args.force, "Run shooting on non-normal systems");

    SweepArgs sweep_args;
    CLI::App* sw = app.add_subcommand("sweep", "Tabulate the value function over a grid");
    sw->add_option("--system", sweep_args.system_path, "System JSON file")->required();
    sw->add_option("--grid", sweep_args.grid_text, "min:max:count[,...] per axis")->required();
    sw->add_option("--cells", sweep_args.cells, "LP grid cells")->check(CLI::PositiveNumber);
    sw->add_option("--jobs", sweep_args.jobs, "Parallel workers (default: cores)");
    sw->add_option("--seed", sweep_args.seed, "Recorded in outputs");
    sw->add_option("--out", sweep_args.out_path, "Output CSV path (default stdout)");

    CheckArgs check_args;
    CLI::App* ch = app.add_subcommand("check", "Run the invariant and continuity suite");
    ch->add_option("--system", check_args.system_path, "System JSON file")->required();
    ch->add_option("--cells", check_args.cells, "LP grid cells")->check(CLI::PositiveNumber);
    ch->add_option("--jobs", check_args.jobs, "Parallel workers");
    ch->add_option("--seed", check_args.seed, "Seed for shooting multi-start");
    ch->add_flag("--force", check_args.force, "Run the suite on non-normal systems");

    PlotArgs plot_args;
    CLI::App* pl = app.add_subcommand("plot", "Render a 1D value-table CSV as SVG");
    pl->add_option("input", plot_args.input_path, "Value-table CSV")->required();
    pl->add_option("--out", plot_args.out_path, "Output SVG path (default stdout)");

    OracleArgs oracle_args;
    CLI::App* orc = app.add_subcommand("oracle1d", "Closed-form scalar system answers");
    orc->add_option("--a", oracle_args.a, "Pole a > 0")->required();
    orc->add_option("--b", oracle_args.b, "Input gain b != 0")->required();
    orc->add_option("--T", oracle_args.T, "Horizon T > 0")->required();
    orc->add_option("--xi", oracle_args.xi, "Initial state")->required();
    orc->add_option("--out", oracle_args.out_path, "Output JSON path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitError;
    }

    try {
        if (solve->parsed()) return cmd_solve(solve_args);
        if (sw->parsed()) return cmd_sweep(sweep_args);
        if (ch->parsed()) return cmd_check(check_args);
        if (pl->parsed()) return cmd_plot(plot_args);
        if (orc->parsed()) return cmd_oracle1d(oracle_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
