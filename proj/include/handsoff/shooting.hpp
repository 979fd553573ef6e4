#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "handsoff/lti.hpp"

// Independent solution path via the minimum principle: the costate flows as
// p(t) = e^{-A' t} p0, the extremal control is u(t) = -dez(B' p(t)), and the
// initial costate p0 is found by shooting on the terminal condition. Used to
// cross-validate the LP path; the two must agree on normal systems.

namespace handsoff {

struct CostateSeed {
    Vector p0;
};

// Piecewise-constant extremal control: `times` are the switching instants in
// (0, T), strictly increasing; `levels` has one entry per segment, values in
// {-1, 0, +1}, adjacent entries distinct.
struct SwitchingStructure {
    double horizon = 0.0;
    std::vector<double> times;
    std::vector<double> levels;

    double l1() const;  // sum |level| * segment length
    double l0() const;  // sum over nonzero levels of segment length
    double level_at(double t) const;
};

// Normalizes raw segment data (drops empty segments, merges equal adjacent
// levels) and validates the invariants above.
SwitchingStructure make_switching(double T, const std::vector<double>& boundaries,
                                  const std::vector<double>& levels);

ControlSignal rasterize(const SwitchingStructure& s, int cells);

// 1 for r > 1, 0 for |r| < 1, -1 for r < -1. The set-valued points r = +-1
// map to 0: under normality they carry measure zero, and a fixed selection
// keeps every run deterministic.
double dead_zone(double r);

// -dez(B' e^{-A' t} p0)
double extremal_control(const LtiSystem& sys, const CostateSeed& seed, double t);

// Per-system cache of the shooting grid: costate signal at the pre-scan
// nodes and exact integrals over the uniform quadrature cells. Immutable
// after construction; safe to share across threads.
class ShootingContext {
  public:
    ShootingContext(const LtiSystem& sys, int n_quad);

    const LtiSystem& system() const { return sys_; }
    int n_quad() const { return n_quad_; }

    double costate_signal(const Vector& p0, double t) const;
    double control(const Vector& p0, double t) const;

    struct Analysis {
        std::vector<double> boundaries;  // 0, switch times..., T
        std::vector<double> levels;      // one per segment
        double singular_fraction = 0.0;  // pre-scan nodes with ||sigma|-1| < 1e-9
        int tangential_touches = 0;      // near-threshold nodes without a sign change
    };
    Analysis analyze(const Vector& p0) const;

    // xi + sum_k G_k u_k over the refined grid (uniform cells plus located
    // switching times); exact up to expm accuracy between switches.
    Vector residual(const Vector& xi, const Vector& p0) const;

    SwitchingStructure switching(const Vector& p0) const;

  private:
    LtiSystem sys_;
    int n_quad_;
    double dt_;
    Matrix G_;        // n x n_quad uniform cell integrals
    Matrix scan_w_;   // (10*n_quad + 1) x n rows: (e^{-A t_i} B)'
    std::vector<double> scan_t_;
};

// Boundary-condition residual for a single seed (convenience wrapper that
// builds a context).
Vector shoot_residual(const LtiSystem& sys, const CostateSeed& seed, const Vector& xi,
                      int n_quad);

struct ShootOptions {
    int n_quad = 256;
    double residual_tol = 1e-7;
    bool allow_abnormal = false;  // run on non-normal systems (results may be non-unique)
    int max_iterations = 0;       // 0: derive from dimension
};

struct ShootResult {
    bool converged = false;
    double value = 0.0;     // L1 cost of the extremal; equals L0 exactly for bang-off-bang
    double value_l0 = 0.0;
    double residual_norm = 0.0;
    Vector p0;
    SwitchingStructure structure;
    std::optional<ControlSignal> control;  // rasterized on the quadrature grid
    double singular_fraction = 0.0;
    int tangential_touches = 0;
    int starts_tried = 0;
    int best_start = -1;
};

// Multi-start derivative-free minimization of ||residual||^2 over p0.
// Every start is polished with Nelder-Mead; among the starts whose residual
// meets residual_tol the one with the lowest L1 cost wins (ties: lowest
// start index, so results are reproducible). Throws if the system fails the
// normality gate and allow_abnormal is not set.
ShootResult shoot_solve(const LtiSystem& sys, const Vector& xi, const std::vector<Vector>& seeds,
                        const ShootOptions& opts = {});

// Default multi-start seeds: the zero costate, +-dual_hint when provided
// (the LP equality multipliers approximate -p0), and directions on spheres
// with radii log-spaced against the scale 1/||B||. Deterministic in rng_seed.
std::vector<Vector> default_costate_seeds(const LtiSystem& sys, int count, std::uint64_t rng_seed,
                                          const std::optional<Vector>& dual_hint = std::nullopt);

}  // namespace handsoff
