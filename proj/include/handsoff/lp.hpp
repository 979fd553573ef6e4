#pragma once

#include <optional>
#include <vector>

#include "handsoff/lti.hpp"

// Minimum-fuel solver: exact-discretization LP transcription of the
// L1-optimal steering problem, solved with a self-contained bounded-variable
// revised simplex. The control on each cell is split as u_k = p_k - m_k with
// p_k, m_k in [0, 1]; both carry cost dt, so p_k m_k = 0 at any optimum and
// the objective equals the L1 norm of the control.

namespace handsoff {

constexpr double kFeasTol = 1e-9;
constexpr double kOptTol = 1e-9;

struct LpTranscription {
    Matrix G;      // n x N, column k = cell_integral(A, B, t_k, t_{k+1})
    double dt = 0.0;
    double horizon = 0.0;
    Vector xi;     // steering constraint: sum_k G_k u_k = -xi
    std::optional<double> budget;  // optional extra row: dt * sum(p+m) <= budget

    int cells() const { return static_cast<int>(G.cols()); }
    int dim() const { return static_cast<int>(G.rows()); }
};

// minimize dt * sum(p_k + m_k) s.t. sum G_k (p_k - m_k) = -xi, p, m in [0,1].
LpTranscription transcribe(const LtiSystem& sys, const Vector& xi, int N);

enum class SolveStatus {
    Solved,
    Infeasible,      // xi outside the (discretized) reachable set; a status, not an error
    IterationLimit,  // solver failure; value carries the best feasible objective found
};

struct SolveResult {
    SolveStatus status = SolveStatus::Infeasible;
    bool feasible = false;
    std::optional<ControlSignal> control;  // present when a feasible point exists
    double value = 0.0;                    // LP objective = L1 cost
    int fractional_cells = 0;              // #{k : zero_tol < |u_k| < 1 - zero_tol}, <= n at a vertex
    double residual = 0.0;                 // ||sum G_k u_k + xi||_2
    Vector dual;                           // equality-constraint multipliers at the optimum
    long iterations = 0;
};

SolveResult solve_lp(const LpTranscription& t, double zero_tol = kDefaultZeroTol);

struct ValueOutcome {
    SolveStatus status = SolveStatus::Infeasible;
    bool feasible = false;
    double value = 0.0;
};

// Optimal LP value at xi (V1 up to discretization).
ValueOutcome value_l1(const LtiSystem& sys, const Vector& xi, int N);

// Convergence diagnostic: values at N and 2N cells.
std::pair<ValueOutcome, ValueOutcome> value_l1_refined(const LtiSystem& sys, const Vector& xi,
                                                       int N);

// Membership tests via phase-1 feasibility only (no objective).
bool reachable(const LtiSystem& sys, const Vector& xi, int N);
bool budget_feasible(const LtiSystem& sys, const Vector& xi, int N, double alpha);

}  // namespace handsoff
