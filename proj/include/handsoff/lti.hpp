#pragma once

#include <string>
#include <vector>

#include "handsoff/linalg.hpp"

// Plant description dx/dt = A x + B u on a fixed horizon [0, T], together
// with the piecewise-constant control representation and its norms.
//
// Steering convention used everywhere in this library:
//   x(T) = 0  <=>  int_0^T e^{-As} B u(s) ds = -xi.
// The reachable set is symmetric under u -> -u, so membership does not
// depend on the sign choice; we fix the minus convention.

namespace handsoff {

struct NormalityReport {
    bool controllable = false;
    bool a_nonsingular = false;
    bool normal = false;  // sufficient condition: both of the above
};

class LtiSystem {
  public:
    // Validates dimensions, finiteness and T > 0. The normality gate is
    // evaluated once here and cached.
    LtiSystem(Matrix A, Vector B, double T);

    const Matrix& A() const { return A_; }
    const Vector& B() const { return B_; }
    double horizon() const { return T_; }
    int dim() const { return n_; }
    const NormalityReport& normality() const { return normality_; }

    // Hash of (n, A, B, T) bit patterns; tags CSV/JSON outputs.
    std::uint64_t hash() const;

  private:
    Matrix A_;
    Vector B_;
    double T_;
    int n_;
    NormalityReport normality_;
};

// Controllability (Kalman rank = n) and nonsingularity of A
// (|det A| above 1e-12 relative to the matrix scale). Their conjunction
// is the normality gate used by the shooting solver and the CLI.
NormalityReport check_normality(const LtiSystem& sys);

// Piecewise-constant control on a uniform grid of N cells covering [0, T],
// every value in [-1, 1]. Values within 1e-9 outside the bound are clamped
// (LP vertices land there through rounding); anything worse throws.
class ControlSignal {
  public:
    ControlSignal(double T, std::vector<double> values);

    int cells() const { return static_cast<int>(values_.size()); }
    double dt() const { return dt_; }
    double horizon() const { return T_; }
    const std::vector<double>& values() const { return values_; }
    double operator[](int k) const { return values_[static_cast<std::size_t>(k)]; }

  private:
    double T_;
    double dt_;
    std::vector<double> values_;
};

constexpr double kDefaultZeroTol = 1e-8;

// sum_k |u_k| dt
double l1_norm(const ControlSignal& u);

// dt * #{k : |u_k| > zero_tol}; Lebesgue measure of the numerical support.
double l0_norm(const ControlSignal& u, double zero_tol = kDefaultZeroTol);

// max_k |u_k|
double linf_norm(const ControlSignal& u);

// r(u) = sum_k G_k u_k with G_k the exact cell integral of e^{-As}B.
// Steering xi to the origin at T means r(u) = -xi.
Vector terminal_map(const LtiSystem& sys, const ControlSignal& u);

// Columns G_k = cell_integral(A, B, t_k, t_{k+1}) for a uniform grid of N
// cells. Built by propagating e^{-A dt} so the whole grid costs two matrix
// exponentials; agrees with per-cell cell_integral to well below 1e-10.
Matrix cell_integral_grid(const LtiSystem& sys, int N);

// Reads {"A": [[...], ...], "B": [...], "T": number} (row-major A).
// Parse errors name the offending field.
LtiSystem load_system(const std::string& path);
LtiSystem parse_system(const std::string& json_text);

}  // namespace handsoff
