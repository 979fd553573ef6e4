#pragma once

#include <Eigen/Dense>

// Dense linear-algebra kernels shared by the whole library: matrix
// exponential, exact state-transition integrals over grid cells, and the
// controllability rank test. Dimensions here are small (n <= 10), so
// everything is dense and value-typed.

namespace handsoff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Throws std::invalid_argument when M contains NaN or Inf.
void require_finite(const Matrix& M, const char* what);

// e^{Mt}. Scaling-and-squaring with a Pade approximant; relative error
// stays below 1e-12 for ||Mt|| <= 20.
Matrix expm(const Matrix& M, double t);

// Integral of e^{-As} B over [t0, t1], computed through the exponential of
// the augmented matrix [[-A, B], [0, 0]] so there is no quadrature bias.
// Requires t0 < t1, A square n x n, B a column n-vector.
Vector cell_integral(const Matrix& A, const Vector& B, double t0, double t1);

// Rank of the controllability matrix [B, AB, ..., A^{n-1}B] using
// column-pivoted QR with relative pivot tolerance 1e-9.
int kalman_rank(const Matrix& A, const Vector& B);

// FNV-1a over the raw bytes of the argument doubles; used to tag outputs
// with the system they came from. Stable across runs and platforms with
// the same endianness.
std::uint64_t fnv1a_mix(std::uint64_t h, const double* data, std::size_t count);
constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;

}  // namespace handsoff
