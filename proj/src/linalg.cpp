#include "handsoff/linalg.hpp"

#include <cstring>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

namespace handsoff {

void require_finite(const Matrix& M, const char* what) {
    if (!M.allFinite()) {
        throw std::invalid_argument(std::string(what) + " contains a non-finite entry");
    }
}

Matrix expm(const Matrix& M, double t) {
    if (M.rows() != M.cols()) {
        throw std::invalid_argument("expm: matrix must be square");
    }
    if (!std::isfinite(t)) {
        throw std::invalid_argument("expm: t must be finite");
    }
    require_finite(M, "expm: matrix");
    return (M * t).exp();
}

Vector cell_integral(const Matrix& A, const Vector& B, double t0, double t1) {
    const Eigen::Index n = A.rows();
    if (A.rows() != A.cols()) {
        throw std::invalid_argument("cell_integral: A must be square");
    }
    if (B.size() != n) {
        throw std::invalid_argument("cell_integral: B must be a column vector matching A");
    }
    if (!(t0 < t1)) {
        throw std::invalid_argument("cell_integral: invalid interval, requires t0 < t1");
    }

    // exp([[-A, B], [0, 0]] * d) has top-right block equal to
    // int_0^d e^{-A s} B ds; shifting by e^{-A t0} moves it to [t0, t1].
    Matrix aug = Matrix::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = -A;
    aug.topRightCorner(n, 1) = B;
    Matrix e = expm(aug, t1 - t0);
    Vector base = e.topRightCorner(n, 1);
    if (t0 == 0.0) {
        return base;
    }
    return expm(A, -t0) * base;
}

int kalman_rank(const Matrix& A, const Vector& B) {
    const Eigen::Index n = A.rows();
    if (A.rows() != A.cols()) {
        throw std::invalid_argument("kalman_rank: A must be square");
    }
    if (B.size() != n) {
        throw std::invalid_argument("kalman_rank: B must be a column vector matching A");
    }
    Matrix ctrb(n, n);
    Vector col = B;
    for (Eigen::Index k = 0; k < n; ++k) {
        ctrb.col(k) = col;
        col = A * col;
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(ctrb);
    qr.setThreshold(1e-9);
    return static_cast<int>(qr.rank());
}

std::uint64_t fnv1a_mix(std::uint64_t h, const double* data, std::size_t count) {
    constexpr std::uint64_t prime = 1099511628211ull;
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &data[i], sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= prime;
        }
    }
    return h;
}

}  // namespace handsoff
