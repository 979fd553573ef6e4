#include "handsoff/lti.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace handsoff {

LtiSystem::LtiSystem(Matrix A, Vector B, double T)
    : A_(std::move(A)), B_(std::move(B)), T_(T), n_(static_cast<int>(A_.rows())) {
    if (A_.rows() != A_.cols()) {
        throw std::invalid_argument("LtiSystem: A must be square");
    }
    if (A_.rows() == 0) {
        throw std::invalid_argument("LtiSystem: state dimension must be positive");
    }
    if (B_.size() != A_.rows()) {
        throw std::invalid_argument("LtiSystem: B must be a column vector of length n");
    }
    require_finite(A_, "LtiSystem: A");
    require_finite(B_, "LtiSystem: B");
    if (!(T_ > 0.0) || !std::isfinite(T_)) {
        throw std::invalid_argument("LtiSystem: horizon T must be positive and finite");
    }
    normality_ = check_normality(*this);
}

std::uint64_t LtiSystem::hash() const {
    std::uint64_t h = kFnvOffset;
    const double dims[1] = {static_cast<double>(n_)};
    h = fnv1a_mix(h, dims, 1);
    h = fnv1a_mix(h, A_.data(), static_cast<std::size_t>(A_.size()));
    h = fnv1a_mix(h, B_.data(), static_cast<std::size_t>(B_.size()));
    h = fnv1a_mix(h, &T_, 1);
    return h;
}

NormalityReport check_normality(const LtiSystem& sys) {
    NormalityReport rep;
    const int n = sys.dim();
    rep.controllable = kalman_rank(sys.A(), sys.B()) == n;
    // det scales like ||A||^n, so the 1e-12 threshold is applied at that scale.
    const double scale = std::max(1.0, std::pow(sys.A().norm(), n));
    rep.a_nonsingular = std::abs(sys.A().determinant()) > 1e-12 * scale;
    rep.normal = rep.controllable && rep.a_nonsingular;
    return rep;
}

namespace {
constexpr double kBoundSlack = 1e-9;
}

ControlSignal::ControlSignal(double T, std::vector<double> values)
    : T_(T), values_(std::move(values)) {
    if (values_.empty()) {
        throw std::invalid_argument("ControlSignal: needs at least one cell");
    }
    if (!(T_ > 0.0) || !std::isfinite(T_)) {
        throw std::invalid_argument("ControlSignal: horizon must be positive and finite");
    }
    dt_ = T_ / static_cast<double>(values_.size());
    for (double& v : values_) {
        if (!std::isfinite(v) || std::abs(v) > 1.0 + kBoundSlack) {
            throw std::invalid_argument("ControlSignal: value outside [-1, 1]");
        }
        v = std::clamp(v, -1.0, 1.0);
    }
}

double l1_norm(const ControlSignal& u) {
    double acc = 0.0;
    for (double v : u.values()) acc += std::abs(v);
    return acc * u.dt();
}

double l0_norm(const ControlSignal& u, double zero_tol) {
    if (zero_tol < 0.0) {
        throw std::invalid_argument("l0_norm: zero_tol must be nonnegative");
    }
    int support = 0;
    for (double v : u.values()) {
        if (std::abs(v) > zero_tol) ++support;
    }
    return u.dt() * static_cast<double>(support);
}

double linf_norm(const ControlSignal& u) {
    double m = 0.0;
    for (double v : u.values()) m = std::max(m, std::abs(v));
    return m;
}

Matrix cell_integral_grid(const LtiSystem& sys, int N) {
    if (N < 1) {
        throw std::invalid_argument("cell_integral_grid: N must be >= 1");
    }
    const int n = sys.dim();
    const double dt = sys.horizon() / static_cast<double>(N);
    Matrix G(n, N);
    // G_0 = int_0^dt e^{-As}B ds, then G_{k+1} = e^{-A dt} G_k.
    G.col(0) = cell_integral(sys.A(), sys.B(), 0.0, dt);
    const Matrix step = expm(sys.A(), -dt);
    for (int k = 1; k < N; ++k) {
        G.col(k) = step * G.col(k - 1);
    }
    return G;
}

Vector terminal_map(const LtiSystem& sys, const ControlSignal& u) {
    if (std::abs(u.horizon() - sys.horizon()) > 1e-12 * std::max(1.0, sys.horizon())) {
        throw std::invalid_argument("terminal_map: signal horizon does not match the system");
    }
    const Matrix G = cell_integral_grid(sys, u.cells());
    Vector r = Vector::Zero(sys.dim());
    for (int k = 0; k < u.cells(); ++k) {
        r += G.col(k) * u[k];
    }
    return r;
}

namespace {

using nlohmann::json;

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
    throw std::invalid_argument("system file: field \"" + field + "\" " + what);
}

double number_field(const json& j, const std::string& field) {
    if (!j.contains(field)) field_error(field, "is missing");
    if (!j[field].is_number()) field_error(field, "must be a number");
    return j[field].get<double>();
}

}  // namespace

LtiSystem parse_system(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("system file: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw std::invalid_argument("system file: top level must be an object");
    }

    if (!j.contains("A")) field_error("A", "is missing");
    const json& ja = j["A"];
    if (!ja.is_array() || ja.empty()) field_error("A", "must be a non-empty array of rows");
    const std::size_t n = ja.size();
    Matrix A(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        const json& row = ja[r];
        if (!row.is_array() || row.size() != n) {
            field_error("A", "row " + std::to_string(r) + " must have " + std::to_string(n) +
                                 " entries (A must be square)");
        }
        for (std::size_t c = 0; c < n; ++c) {
            if (!row[c].is_number()) field_error("A", "has a non-numeric entry");
            A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
        }
    }

    if (!j.contains("B")) field_error("B", "is missing");
    const json& jb = j["B"];
    if (!jb.is_array()) field_error("B", "must be a flat array of length n");
    if (jb.size() != n) {
        field_error("B", "has length " + std::to_string(jb.size()) + ", expected " +
                             std::to_string(n));
    }
    Vector B(n);
    for (std::size_t r = 0; r < n; ++r) {
        if (!jb[r].is_number()) field_error("B", "has a non-numeric entry");
        B(static_cast<Eigen::Index>(r)) = jb[r].get<double>();
    }

    const double T = number_field(j, "T");
    if (!(T > 0.0)) field_error("T", "must be positive");
    if (!A.allFinite()) field_error("A", "contains a non-finite value");
    if (!B.allFinite()) field_error("B", "contains a non-finite value");

    return LtiSystem(std::move(A), std::move(B), T);
}

LtiSystem load_system(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("system file: cannot open \"" + path + "\"");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_system(buf.str());
}

}  // namespace handsoff
