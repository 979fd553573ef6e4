#include "handsoff/shooting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

namespace handsoff {

namespace {
constexpr double kSingularBand = 1e-9;
constexpr double kBisectTol = 1e-10;
}

double SwitchingStructure::l1() const {
    double acc = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double next = (i < times.size()) ? times[i] : horizon;
        acc += std::abs(levels[i]) * (next - prev);
        prev = next;
    }
    return acc;
}

double SwitchingStructure::l0() const {
    double acc = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double next = (i < times.size()) ? times[i] : horizon;
        if (levels[i] != 0.0) acc += next - prev;
        prev = next;
    }
    return acc;
}

double SwitchingStructure::level_at(double t) const {
    std::size_t seg = 0;
    while (seg < times.size() && t >= times[seg]) ++seg;
    return levels[seg];
}

SwitchingStructure make_switching(double T, const std::vector<double>& boundaries,
                                  const std::vector<double>& levels) {
    if (boundaries.size() != levels.size() + 1) {
        throw std::invalid_argument("make_switching: need one level per segment");
    }
    const double eps = 1e-12 * std::max(1.0, T);
    SwitchingStructure s;
    s.horizon = T;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double a = boundaries[i];
        const double b = boundaries[i + 1];
        if (b - a <= eps) continue;  // empty segment
        const double lev = (levels[i] == 0.0) ? 0.0 : levels[i];  // normalize -0
        if (lev != -1.0 && lev != 0.0 && lev != 1.0) {
            throw std::invalid_argument("make_switching: levels must be -1, 0 or +1");
        }
        if (!s.levels.empty() && s.levels.back() == lev) {
            continue;  // merge with previous segment; drop the boundary
        }
        if (!s.levels.empty()) s.times.push_back(a);
        s.levels.push_back(lev);
    }
    if (s.levels.empty()) s.levels.push_back(0.0);
    for (std::size_t i = 1; i < s.times.size(); ++i) {
        if (!(s.times[i] > s.times[i - 1])) {
            throw std::invalid_argument("make_switching: times must be strictly increasing");
        }
    }
    if (!s.times.empty() && (s.times.front() <= 0.0 || s.times.back() >= T)) {
        throw std::invalid_argument("make_switching: times must lie in (0, T)");
    }
    return s;
}

ControlSignal rasterize(const SwitchingStructure& s, int cells) {
    if (cells < 1) {
        throw std::invalid_argument("rasterize: cells must be >= 1");
    }
    const double dt = s.horizon / static_cast<double>(cells);
    std::vector<double> v(static_cast<std::size_t>(cells));
    for (int k = 0; k < cells; ++k) {
        v[static_cast<std::size_t>(k)] = s.level_at((static_cast<double>(k) + 0.5) * dt);
    }
    return ControlSignal(s.horizon, std::move(v));
}

double dead_zone(double r) {
    if (r > 1.0) return 1.0;
    if (r < -1.0) return -1.0;
    return 0.0;
}

double extremal_control(const LtiSystem& sys, const CostateSeed& seed, double t) {
    if (t < 0.0 || t > sys.horizon()) {
        throw std::invalid_argument("extremal_control: t must lie in [0, T]");
    }
    if (seed.p0.size() != sys.dim()) {
        throw std::invalid_argument("extremal_control: p0 must have the system dimension");
    }
    const double sigma = (expm(sys.A(), -t) * sys.B()).dot(seed.p0);
    return -dead_zone(sigma);
}

ShootingContext::ShootingContext(const LtiSystem& sys, int n_quad)
    : sys_(sys), n_quad_(n_quad) {
    if (n_quad < 1) {
        throw std::invalid_argument("ShootingContext: n_quad must be >= 1");
    }
    const int n = sys_.dim();
    const double T = sys_.horizon();
    dt_ = T / static_cast<double>(n_quad_);
    G_ = cell_integral_grid(sys_, n_quad_);

    const int nodes = 10 * n_quad_ + 1;
    scan_t_.resize(static_cast<std::size_t>(nodes));
    scan_w_.resize(nodes, n);
    const double h = T / static_cast<double>(nodes - 1);
    const Matrix step = expm(sys_.A(), -h);
    Vector v = sys_.B();
    for (int i = 0; i < nodes; ++i) {
        scan_t_[static_cast<std::size_t>(i)] = static_cast<double>(i) * h;
        scan_w_.row(i) = v.transpose();
        v = step * v;
    }
}

double ShootingContext::costate_signal(const Vector& p0, double t) const {
    return (expm(sys_.A(), -t) * sys_.B()).dot(p0);
}

double ShootingContext::control(const Vector& p0, double t) const {
    return -dead_zone(costate_signal(p0, t));
}

ShootingContext::Analysis ShootingContext::analyze(const Vector& p0) const {
    const int nodes = static_cast<int>(scan_t_.size());
    Vector sigma = scan_w_ * p0;

    Analysis out;
    std::vector<double> switches;
    int singular_nodes = 0;
    std::vector<bool> near(static_cast<std::size_t>(nodes), false);
    for (int i = 0; i < nodes; ++i) {
        if (std::abs(std::abs(sigma(i)) - 1.0) < kSingularBand) {
            ++singular_nodes;
            near[static_cast<std::size_t>(i)] = true;
        }
    }
    out.singular_fraction = static_cast<double>(singular_nodes) / static_cast<double>(nodes);

    std::vector<bool> in_crossing(static_cast<std::size_t>(nodes), false);
    for (double thr : {1.0, -1.0}) {
        for (int i = 0; i + 1 < nodes; ++i) {
            const double a = sigma(i) - thr;
            const double b = sigma(i + 1) - thr;
            if (a == 0.0) {
                if (b != 0.0) {
                    switches.push_back(scan_t_[static_cast<std::size_t>(i)]);
                    in_crossing[static_cast<std::size_t>(i)] = true;
                }
                continue;
            }
            if (a * b < 0.0) {
                double lo = scan_t_[static_cast<std::size_t>(i)];
                double hi = scan_t_[static_cast<std::size_t>(i + 1)];
                double flo = a;
                while (hi - lo > kBisectTol) {
                    const double mid = 0.5 * (lo + hi);
                    const double fmid = costate_signal(p0, mid) - thr;
                    if (fmid == 0.0) {
                        lo = hi = mid;
                        break;
                    }
                    if ((flo < 0.0) != (fmid < 0.0)) {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fmid;
                    }
                }
                switches.push_back(0.5 * (lo + hi));
                in_crossing[static_cast<std::size_t>(i)] = true;
                in_crossing[static_cast<std::size_t>(i + 1)] = true;
            }
        }
    }
    for (int i = 0; i < nodes; ++i) {
        if (near[static_cast<std::size_t>(i)] && !in_crossing[static_cast<std::size_t>(i)]) {
            ++out.tangential_touches;
        }
    }

    std::sort(switches.begin(), switches.end());
    const double T = sys_.horizon();
    const double eps = 1e-12 * std::max(1.0, T);
    out.boundaries.push_back(0.0);
    for (double t : switches) {
        if (t <= eps || t >= T - eps) continue;
        if (t - out.boundaries.back() > eps) out.boundaries.push_back(t);
    }
    out.boundaries.push_back(T);

    for (std::size_t i = 0; i + 1 < out.boundaries.size(); ++i) {
        const double mid = 0.5 * (out.boundaries[i] + out.boundaries[i + 1]);
        out.levels.push_back(-dead_zone(costate_signal(p0, mid)));
    }
    return out;
}

Vector ShootingContext::residual(const Vector& xi, const Vector& p0) const {
    const Analysis an = analyze(p0);
    Vector r = xi;
    std::size_t bidx = 1;  // first interior boundary candidate
    for (int k = 0; k < n_quad_; ++k) {
        const double a = static_cast<double>(k) * dt_;
        const double b = (k + 1 == n_quad_) ? sys_.horizon() : (static_cast<double>(k + 1) * dt_);
        std::vector<double> cuts;
        while (bidx + 1 < an.boundaries.size() && an.boundaries[bidx] < b) {
            if (an.boundaries[bidx] > a) cuts.push_back(an.boundaries[bidx]);
            ++bidx;
        }
        if (cuts.empty()) {
            // level is constant on the whole cell; the cached mid node sits at 10k+5
            const double lev = -dead_zone((scan_w_.row(10 * k + 5) * p0)(0));
            if (lev != 0.0) r += G_.col(k) * lev;
            continue;
        }
        double lo = a;
        for (std::size_t c = 0; c <= cuts.size(); ++c) {
            const double hi = (c < cuts.size()) ? cuts[c] : b;
            if (hi - lo > 1e-14) {
                const double lev = -dead_zone(costate_signal(p0, 0.5 * (lo + hi)));
                if (lev != 0.0) r += cell_integral(sys_.A(), sys_.B(), lo, hi) * lev;
            }
            lo = hi;
        }
    }
    return r;
}

SwitchingStructure ShootingContext::switching(const Vector& p0) const {
    const Analysis an = analyze(p0);
    return make_switching(sys_.horizon(), an.boundaries, an.levels);
}

Vector shoot_residual(const LtiSystem& sys, const CostateSeed& seed, const Vector& xi,
                      int n_quad) {
    if (xi.size() != sys.dim() || seed.p0.size() != sys.dim()) {
        throw std::invalid_argument("shoot_residual: dimension mismatch");
    }
    ShootingContext ctx(sys, n_quad);
    return ctx.residual(xi, seed.p0);
}

namespace {

struct NmOutcome {
    Vector x;
    double f = 0.0;
    int evals = 0;
};

// Nelder-Mead on ||residual||^2. The objective is piecewise smooth in p0
// (kinks where switch times cross cell or horizon boundaries), which is
// exactly the setting where a derivative-free polisher earns its keep.
NmOutcome nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                      double step, double target, int max_iter) {
    const int n = static_cast<int>(x0.size());
    std::vector<Vector> xs;
    std::vector<double> fs;
    xs.reserve(static_cast<std::size_t>(n + 1));
    xs.push_back(x0);
    fs.push_back(f(x0));
    int evals = 1;
    for (int i = 0; i < n; ++i) {
        Vector p = x0;
        p(i) += step;
        xs.push_back(p);
        fs.push_back(f(p));
        ++evals;
    }

    auto order = [&]() {
        std::vector<int> idx(xs.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            return fs[static_cast<std::size_t>(a)] < fs[static_cast<std::size_t>(b)];
        });
        std::vector<Vector> x2;
        std::vector<double> f2;
        for (int i : idx) {
            x2.push_back(xs[static_cast<std::size_t>(i)]);
            f2.push_back(fs[static_cast<std::size_t>(i)]);
        }
        xs.swap(x2);
        fs.swap(f2);
    };

    for (int iter = 0; iter < max_iter; ++iter) {
        order();
        if (fs.front() <= target) break;
        double spread = 0.0;
        for (std::size_t i = 1; i < xs.size(); ++i) {
            spread = std::max(spread, (xs[i] - xs.front()).lpNorm<Eigen::Infinity>());
        }
        if (spread < 1e-13 * std::max(1.0, xs.front().lpNorm<Eigen::Infinity>())) break;

        Vector centroid = Vector::Zero(n);
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) centroid += xs[i];
        centroid /= static_cast<double>(n);

        const Vector& worst = xs.back();
        const double fw = fs.back();
        const double fbest = fs.front();
        const double fsecond = fs[fs.size() - 2];

        Vector xr = centroid + (centroid - worst);
        const double fr = f(xr);
        ++evals;
        if (fr < fbest) {
            Vector xe = centroid + 2.0 * (centroid - worst);
            const double fe = f(xe);
            ++evals;
            if (fe < fr) {
                xs.back() = xe;
                fs.back() = fe;
            } else {
                xs.back() = xr;
                fs.back() = fr;
            }
            continue;
        }
        if (fr < fsecond) {
            xs.back() = xr;
            fs.back() = fr;
            continue;
        }
        Vector xc = centroid + 0.5 * ((fr < fw ? xr : worst) - centroid);
        const double fc = f(xc);
        ++evals;
        if (fc < std::min(fr, fw)) {
            xs.back() = xc;
            fs.back() = fc;
            continue;
        }
        for (std::size_t i = 1; i < xs.size(); ++i) {
            xs[i] = xs.front() + 0.5 * (xs[i] - xs.front());
            fs[i] = f(xs[i]);
            ++evals;
        }
    }
    order();
    return {xs.front(), fs.front(), evals};
}

}  // namespace

ShootResult shoot_solve(const LtiSystem& sys, const Vector& xi, const std::vector<Vector>& seeds,
                        const ShootOptions& opts) {
    if (!sys.normality().normal && !opts.allow_abnormal) {
        throw std::runtime_error(
            "shoot_solve: system fails the normality gate (controllable with nonsingular A "
            "required); the extremal control may be non-unique. Override with force.");
    }
    if (xi.size() != sys.dim()) {
        throw std::invalid_argument("shoot_solve: xi must have the system dimension");
    }
    if (seeds.empty()) {
        throw std::invalid_argument("shoot_solve: needs at least one seed");
    }

    ShootingContext ctx(sys, opts.n_quad);
    auto objective = [&](const Vector& p) { return ctx.residual(xi, p).squaredNorm(); };

    const int n = sys.dim();
    const int max_iter =
        (opts.max_iterations > 0) ? opts.max_iterations : (250 + 150 * n);
    const double target = 1e-18;

    ShootResult best;
    best.starts_tried = static_cast<int>(seeds.size());
    double best_value = std::numeric_limits<double>::infinity();
    double best_res_any = std::numeric_limits<double>::infinity();

    for (std::size_t s = 0; s < seeds.size(); ++s) {
        if (seeds[s].size() != n) {
            throw std::invalid_argument("shoot_solve: seed dimension mismatch");
        }
        const double step = std::max(0.25 * seeds[s].lpNorm<Eigen::Infinity>(), 0.5);
        const NmOutcome nm = nelder_mead(objective, seeds[s], step, target, max_iter);
        const double rn = std::sqrt(nm.f);
        if (rn <= opts.residual_tol) {
            const SwitchingStructure st = ctx.switching(nm.x);
            const double val = st.l1();
            if (!best.converged || val < best_value - 1e-12) {
                best.converged = true;
                best_value = val;
                best.p0 = nm.x;
                best.residual_norm = rn;
                best.best_start = static_cast<int>(s);
            }
        } else if (!best.converged && rn < best_res_any) {
            best_res_any = rn;
            best.p0 = nm.x;
            best.residual_norm = rn;
        }
    }

    if (!best.converged) {
        return best;  // shooting failure: caller falls back to the LP path
    }

    const ShootingContext::Analysis an = ctx.analyze(best.p0);
    best.structure = make_switching(sys.horizon(), an.boundaries, an.levels);
    best.value = best.structure.l1();
    best.value_l0 = best.structure.l0();
    best.singular_fraction = an.singular_fraction;
    best.tangential_touches = an.tangential_touches;
    best.control = rasterize(best.structure, opts.n_quad);
    return best;
}

std::vector<Vector> default_costate_seeds(const LtiSystem& sys, int count, std::uint64_t rng_seed,
                                          const std::optional<Vector>& dual_hint) {
    const int n = sys.dim();
    std::vector<Vector> seeds;
    seeds.push_back(Vector::Zero(n));
    if (dual_hint && dual_hint->size() == n && dual_hint->allFinite()) {
        seeds.push_back(-*dual_hint);
        seeds.push_back(*dual_hint);
    }

    const double bnorm = std::max(sys.B().norm(), 1e-12);
    const double growth = std::exp(std::min(sys.A().norm() * sys.horizon(), 14.0));
    const double r_min = 0.5 / bnorm;
    const double r_max = 4.0 * growth / bnorm;

    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int remaining = std::max(0, count - static_cast<int>(seeds.size()));
    for (int k = 0; k < remaining; ++k) {
        const double frac =
            (remaining == 1) ? 0.5 : static_cast<double>(k) / static_cast<double>(remaining - 1);
        const double radius = r_min * std::pow(r_max / r_min, frac);
        Vector dir(n);
        if (n == 1) {
            dir(0) = (k % 2 == 0) ? 1.0 : -1.0;
        } else {
            double norm = 0.0;
            while (norm < 1e-8) {
                for (int i = 0; i < n; ++i) dir(i) = gauss(rng);
                norm = dir.norm();
            }
            dir /= norm;
        }
        seeds.push_back(radius * dir);
    }
    return seeds;
}

}  // namespace handsoff
