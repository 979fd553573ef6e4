#include "handsoff/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace handsoff {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivTol = 1e-10;
constexpr double kDegenTol = 1e-12;
constexpr int kBlandTrigger = 40;

// Bounded-variable two-phase revised simplex on
//   min c'x  s.t.  A x = b,  l <= x <= u,
// with dense columns and a small row count (m <= ~12). The basis is
// refactorized at every pricing round; bound flips are batched inside a
// round because the duals do not depend on nonbasic values. Cycling is
// handled by switching to Bland's rule after a run of degenerate pivots.
//
// Artificial columns (signed identity) are appended internally. After
// phase 1 they are fixed to [0, 0]; any still basic are pinned at zero and
// leave through ordinary degenerate pivots if they block progress.
class BoundedSimplex {
  public:
    enum class Status { Optimal, Infeasible, IterationLimit };

    BoundedSimplex(Matrix A, Vector b, Vector c, Vector lower, Vector upper)
        : A_(std::move(A)),
          b_(std::move(b)),
          c_(std::move(c)),
          lower_(std::move(lower)),
          upper_(std::move(upper)),
          m_(static_cast<int>(A_.rows())),
          ncols_(static_cast<int>(A_.cols())) {}

    Status solve(bool phase1_only) {
        initialize();
        const double scale = std::max(1.0, b_.lpNorm<1>());
        Vector cost1 = Vector::Zero(total());
        cost1.tail(m_).setOnes();

        Status s1 = run_phase(cost1, 0.5 * kFeasTol * scale);
        if (s1 == Status::IterationLimit) return Status::IterationLimit;
        if (objective_of(cost1) > kFeasTol * scale) return Status::Infeasible;
        reached_phase2_ = true;
        if (phase1_only) return Status::Optimal;

        art_fixed_ = true;
        Vector cost2 = Vector::Zero(total());
        cost2.head(ncols_) = c_;
        bland_ = false;
        degenerate_run_ = 0;
        return run_phase(cost2, -kInf);
    }

    bool reached_phase2() const { return reached_phase2_; }
    double objective() const {
        double acc = 0.0;
        for (int j = 0; j < ncols_; ++j) acc += c_(j) * x_(j);
        return acc;
    }
    Vector structural_solution() const { return x_.head(ncols_); }
    const Vector& duals() const { return y_; }
    long iterations() const { return iterations_; }

  private:
    enum class Loc : unsigned char { Basic, AtLower, AtUpper };

    int total() const { return ncols_ + m_; }
    double lo(int j) const { return j < ncols_ ? lower_(j) : 0.0; }
    double up(int j) const {
        if (j < ncols_) return upper_(j);
        return art_fixed_ ? 0.0 : kInf;
    }
    Vector column(int j) const {
        if (j < ncols_) return A_.col(j);
        Vector e = Vector::Zero(m_);
        e(j - ncols_) = art_sign_(j - ncols_);
        return e;
    }
    double col_dot(const Vector& y, int j) const {
        if (j < ncols_) return y.dot(A_.col(j));
        return y(j - ncols_) * art_sign_(j - ncols_);
    }
    double objective_of(const Vector& cost) const {
        double acc = 0.0;
        for (int j = 0; j < total(); ++j) acc += cost(j) * x_(j);
        return acc;
    }

    void initialize() {
        loc_.assign(static_cast<std::size_t>(total()), Loc::AtLower);
        x_ = Vector::Zero(total());
        for (int j = 0; j < ncols_; ++j) x_(j) = lower_(j);

        Vector r = b_;
        for (int j = 0; j < ncols_; ++j) {
            if (x_(j) != 0.0) r -= A_.col(j) * x_(j);
        }
        art_sign_ = Vector::Ones(m_);
        basis_.resize(static_cast<std::size_t>(m_));
        for (int i = 0; i < m_; ++i) {
            if (r(i) < 0.0) art_sign_(i) = -1.0;
            const int aj = ncols_ + i;
            basis_[static_cast<std::size_t>(i)] = aj;
            loc_[static_cast<std::size_t>(aj)] = Loc::Basic;
            x_(aj) = std::abs(r(i));
        }
        art_fixed_ = false;
        reached_phase2_ = false;
        bland_ = false;
        degenerate_run_ = 0;
    }

    void refactorize(const Vector& cost) {
        Matrix B(m_, m_);
        Vector cb(m_);
        for (int i = 0; i < m_; ++i) {
            B.col(i) = column(basis_[static_cast<std::size_t>(i)]);
            cb(i) = cost(basis_[static_cast<std::size_t>(i)]);
        }
        lu_.compute(B);
        Vector r = b_;
        for (int j = 0; j < ncols_; ++j) {
            if (loc_[static_cast<std::size_t>(j)] != Loc::Basic && x_(j) != 0.0) {
                r.noalias() -= A_.col(j) * x_(j);
            }
        }
        for (int i = 0; i < m_; ++i) {
            const int aj = ncols_ + i;
            if (loc_[static_cast<std::size_t>(aj)] != Loc::Basic && x_(aj) != 0.0) {
                r(i) -= art_sign_(i) * x_(aj);
            }
        }
        Vector xb = lu_.solve(r);
        for (int i = 0; i < m_; ++i) x_(basis_[static_cast<std::size_t>(i)]) = xb(i);
        y_ = lu_.transpose().solve(cb);
    }

    struct Candidate {
        int j;
        double d;
    };

    Status run_phase(const Vector& cost, double stop_below) {
        const long max_iter = 2000 + 30L * total();
        constexpr std::size_t kBatch = 64;  // candidates kept per pricing round
        std::vector<Candidate> cands;
        cands.reserve(static_cast<std::size_t>(total()));
        Vector d_struct(ncols_);

        while (true) {
            refactorize(cost);
            if (objective_of(cost) <= stop_below) return Status::Optimal;

            cands.clear();
            d_struct.noalias() = cost.head(ncols_) - A_.transpose() * y_;
            for (int j = 0; j < total(); ++j) {
                const Loc l = loc_[static_cast<std::size_t>(j)];
                if (l == Loc::Basic) continue;
                if (up(j) - lo(j) <= 0.0) continue;  // fixed column
                const double d = (j < ncols_) ? d_struct(j) : cost(j) - col_dot(y_, j);
                if ((l == Loc::AtLower && d < -kOptTol) || (l == Loc::AtUpper && d > kOptTol)) {
                    cands.push_back({j, d});
                }
            }
            if (cands.empty()) return Status::Optimal;

            if (bland_) {
                auto it = std::min_element(cands.begin(), cands.end(),
                                           [](const Candidate& a, const Candidate& b) {
                                               return a.j < b.j;
                                           });
                cands = {*it};
            } else {
                // keep only the strongest candidates; anything left over is
                // re-priced on the next round at unchanged duals
                const std::size_t keep = std::min(kBatch, cands.size());
                std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(keep),
                                  cands.end(), [](const Candidate& a, const Candidate& b) {
                                      return std::abs(a.d) > std::abs(b.d);
                                  });
                cands.resize(keep);
            }

            bool pivoted = false;
            for (const Candidate& cand : cands) {
                const int j = cand.j;
                const Loc l = loc_[static_cast<std::size_t>(j)];
                const double dir = (l == Loc::AtLower) ? 1.0 : -1.0;
                if (l == Loc::Basic) continue;
                if ((l == Loc::AtLower && cand.d >= -kOptTol) ||
                    (l == Loc::AtUpper && cand.d <= kOptTol)) {
                    continue;
                }

                const Vector w =
                    (j < ncols_) ? Vector(lu_.solve(A_.col(j))) : Vector(lu_.solve(column(j)));

                double t_basic = kInf;
                int leave = -1;
                bool leave_to_upper = false;
                double leave_mag = 0.0;
                for (int i = 0; i < m_; ++i) {
                    const int bj = basis_[static_cast<std::size_t>(i)];
                    const double wi = dir * w(i);
                    double lim;
                    bool to_upper;
                    if (wi > kPivTol) {
                        lim = std::max(0.0, (x_(bj) - lo(bj)) / wi);
                        to_upper = false;
                    } else if (wi < -kPivTol) {
                        if (up(bj) == kInf) continue;
                        lim = std::max(0.0, (up(bj) - x_(bj)) / (-wi));
                        to_upper = true;
                    } else {
                        continue;
                    }
                    const bool better =
                        lim < t_basic - 1e-12 ||
                        (lim < t_basic + 1e-12 &&
                         (bland_ ? bj < basis_[static_cast<std::size_t>(leave < 0 ? i : leave)]
                                 : std::abs(w(i)) > leave_mag));
                    if (leave < 0 || better) {
                        t_basic = lim;
                        leave = i;
                        leave_to_upper = to_upper;
                        leave_mag = std::abs(w(i));
                    }
                }

                const double t_flip = up(j) - lo(j);
                if (t_flip == kInf && t_basic == kInf) {
                    throw std::runtime_error("simplex: problem is unbounded");
                }

                ++iterations_;
                if (iterations_ > max_iter) return Status::IterationLimit;

                if (t_flip <= t_basic + 1e-12 && t_flip < kInf) {
                    // bound flip: basis and duals unchanged, keep batching
                    x_(j) = (dir > 0.0) ? up(j) : lo(j);
                    loc_[static_cast<std::size_t>(j)] =
                        (dir > 0.0) ? Loc::AtUpper : Loc::AtLower;
                    for (int i = 0; i < m_; ++i) {
                        x_(basis_[static_cast<std::size_t>(i)]) -= dir * t_flip * w(i);
                    }
                    continue;
                }

                // basis change
                const int lv = basis_[static_cast<std::size_t>(leave)];
                x_(j) += dir * t_basic;
                for (int i = 0; i < m_; ++i) {
                    x_(basis_[static_cast<std::size_t>(i)]) -= dir * t_basic * w(i);
                }
                x_(lv) = leave_to_upper ? up(lv) : lo(lv);
                loc_[static_cast<std::size_t>(lv)] = leave_to_upper ? Loc::AtUpper : Loc::AtLower;
                basis_[static_cast<std::size_t>(leave)] = j;
                loc_[static_cast<std::size_t>(j)] = Loc::Basic;

                if (t_basic <= kDegenTol) {
                    if (++degenerate_run_ > kBlandTrigger) bland_ = true;
                } else {
                    degenerate_run_ = 0;
                }
                pivoted = true;
                break;
            }

            if (!pivoted && !cands.empty() && iterations_ > max_iter) {
                return Status::IterationLimit;
            }
        }
    }

    Matrix A_;
    Vector b_, c_, lower_, upper_;
    int m_, ncols_;
    Vector art_sign_;
    bool art_fixed_ = false;
    bool reached_phase2_ = false;

    std::vector<Loc> loc_;
    std::vector<int> basis_;
    Vector x_;
    Vector y_;
    Eigen::PartialPivLU<Matrix> lu_;
    long iterations_ = 0;
    bool bland_ = false;
    int degenerate_run_ = 0;
};

struct LpData {
    Matrix A;
    Vector b, c, lower, upper;
};

LpData build_lp(const LpTranscription& t) {
    const int n = t.dim();
    const int N = t.cells();
    const bool has_budget = t.budget.has_value();
    const int m = n + (has_budget ? 1 : 0);
    const int cols = 2 * N + (has_budget ? 1 : 0);

    LpData d;
    d.A = Matrix::Zero(m, cols);
    d.A.block(0, 0, n, N) = t.G;
    d.A.block(0, N, n, N) = -t.G;
    d.b = Vector::Zero(m);
    d.b.head(n) = -t.xi;
    d.c = Vector::Zero(cols);
    d.c.head(2 * N).setConstant(t.dt);
    d.lower = Vector::Zero(cols);
    d.upper = Vector::Ones(cols);
    if (has_budget) {
        const double alpha = *t.budget;
        d.A.row(n).head(2 * N).setConstant(t.dt);
        d.A(n, 2 * N) = 1.0;  // slack: dt*sum(p+m) + s = alpha
        d.b(n) = alpha;
        d.upper(2 * N) = alpha;
    }
    return d;
}

}  // namespace

LpTranscription transcribe(const LtiSystem& sys, const Vector& xi, int N) {
    if (N < 1) {
        throw std::invalid_argument("transcribe: N must be >= 1");
    }
    if (xi.size() != sys.dim()) {
        throw std::invalid_argument("transcribe: xi must have the system dimension");
    }
    require_finite(xi, "transcribe: xi");
    LpTranscription t;
    t.G = cell_integral_grid(sys, N);
    t.dt = sys.horizon() / static_cast<double>(N);
    t.horizon = sys.horizon();
    t.xi = xi;
    return t;
}

SolveResult solve_lp(const LpTranscription& t, double zero_tol) {
    if (t.budget && *t.budget < 0.0) {
        throw std::invalid_argument("solve_lp: budget must be nonnegative");
    }
    LpData d = build_lp(t);
    BoundedSimplex simplex(std::move(d.A), std::move(d.b), std::move(d.c), std::move(d.lower),
                           std::move(d.upper));
    const BoundedSimplex::Status st = simplex.solve(false);

    SolveResult res;
    res.iterations = simplex.iterations();

    if (st == BoundedSimplex::Status::Infeasible ||
        (st == BoundedSimplex::Status::IterationLimit && !simplex.reached_phase2())) {
        res.status = (st == BoundedSimplex::Status::Infeasible) ? SolveStatus::Infeasible
                                                                : SolveStatus::IterationLimit;
        res.feasible = false;
        res.value = std::numeric_limits<double>::quiet_NaN();
        res.residual = t.xi.norm();
        return res;
    }

    res.status = (st == BoundedSimplex::Status::Optimal) ? SolveStatus::Solved
                                                         : SolveStatus::IterationLimit;
    res.feasible = true;

    const int N = t.cells();
    const Vector x = simplex.structural_solution();
    std::vector<double> u(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) {
        u[static_cast<std::size_t>(k)] = x(k) - x(N + k);
    }
    res.control.emplace(t.horizon, std::move(u));
    res.value = simplex.objective();
    res.fractional_cells = 0;
    Vector reach = Vector::Zero(t.dim());
    for (int k = 0; k < N; ++k) {
        const double uk = (*res.control)[k];
        if (std::abs(uk) > zero_tol && std::abs(uk) < 1.0 - zero_tol) ++res.fractional_cells;
        reach += t.G.col(k) * uk;
    }
    res.residual = (reach + t.xi).norm();
    res.dual = simplex.duals().head(t.dim());
    return res;
}

ValueOutcome value_l1(const LtiSystem& sys, const Vector& xi, int N) {
    const SolveResult r = solve_lp(transcribe(sys, xi, N));
    return {r.status, r.feasible, r.value};
}

std::pair<ValueOutcome, ValueOutcome> value_l1_refined(const LtiSystem& sys, const Vector& xi,
                                                       int N) {
    return {value_l1(sys, xi, N), value_l1(sys, xi, 2 * N)};
}

namespace {

bool phase1_feasible(const LpTranscription& t) {
    LpData d = build_lp(t);
    BoundedSimplex simplex(std::move(d.A), std::move(d.b), std::move(d.c), std::move(d.lower),
                           std::move(d.upper));
    const BoundedSimplex::Status st = simplex.solve(true);
    if (st == BoundedSimplex::Status::IterationLimit) {
        throw std::runtime_error("simplex: iteration limit during feasibility check");
    }
    return st == BoundedSimplex::Status::Optimal;
}

}  // namespace

bool reachable(const LtiSystem& sys, const Vector& xi, int N) {
    return phase1_feasible(transcribe(sys, xi, N));
}

bool budget_feasible(const LtiSystem& sys, const Vector& xi, int N, double alpha) {
    if (alpha < 0.0) {
        throw std::invalid_argument("budget_feasible: alpha must be nonnegative");
    }
    LpTranscription t = transcribe(sys, xi, N);
    t.budget = alpha;
    return phase1_feasible(t);
}

}  // namespace handsoff
