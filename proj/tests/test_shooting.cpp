#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "handsoff/lp.hpp"
#include "handsoff/shooting.hpp"

using handsoff::CostateSeed;
using handsoff::LtiSystem;
using handsoff::Matrix;
using handsoff::ShootingContext;
using handsoff::ShootOptions;
using handsoff::ShootResult;
using handsoff::Vector;

namespace {

LtiSystem scalar_system() {
    Matrix A(1, 1);
    A << 1.0;
    Vector B(1);
    B << 2.0;
    return LtiSystem(A, B, 5.0);
}

LtiSystem oscillator_system() {
    Matrix A(2, 2);
    A << 0.0, 1.0, -1.0, 0.0;
    Vector B(2);
    B << 0.0, 1.0;
    return LtiSystem(A, B, 2.0 * M_PI);
}

Vector vec1(double x) {
    Vector v(1);
    v << x;
    return v;
}

}  // namespace

TEST_CASE("dead zone branches and boundary selection") {
    CHECK(handsoff::dead_zone(0.5) == 0.0);
    CHECK(handsoff::dead_zone(-0.5) == 0.0);
    CHECK(handsoff::dead_zone(2.0) == 1.0);
    CHECK(handsoff::dead_zone(-3.0) == -1.0);
    CHECK(handsoff::dead_zone(1.0) == 0.0);
    CHECK(handsoff::dead_zone(-1.0) == 0.0);
}

TEST_CASE("dead zone is odd away from the thresholds") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int i = 0; i < 200; ++i) {
        const double r = u(rng);
        if (std::abs(std::abs(r) - 1.0) < 1e-12) continue;
        CHECK(handsoff::dead_zone(-r) == -handsoff::dead_zone(r));
    }
}

TEST_CASE("extremal control vanishes for the zero costate") {
    const LtiSystem sys = scalar_system();
    for (double t : {0.0, 1.0, 2.5, 5.0}) {
        CHECK(handsoff::extremal_control(sys, {Vector::Zero(1)}, t) == 0.0);
    }
}

TEST_CASE("extremal control follows the scalar switching time") {
    // p0 = -1: B' p(t) = -2 e^{-t}, so u = +1 until t = ln 2, then 0
    const LtiSystem sys = scalar_system();
    const CostateSeed seed{vec1(-1.0)};
    CHECK(handsoff::extremal_control(sys, seed, 0.0) == 1.0);
    CHECK(handsoff::extremal_control(sys, seed, 0.5) == 1.0);
    CHECK(handsoff::extremal_control(sys, seed, std::log(2.0) + 1e-6) == 0.0);
    CHECK(handsoff::extremal_control(sys, seed, 4.0) == 0.0);
    CHECK_THROWS_AS(handsoff::extremal_control(sys, seed, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(handsoff::extremal_control(sys, seed, 5.1), std::invalid_argument);
}

TEST_CASE("flipping the costate sign flips the control") {
    const LtiSystem sys = oscillator_system();
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 30; ++trial) {
        Vector p0(2);
        p0 << u(rng), u(rng);
        const double t = 0.5 * (u(rng) + 3.0);
        const double up = handsoff::extremal_control(sys, {p0}, t);
        const double un = handsoff::extremal_control(sys, {Vector(-p0)}, t);
        CHECK(up == -un);
    }
}

TEST_CASE("residual vanishes for the trivial instance") {
    const LtiSystem sys = scalar_system();
    const Vector r = handsoff::shoot_residual(sys, {Vector::Zero(1)}, Vector::Zero(1), 64);
    CHECK(r.norm() == 0.0);
}

TEST_CASE("residual vanishes at the closed-form costate") {
    // xi = 1 is steered by u = -1 on [0, log 2), induced by p0 = 1
    const LtiSystem sys = scalar_system();
    const Vector r = handsoff::shoot_residual(sys, {vec1(1.0)}, vec1(1.0), 256);
    CHECK(r.norm() <= 1e-8);
}

TEST_CASE("residual is continuous in the seed away from tangency") {
    const LtiSystem sys = scalar_system();
    ShootingContext ctx(sys, 128);
    const Vector xi = vec1(0.7);
    const Vector base = ctx.residual(xi, vec1(1.4));
    for (double h : {1e-4, 1e-5, 1e-6}) {
        const Vector pert = ctx.residual(xi, vec1(1.4 + h));
        // Lipschitz-like bound: the switch time moves O(h), the integrand is O(1)
        CHECK((pert - base).norm() <= 50.0 * h);
    }
}

TEST_CASE("switching structure of a converged scalar shot") {
    const LtiSystem sys = scalar_system();
    const auto seeds = handsoff::default_costate_seeds(sys, 20, 42);
    const ShootResult res = handsoff::shoot_solve(sys, vec1(1.0), seeds);
    REQUIRE(res.converged);
    CHECK(std::abs(res.value - std::log(2.0)) <= 1e-6);
    REQUIRE(res.structure.times.size() == 1);
    CHECK(std::abs(res.structure.times[0] - std::log(2.0)) <= 1e-6);
    CHECK(res.structure.levels.size() == 2);
    CHECK(res.structure.levels[0] == -1.0);
    CHECK(res.structure.levels[1] == 0.0);
    CHECK(res.residual_norm <= 1e-7);
}

TEST_CASE("zero initial state accepts the zero costate") {
    const LtiSystem sys = scalar_system();
    const auto seeds = handsoff::default_costate_seeds(sys, 20, 7);
    const ShootResult res = handsoff::shoot_solve(sys, vec1(0.0), seeds);
    REQUIRE(res.converged);
    CHECK(res.value == 0.0);
    CHECK(res.structure.times.empty());
    CHECK(res.structure.levels == std::vector<double>{0.0});
}

TEST_CASE("every converged shot is bang-off-bang with equal norms") {
    const LtiSystem sys = oscillator_system();
    std::mt19937 rng(19);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int converged = 0;
    for (int trial = 0; trial < 6; ++trial) {
        Vector xi(2);
        xi << 2.5 * u(rng), 2.5 * u(rng);
        const handsoff::SolveResult lp =
            handsoff::solve_lp(handsoff::transcribe(sys, xi, 600));
        if (!lp.feasible) continue;
        const auto seeds = handsoff::default_costate_seeds(
            sys, 20, 1000 + static_cast<std::uint64_t>(trial), lp.dual);
        const ShootResult res = handsoff::shoot_solve(sys, xi, seeds);
        if (!res.converged) continue;
        ++converged;
        for (double lev : res.structure.levels) {
            CHECK((lev == -1.0 || lev == 0.0 || lev == 1.0));
        }
        CHECK(res.structure.l0() == res.structure.l1());  // exact, by construction
        CHECK(res.value_l0 == res.value);
        CHECK(res.singular_fraction < 1e-3);
        // cross-method agreement
        CHECK(std::abs(res.value - lp.value) <= 1e-2);
    }
    CHECK(converged >= 4);
}

TEST_CASE("shooting refuses non-normal systems unless forced") {
    Matrix A(2, 2);
    A << 0.0, 1.0, 0.0, 0.0;
    Vector B(2);
    B << 0.0, 1.0;
    const LtiSystem sys(A, B, 1.0);  // controllable but singular A
    const auto seeds = handsoff::default_costate_seeds(sys, 4, 1);
    CHECK_THROWS_AS(handsoff::shoot_solve(sys, Vector::Zero(2), seeds), std::runtime_error);
    ShootOptions opts;
    opts.allow_abnormal = true;
    const ShootResult res = handsoff::shoot_solve(sys, Vector::Zero(2), seeds, opts);
    CHECK(res.converged);  // the origin is trivially steered
}

TEST_CASE("default seeds are deterministic in the rng seed") {
    const LtiSystem sys = oscillator_system();
    const auto s1 = handsoff::default_costate_seeds(sys, 20, 99);
    const auto s2 = handsoff::default_costate_seeds(sys, 20, 99);
    const auto s3 = handsoff::default_costate_seeds(sys, 20, 100);
    REQUIRE(s1.size() == s2.size());
    bool all_equal = true;
    for (std::size_t i = 0; i < s1.size(); ++i) {
        all_equal = all_equal && (s1[i] - s2[i]).norm() == 0.0;
    }
    CHECK(all_equal);
    bool any_diff = false;
    for (std::size_t i = 0; i < std::min(s1.size(), s3.size()); ++i) {
        any_diff = any_diff || (s1[i] - s3[i]).norm() != 0.0;
    }
    CHECK(any_diff);
}

TEST_CASE("rasterized structure matches the level function") {
    const LtiSystem sys = scalar_system();
    const auto st = handsoff::make_switching(5.0, {0.0, 1.25, 3.0, 5.0}, {1.0, 0.0, -1.0});
    const handsoff::ControlSignal u = handsoff::rasterize(st, 40);
    CHECK(u[0] == 1.0);
    CHECK(u[12] == 0.0);   // t = 1.5625
    CHECK(u[30] == -1.0);  // t = 3.8125
    CHECK(handsoff::l1_norm(u) ==
          doctest::Approx(st.l1()).epsilon(0.05));  // raster error <= one cell per switch
    (void)sys;
}

TEST_CASE("make_switching normalizes and validates") {
    const auto merged = handsoff::make_switching(2.0, {0.0, 0.5, 0.5, 2.0}, {1.0, 0.0, 0.0});
    CHECK(merged.times == std::vector<double>{0.5});
    CHECK(merged.levels == std::vector<double>{1.0, 0.0});

    CHECK_THROWS_AS(handsoff::make_switching(2.0, {0.0, 2.0}, {0.5}), std::invalid_argument);
    CHECK_THROWS_AS(handsoff::make_switching(2.0, {0.0, 1.0}, {1.0, 0.0}),
                    std::invalid_argument);
}
