#include <doctest.h>

#include <cmath>
#include <numbers>

#include "beamctl/semigroup.hpp"
#include "oracles.hpp"

using namespace beamctl;

namespace {

ModelParams params(double c = 1.0, double d = 1.0, int modes = 8) {
    ModelParams p;
    p.damping = c;
    p.stiffness = d;
    p.modes = modes;
    return p;
}

StateZ random_state(std::mt19937_64& g, std::size_t n) {
    StateZ z(n);
    for (std::size_t k = 0; k < n; ++k) {
        z.w[k] = oracle::uniform(g, -1, 1) / std::sqrt(eigenvalue(static_cast<int>(k + 1)));
        z.y[k] = oracle::uniform(g, -1, 1);
    }
    return z;
}

double max_diff(const Mode2x2& a, const oracle::Mat2& b) {
    return std::max({std::abs(a.a11 - b[0]), std::abs(a.a12 - b[1]), std::abs(a.a21 - b[2]), std::abs(a.a22 - b[3])});
}

oracle::Mat2 as_array(const Mode2x2& m) { return {m.a11, m.a12, m.a21, m.a22}; }

}  // namespace

TEST_CASE("generator blocks") {
    const Mode2x2 a = mode_matrix(1, params());
    CHECK(a.a11 == 0.0);
    CHECK(a.a12 == 1.0);
    CHECK(a.a21 == doctest::Approx(-97.40909103400243).epsilon(1e-14));
    CHECK(a.a22 == -1.0);
    CHECK(mode_matrix(3, params(1.0, 2.0)).a21 == doctest::Approx(2.0 * mode_matrix(3, params()).a21));
    CHECK_THROWS((void)mode_matrix(1, params(0.0)));
    CHECK_THROWS((void)mode_matrix(0, params()));

    const Mode2x2 s = mode_adjoint_matrix(1, params());
    CHECK(s.a11 == 0.0);
    CHECK(s.a12 == -1.0);
    CHECK(s.a21 == doctest::Approx(97.40909103400243).epsilon(1e-14));
    CHECK(s.a22 == -1.0);
}

TEST_CASE("adjoint is the weighted transpose") {
    auto rng = oracle::rng(21);
    const ModelParams p = params(0.7, 1.3);
    for (int n = 1; n <= 8; ++n) {
        const double lam = eigenvalue(n);
        const Mode2x2 a = mode_matrix(n, p);
        const Mode2x2 s = mode_adjoint_matrix(n, p);
        for (int trial = 0; trial < 20; ++trial) {
            const double w = oracle::uniform(rng, -1, 1), y = oracle::uniform(rng, -1, 1);
            const double w2 = oracle::uniform(rng, -1, 1), y2 = oracle::uniform(rng, -1, 1);
            const auto az = a.apply(w, y);
            const auto sz = s.apply(w2, y2);
            const double lhs = lam * az[0] * w2 + az[1] * y2;
            const double rhs = lam * w * sz[0] + y * sz[1];
            CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(lhs)));
        }
        const Mode2x2 back = weighted_adjoint(s, lam);
        CHECK(max_diff(back, as_array(a)) == 0.0);
    }
}

TEST_CASE("expm2 against oracles") {
    CHECK(max_diff(expm2(mode_matrix(1, params()), 0.0), {1, 0, 0, 1}) == 0.0);

    // generic damped oscillation
    const Mode2x2 a = mode_matrix(1, params());
    const Mode2x2 e = expm2(a, 0.3);
    CHECK(max_diff(e, oracle::rk4_expm(as_array(a), 0.3, 30000)) < 1e-8);

    // overdamped: c^2 > 4 d lambda_1
    const Mode2x2 od = mode_matrix(1, params(30.0));
    CHECK(max_diff(expm2(od, 0.4), oracle::taylor_expm(as_array(od), 0.4)) < 1e-10);

    // repeated root c^2 = 4 d lambda_1
    const double c = 2.0 * std::sqrt(eigenvalue(1));
    const Mode2x2 rr = mode_matrix(1, params(c));
    for (double t : {0.05, 0.3, 1.0}) {
        const Mode2x2 got = expm2(rr, t);
        const double s = std::exp(-c * t / 2);
        const Mode2x2 closed = s * (Mode2x2::identity() + t * (rr + (c / 2) * Mode2x2::identity()));
        CHECK(max_diff(got, as_array(closed)) < 1e-12);
        CHECK(max_diff(got, oracle::taylor_expm(as_array(rr), t)) < 1e-10);
    }
    // just off the repeated root on either side
    for (double rel : {1e-7, -1e-7}) {
        const Mode2x2 near = mode_matrix(1, params(c * (1 + rel)));
        CHECK(max_diff(expm2(near, 0.3), oracle::taylor_expm(as_array(near), 0.3)) < 1e-10);
    }
}

TEST_CASE("group law, inverse and determinant") {
    auto rng = oracle::rng(22);
    const ModelParams p = params();
    for (int trial = 0; trial < 100; ++trial) {
        const StateZ z = random_state(rng, 8);
        const double s = oracle::uniform(rng, -1, 1), t = oracle::uniform(rng, -1, 1);
        const StateZ two = apply_semigroup(apply_semigroup(z, s, p), t, p);
        const StateZ one = apply_semigroup(z, s + t, p);
        CHECK(norm_z(two - one) <= 1e-10 * norm_z(z));
        const StateZ back = apply_semigroup(apply_semigroup(z, t, p), -t, p);
        CHECK(norm_z(back - z) <= 1e-9 * norm_z(z));
        for (int n = 1; n <= 8; ++n) {
            CHECK(std::abs(expm2(mode_matrix(n, p), t).det() - std::exp(-p.damping * t)) <= 1e-10);
        }
    }
    const StateZ z = random_state(rng, 8);
    CHECK(apply_semigroup(z, 0.0, p) == z);
}

TEST_CASE("adjoint group consistency") {
    auto rng = oracle::rng(23);
    const ModelParams p = params(1.0, 1.7);
    for (int trial = 0; trial < 50; ++trial) {
        const StateZ z = random_state(rng, 8), z2 = random_state(rng, 8);
        const double t = oracle::uniform(rng, 0, 1);
        const double lhs = inner_z(apply_semigroup(z, t, p), z2);
        const double rhs = inner_z(z, apply_adjoint_semigroup(z2, t, p));
        CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(lhs)));
    }
}

TEST_CASE("long-time decay") {
    auto rng = oracle::rng(24);
    const ModelParams p = params();
    for (int trial = 0; trial < 20; ++trial) {
        const StateZ z = random_state(rng, 8);
        CHECK(norm_z(apply_semigroup(z, 10.0, p)) < norm_z(z));
    }
}

TEST_CASE("weighted norm matches a power-iteration oracle") {
    auto rng = oracle::rng(25);
    for (int trial = 0; trial < 20; ++trial) {
        const Mode2x2 m{oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1),
                        oracle::uniform(rng, -1, 1)};
        const double lam = eigenvalue(1 + trial % 4);
        // sup over unit weighted vectors, sampled densely on the ellipse
        double best = 0.0;
        for (int k = 0; k < 200000; ++k) {
            const double th = 2 * std::numbers::pi * k / 200000.0;
            const double w = std::cos(th) / std::sqrt(lam), y = std::sin(th);
            const auto v = m.apply(w, y);
            best = std::max(best, std::sqrt(lam * v[0] * v[0] + v[1] * v[1]));
        }
        CHECK(weighted_norm(m, lam) == doctest::Approx(best).epsilon(1e-8));
    }
}

TEST_CASE("operator norm bound") {
    const NormBound m = operator_norm_bound(params());
    CHECK(m.value >= 1.0);
    CHECK(m.step == doctest::Approx(1.0 / 2000));

    ModelParams one = params(1.0, 1.0, 1);
    CHECK(std::abs(operator_norm_bound(one).value - operator_norm_bound(one, 1.0 / 20000).value) < 1e-3);

    // d != 1 makes the lambda-weighted norm differ from the energy norm, so M > 1.
    double prev = 1e300;
    for (double c : {0.5, 1.0, 2.0}) {
        const double v = operator_norm_bound(params(c, 2.0)).value;
        CHECK(v > 1.0);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
    prev = 1e300;
    for (double c : {0.5, 1.0, 2.0}) {
        const double v = operator_norm_bound(params(c, 1.0)).value;
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
}
