#include <doctest.h>

#include <cmath>
#include <functional>

#include "beamctl/controllability.hpp"
#include "beamctl/errors.hpp"
#include "oracles.hpp"

using namespace beamctl;

namespace {

ModelParams params(int modes = 8) {
    ModelParams p;
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

ControlSignal random_control(std::mt19937_64& g, double t0, double T, double h, std::size_t n) {
    ControlSignal u = ControlSignal::zero(t0, T, h, n);
    for (std::size_t i = 0; i < u.nodes(); ++i) {
        ModalCoeffs v(n);
        for (std::size_t k = 0; k < n; ++k) v[k] = oracle::uniform(g, -1, 1);
        u.set_left(i, v);
    }
    return u;
}

// RK4 for one forced mode w' = y, y' = -d lambda w - c y + u(t), from (w0, y0) at t0 to T.
std::array<double, 2> forced_mode(int n, const ModelParams& p, std::array<double, 2> z, double t0, double T,
                                  const std::function<double(double)>& u, int steps) {
    const double lam = oracle::lambda(n);
    auto f = [&](double t, const std::array<double, 2>& s) {
        return std::array<double, 2>{s[1], -p.stiffness * lam * s[0] - p.damping * s[1] + u(t)};
    };
    const double h = (T - t0) / steps;
    for (int i = 0; i < steps; ++i) {
        const double t = t0 + h * i;
        auto k1 = f(t, z);
        auto k2 = f(t + h / 2, {z[0] + h / 2 * k1[0], z[1] + h / 2 * k1[1]});
        auto k3 = f(t + h / 2, {z[0] + h / 2 * k2[0], z[1] + h / 2 * k2[1]});
        auto k4 = f(t + h, {z[0] + h * k3[0], z[1] + h * k3[1]});
        for (int j = 0; j < 2; ++j) z[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    }
    return z;
}

}  // namespace

TEST_CASE("control signal basics") {
    ControlSignal u = ControlSignal::zero(0.0, 1.0, 0.25, 2);
    CHECK(u.nodes() == 5);
    u.set_left(2, ModalCoeffs{1.0, 2.0});
    u.set_right(2, ModalCoeffs{3.0, 4.0});
    CHECK(u.at(0.5)[0] == 3.0);
    CHECK(u.left(2)[0] == 1.0);
    CHECK(u.at(0.375)[1] == doctest::Approx(1.0));
    CHECK_THROWS((void)u.at(1.5));
    CHECK_THROWS((void)uniform_intervals(1.0, 0.3));
    CHECK(uniform_intervals(0.3, 0.0005) == 600);
}

TEST_CASE("mode gramian quadrature") {
    const ModelParams p = params();
    const Mode2x2 tiny = mode_gramian(1, 1.0 - 1e-6, 1.0, p, 1e-8);
    CHECK(tiny.max_abs() <= 1e-5);

    const Mode2x2 coarse = mode_gramian(1, 0.0, 1.0, p, 1e-3);
    const Mode2x2 fine = mode_gramian(1, 0.0, 1.0, p, 1e-4);
    CHECK((coarse - fine).max_abs() < 1e-8);

    CHECK_THROWS((void)mode_gramian(1, 1.0, 1.0, p, 1e-3));
    CHECK_THROWS((void)mode_gramian(1, 0.0, 1.0, p, 0.1));

    // [b, A b] = [[0, 1], [1, -c]] has determinant -1, so every W_n is invertible.
    for (int n = 1; n <= 8; ++n) {
        const Mode2x2 a = mode_matrix(n, p);
        CHECK(Mode2x2{0.0, a.a12, 1.0, a.a22}.det() == -1.0);
        CHECK(std::abs(mode_gramian(n, 0.0, 1.0, p, 1e-3).det()) > 0.0);
    }
}

TEST_CASE("gramians are D-symmetric and positive definite") {
    auto rng = oracle::rng(31);
    const ModelParams p = params();
    for (GramianRule rule : {GramianRule::grid_trapezoid, GramianRule::simpson}) {
        const GramianSet gs(p, 0.0, 1.0, 1e-3, rule);
        for (std::size_t k = 0; k < gs.modes(); ++k) {
            const double lam = eigenvalue(static_cast<int>(k + 1));
            const Mode2x2& w = gs.gramian(k);
            CHECK(std::abs(lam * w.a12 - w.a21) <= 1e-12 * std::abs(w.a21));
            CHECK(weighted_spectrum(w, lam).min > 0.0);
            for (int trial = 0; trial < 100; ++trial) {
                const double a = oracle::uniform(rng, -1, 1), b = oracle::uniform(rng, -1, 1);
                // z^T (D W) z with D W = [[lam w11, lam w12], [w21, w22]]
                const double q = a * (lam * w.a11 * a + lam * w.a12 * b) + b * (w.a21 * a + w.a22 * b);
                CHECK(q > 0.0);
            }
            const Mode2x2 id = w * gs.inverse(k);
            CHECK((id - Mode2x2::identity()).max_abs() <= 1e-10);
            CHECK(gs.condition(k) < GramianSet::condition_limit);
        }
    }
}

TEST_CASE("Lyapunov residual of the quadrature gramian") {
    const ModelParams p = params();
    const double T = 1.0;
    for (int n = 1; n <= 8; ++n) {
        const double lam = eigenvalue(n);
        const double omega = std::sqrt(lam);
        const double delta = 1e-3 / omega;
        const double q = 0.01 / omega;
        for (double tau : {0.2, 0.5, 0.9}) {
            const Mode2x2 plus = mode_gramian(n, T - tau - delta, T, p, q);
            const Mode2x2 minus = mode_gramian(n, T - tau + delta, T, p, q);
            const Mode2x2 dq = (1.0 / (2 * delta)) * (plus - minus);
            const Mode2x2 e = expm2(mode_matrix(n, p), tau);
            // E b b* E*: v = E b = (e12, e22), b* E* = (lam e12, e22)
            const Mode2x2 integrand{e.a12 * lam * e.a12, e.a12 * e.a22, e.a22 * lam * e.a12, e.a22 * e.a22};
            CHECK(weighted_norm(dq - integrand, lam) <= 1e-6 * weighted_norm(integrand, lam));
        }
    }
}

TEST_CASE("controllability map") {
    auto rng = oracle::rng(32);
    const ModelParams p = params(3);
    CHECK(norm_z(controllability_map(ControlSignal::zero(0.0, 1.0, 1e-3, 3), p)) == 0.0);

    // constant input in mode 1
    ControlSignal u = ControlSignal::zero(0.0, 1.0, 1e-3, 3);
    for (std::size_t i = 0; i < u.nodes(); ++i) u.set_left(i, ModalCoeffs{0.7, 0.0, 0.0});
    const StateZ g = controllability_map(u, p);
    const auto ref = forced_mode(1, p, {0.0, 0.0}, 0.0, 1.0, [](double) { return 0.7; }, 100000);
    CHECK(std::abs(g.w[0] - ref[0]) < 1e-6);
    CHECK(std::abs(g.y[0] - ref[1]) < 1e-6);
    CHECK(g.w[1] == 0.0);

    const ControlSignal a = random_control(rng, 0.0, 1.0, 1e-3, 3);
    const ControlSignal b = random_control(rng, 0.0, 1.0, 1e-3, 3);
    const StateZ lhs = controllability_map(2.5 * a + b, p);
    const StateZ rhs = 2.5 * controllability_map(a, p) + controllability_map(b, p);
    CHECK(norm_z(lhs - rhs) <= 1e-10 * (1.0 + norm_z(lhs)));
}

TEST_CASE("gamma is a right inverse") {
    auto rng = oracle::rng(33);
    const ModelParams p = params();
    const GramianSet gs(p, 0.0, 1.0, 1e-3);
    const ControlSignal zero = gamma(StateZ(8), gs, p);
    for (const auto& v : zero.values()) CHECK(v.norm() == 0.0);

    StateZ e1(8);
    e1.w[0] = 1.0 / std::sqrt(eigenvalue(1));
    CHECK(norm_z(controllability_map(gamma(e1, gs, p), p) - e1) <= 1e-6 * norm_z(e1));

    for (int trial = 0; trial < 20; ++trial) {
        const StateZ xi = random_state(rng, 8);
        CHECK(norm_z(controllability_map(gamma(xi, gs, p), p) - xi) <= 1e-6 * norm_z(xi));
    }
}

TEST_CASE("gamma norm estimate is grid-stable") {
    const ModelParams p = params();
    for (GramianRule rule : {GramianRule::grid_trapezoid, GramianRule::simpson}) {
        const GramianSet gs(p, 0.0, 1.0, 5e-4, rule);
        const GammaNorm coarse = gamma_norm(gs, p);
        const GammaNorm fine = gamma_norm(gs, p, coarse.step / 10);
        CHECK(coarse.value > 0.0);
        CHECK(std::abs(coarse.value - fine.value) <= 1e-3);
    }
}

TEST_CASE("ill-conditioned gramian names the mode") {
    ModelParams p = params(2);
    p.damping = 1e4;
    const GramianSet gs(p, 0.0, 1.0, 1e-3);
    StateZ xi(2);
    xi.y[0] = 1.0;
    REQUIRE(gs.condition(0) > GramianSet::condition_limit);
    try {
        (void)gamma(xi, gs, p);
        FAIL("expected a NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("mode 1") != std::string::npos);
    }
}

TEST_CASE("steering control") {
    auto rng = oracle::rng(34);
    const ModelParams p = params();

    const StateZ z0 = random_state(rng, 8);
    const StateZ free = apply_semigroup(z0, 1.0, p);
    const ControlSignal none = steering_control(z0, free, 0.0, 1.0, p, 1e-3);
    for (const auto& v : none.values()) CHECK(v.norm() <= 1e-10);

    const StateZ target = random_state(rng, 8);
    const ControlSignal u1 = steering_control(StateZ(8), target, 0.0, 1.0, p, 1e-3);
    const ControlSignal u2 = steering_control(StateZ(8), 2.0 * target, 0.0, 1.0, p, 1e-3);
    for (std::size_t i = 0; i < u1.nodes(); ++i) CHECK((u2.left(i) - 2.0 * u1.left(i)).norm() == 0.0);

    // z0 = 0 to the unit mode-1 state, checked by a continuous-time RK4 run
    // driven by the piecewise-linear control.
    StateZ unit(8);
    unit.w[0] = 1.0 / std::sqrt(eigenvalue(1));
    const ControlSignal u = steering_control(StateZ(8), unit, 0.0, 1.0, p, 1e-4);
    const auto end = forced_mode(1, p, {0.0, 0.0}, 0.0, 1.0, [&](double t) { return u.at(t)[0]; }, 100000);
    StateZ reached(8);
    reached.w[0] = end[0];
    reached.y[0] = end[1];
    CHECK(norm_z(reached - unit) <= 1e-6);
    for (std::size_t i = 0; i < u.nodes(); ++i) {
        for (std::size_t k = 1; k < 8; ++k) CHECK(u.left(i)[k] == 0.0);
    }
}

TEST_CASE("steering control has minimum energy") {
    auto rng = oracle::rng(35);
    const ModelParams p = params(4);
    const GramianSet gs(p, 0.0, 1.0, 1e-3);
    for (int trial = 0; trial < 5; ++trial) {
        const StateZ xi = random_state(rng, 4);
        const ControlSignal best = gamma(xi, gs, p);
        for (int alt = 0; alt < 5; ++alt) {
            const ControlSignal v0 = random_control(rng, 0.0, 1.0, 1e-3, 4);
            // kernel element: v0 - Gamma G v0
            const ControlSignal kernel = v0 + (-1.0) * gamma(controllability_map(v0, p), gs, p);
            CHECK(norm_z(controllability_map(kernel, p)) <= 1e-9);
            const ControlSignal v = best + kernel;
            CHECK(norm_z(controllability_map(v, p) - xi) <= 1e-6 * norm_z(xi));
            CHECK(best.l2_norm() <= v.l2_norm() + 1e-6);
        }
    }
}
