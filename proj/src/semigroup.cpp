#include "beamctl/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace beamctl {

double Mode2x2::max_abs() const {
    return std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)});
}

Mode2x2 operator*(const Mode2x2& a, const Mode2x2& b) {
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
            a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}

Mode2x2 operator+(const Mode2x2& a, const Mode2x2& b) {
    return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
}

Mode2x2 operator-(const Mode2x2& a, const Mode2x2& b) {
    return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
}

Mode2x2 operator*(double s, const Mode2x2& a) { return {s * a.a11, s * a.a12, s * a.a21, s * a.a22}; }

void ModelParams::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("ModelParams: " + what); };
    if (!(damping > 0.0)) fail("damping c must be > 0");
    if (!(stiffness > 0.0)) fail("stiffness d must be > 0");
    // k = 0 switches the cable term off, which the F = 0 reductions need.
    if (!(cable >= 0.0)) fail("cable constant k must be >= 0");
    if (modes < 1) fail("mode count N must be >= 1");
    if (!(horizon > 0.0)) fail("horizon T must be > 0");
    if (!(delay > 0.0 && delay < horizon)) fail("delay span must satisfy 0 < r < T");
    if (!std::isfinite(damping) || !std::isfinite(stiffness) || !std::isfinite(cable) || !std::isfinite(horizon) ||
        !std::isfinite(delay)) {
        fail("parameters must be finite");
    }
}

Mode2x2 mode_matrix(int n, const ModelParams& p) {
    p.validate();
    return {0.0, 1.0, -p.stiffness * eigenvalue(n), -p.damping};
}

Mode2x2 weighted_adjoint(const Mode2x2& m, double lambda) {
    // D^{-1} m^T D with D = diag(lambda, 1)
    return {m.a11, m.a21 / lambda, m.a12 * lambda, m.a22};
}

Mode2x2 mode_adjoint_matrix(int n, const ModelParams& p) {
    return weighted_adjoint(mode_matrix(n, p), eigenvalue(n));
}

Mode2x2 expm2(const Mode2x2& m, double t) {
    if (t == 0.0) return Mode2x2::identity();

    // exp(mt) = e^{st} (f0 I + f1 (m - sI)), s = trace/2, with f0, f1 from
    // q^2 = s^2 - det = disc/4.
    const double tr = m.trace();
    const double det = m.det();
    const double s = 0.5 * tr;
    const double disc = tr * tr - 4.0 * det;
    const double scale = std::max(tr * tr, 4.0 * std::abs(det));

    double f0 = 1.0;
    double f1 = t;
    if (std::abs(disc) < 1e-9 * scale) {
        // repeated root: keep f0 = 1, f1 = t
    } else if (disc < 0.0) {
        const double omega = 0.5 * std::sqrt(-disc);
        f0 = std::cos(omega * t);
        f1 = std::sin(omega * t) / omega;
    } else {
        const double q = 0.5 * std::sqrt(disc);
        f0 = std::cosh(q * t);
        f1 = std::sinh(q * t) / q;
    }

    const double e = std::exp(s * t);
    const Mode2x2 shifted{m.a11 - s, m.a12, m.a21, m.a22 - s};
    return {e * (f0 + f1 * shifted.a11), e * f1 * shifted.a12, e * f1 * shifted.a21, e * (f0 + f1 * shifted.a22)};
}

double weighted_norm(const Mode2x2& m, double lambda) {
    const double root = std::sqrt(lambda);
    const double b11 = m.a11;
    const double b12 = root * m.a12;
    const double b21 = m.a21 / root;
    const double b22 = m.a22;
    // Largest singular value of a real 2x2 matrix.
    const double p = std::hypot(b11 + b22, b12 - b21);
    const double q = std::hypot(b11 - b22, b12 + b21);
    return 0.5 * (p + q);
}

ModalPropagator::ModalPropagator(const ModelParams& p, double t, Kind kind) : t_(t) {
    p.validate();
    blocks_.reserve(static_cast<std::size_t>(p.modes));
    for (int n = 1; n <= p.modes; ++n) {
        const Mode2x2 gen = kind == Kind::forward ? mode_matrix(n, p) : mode_adjoint_matrix(n, p);
        blocks_.push_back(expm2(gen, t));
    }
}

StateZ ModalPropagator::apply(const StateZ& z) const {
    if (z.modes() != blocks_.size()) {
        throw std::invalid_argument("ModalPropagator: state has " + std::to_string(z.modes()) + " modes, expected " +
                                    std::to_string(blocks_.size()));
    }
    StateZ out(z.modes());
    for (std::size_t n = 0; n < blocks_.size(); ++n) {
        const auto [w, y] = blocks_[n].apply(z.w[n], z.y[n]);
        out.w[n] = w;
        out.y[n] = y;
    }
    return out;
}

double ModalPropagator::norm() const {
    double best = 0.0;
    for (std::size_t n = 0; n < blocks_.size(); ++n) {
        best = std::max(best, weighted_norm(blocks_[n], eigenvalue(static_cast<int>(n + 1))));
    }
    return best;
}

StateZ apply_semigroup(const StateZ& z, double t, const ModelParams& p) {
    return ModalPropagator(p, t).apply(z);
}

StateZ apply_adjoint_semigroup(const StateZ& z, double t, const ModelParams& p) {
    return ModalPropagator(p, t, ModalPropagator::Kind::adjoint).apply(z);
}

double semigroup_norm(double t, const ModelParams& p) { return ModalPropagator(p, t).norm(); }

NormBound operator_norm_bound(const ModelParams& p, double step) {
    p.validate();
    if (step <= 0.0) step = p.horizon / 2000.0;
    const auto intervals = static_cast<std::size_t>(std::ceil(p.horizon / step - 1e-9));
    const double h = p.horizon / static_cast<double>(intervals);

    NormBound out{1.0, h, 0.0};
    for (std::size_t i = 0; i <= intervals; ++i) {
        const double t = h * static_cast<double>(i);
        const double v = semigroup_norm(t, p);
        if (v > out.value) {
            out.value = v;
            out.argmax = t;
        }
    }
    return out;
}

}  // namespace beamctl
