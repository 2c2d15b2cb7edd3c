#include "beamctl/controllability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <limits>
#include <string>

#include "beamctl/errors.hpp"

namespace beamctl {

std::size_t uniform_intervals(double span, double step) {
    if (!(step > 0.0) || !(span > 0.0)) {
        throw std::invalid_argument("uniform_intervals: span and step must be positive");
    }
    const double ratio = span / step;
    const double n = std::round(ratio);
    if (n < 1.0 || std::abs(ratio - n) > 1e-6) {
        throw std::invalid_argument("uniform_intervals: span " + std::to_string(span) +
                                    " is not an integer multiple of step " + std::to_string(step));
    }
    return static_cast<std::size_t>(n);
}

// ---------------------------------------------------------------------------
// ControlSignal

ControlSignal::ControlSignal(double start, double step, std::vector<ModalCoeffs> values)
    : start_(start), step_(step), values_(std::move(values)) {
    if (values_.size() < 2) throw std::invalid_argument("ControlSignal: need at least two nodes");
    if (!(step_ > 0.0)) throw std::invalid_argument("ControlSignal: step must be positive");
    for (const auto& v : values_) {
        if (v.size() != values_.front().size()) throw std::invalid_argument("ControlSignal: ragged mode counts");
    }
}

ControlSignal ControlSignal::zero(double start, double end, double step, std::size_t modes) {
    const std::size_t n = uniform_intervals(end - start, step);
    const double h = (end - start) / static_cast<double>(n);
    return ControlSignal(start, h, std::vector<ModalCoeffs>(n + 1, ModalCoeffs(modes)));
}

const ModalCoeffs& ControlSignal::right(std::size_t i) const {
    if (auto it = jumps_.find(i); it != jumps_.end()) return it->second;
    return values_.at(i);
}

void ControlSignal::set_left(std::size_t i, ModalCoeffs v) {
    if (v.size() != modes()) throw std::invalid_argument("ControlSignal::set_left: mode count mismatch");
    values_.at(i) = std::move(v);
}

void ControlSignal::set_right(std::size_t i, ModalCoeffs v) {
    if (i >= nodes()) throw std::out_of_range("ControlSignal::set_right: node out of range");
    if (v.size() != modes()) throw std::invalid_argument("ControlSignal::set_right: mode count mismatch");
    jumps_[i] = std::move(v);
}

ModalCoeffs ControlSignal::at(double t) const {
    const double pos = (t - start_) / step_;
    const double last = static_cast<double>(nodes() - 1);
    if (pos < -1e-9 || pos > last + 1e-9) {
        throw std::out_of_range("ControlSignal::at: t = " + std::to_string(t) + " outside [" +
                                std::to_string(start_) + ", " + std::to_string(end()) + "]");
    }
    const double clamped = std::clamp(pos, 0.0, last);
    auto i = static_cast<std::size_t>(std::floor(clamped));
    if (i >= nodes() - 1) return left(nodes() - 1);
    const double frac = clamped - static_cast<double>(i);
    if (frac < 1e-12) return right(i);
    ModalCoeffs out = right(i);
    out *= (1.0 - frac);
    out.axpy(frac, left(i + 1));
    return out;
}

double ControlSignal::l2_norm() const {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < nodes(); ++i) {
        acc += 0.5 * step_ * (dot(right(i), right(i)) + dot(left(i + 1), left(i + 1)));
    }
    return std::sqrt(acc);
}

bool ControlSignal::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](const ModalCoeffs& v) { return v.all_finite(); }) &&
           std::all_of(jumps_.begin(), jumps_.end(), [](const auto& kv) { return kv.second.all_finite(); });
}

ControlSignal& ControlSignal::operator+=(const ControlSignal& o) {
    if (o.nodes() != nodes() || o.start_ != start_ || o.step_ != step_) {
        throw std::invalid_argument("ControlSignal +=: grids differ");
    }
    // Right limits must be combined before left values change.
    std::map<std::size_t, ModalCoeffs> merged;
    for (const auto& [i, v] : jumps_) merged[i] = v + o.right(i);
    for (const auto& [i, v] : o.jumps_) {
        if (!merged.contains(i)) merged[i] = right(i) + v;
    }
    for (std::size_t i = 0; i < nodes(); ++i) values_[i] += o.values_[i];
    jumps_ = std::move(merged);
    return *this;
}

ControlSignal& ControlSignal::operator*=(double s) {
    for (auto& v : values_) v *= s;
    for (auto& [i, v] : jumps_) v *= s;
    return *this;
}

ControlSignal operator+(ControlSignal a, const ControlSignal& b) { return a += b; }
ControlSignal operator*(double s, ControlSignal a) { return a *= s; }

// ---------------------------------------------------------------------------
// Gramians

namespace {

// E(tau) b b* E*(tau) with b = (0, 1): v v^T D where v = E(tau) e2.
Mode2x2 gramian_integrand(const Mode2x2& gen, double lambda, double tau) {
    const Mode2x2 e = expm2(gen, tau);
    const double v1 = e.a12;
    const double v2 = e.a22;
    return {v1 * v1 * lambda, v1 * v2, v2 * v1 * lambda, v2 * v2};
}

Mode2x2 simpson_gramian(const Mode2x2& gen, double lambda, double span, std::size_t panels) {
    if (panels % 2 != 0) ++panels;
    const double h = span / static_cast<double>(panels);
    Mode2x2 acc{};
    for (std::size_t i = 0; i <= panels; ++i) {
        const double weight = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc = acc + weight * gramian_integrand(gen, lambda, h * static_cast<double>(i));
    }
    return (h / 3.0) * acc;
}

Mode2x2 inverse2(const Mode2x2& m) {
    const double det = m.det();
    if (det == 0.0 || !std::isfinite(det)) throw NumericalError("Gramian block is singular");
    return (1.0 / det) * Mode2x2{m.a22, -m.a12, -m.a21, m.a11};
}

// Oscillation rate of mode n, used to pick quadrature steps.
double mode_rate(const ModelParams& p, double lambda) {
    const double disc = p.damping * p.damping - 4.0 * p.stiffness * lambda;
    return std::max({1.0, 0.5 * std::sqrt(std::abs(disc)), 0.5 * p.damping});
}

}  // namespace

Mode2x2 mode_gramian(int n, double t0, double T, const ModelParams& p, double h) {
    if (!(T - t0 > 0.0) || t0 < 0.0) {
        throw std::invalid_argument("mode_gramian: need 0 <= t0 < T");
    }
    const double span = T - t0;
    if (!(h > 0.0) || h > span / 16.0 * (1.0 + 1e-12)) {
        throw std::invalid_argument("mode_gramian: quadrature step must satisfy 0 < h <= (T - t0)/16");
    }
    const auto panels = static_cast<std::size_t>(std::ceil(span / h - 1e-9));
    return simpson_gramian(mode_matrix(n, p), eigenvalue(n), span, panels);
}

WeightedSpectrum weighted_spectrum(const Mode2x2& w, double lambda) {
    // D^{1/2} W D^{-1/2} is symmetric when D W is.
    const double root = std::sqrt(lambda);
    const double a = w.a11;
    const double b = 0.5 * (root * w.a12 + w.a21 / root);
    const double d = w.a22;
    const double mean = 0.5 * (a + d);
    const double radius = std::hypot(0.5 * (a - d), b);
    WeightedSpectrum s;
    s.max = mean + radius;
    s.min = s.max != 0.0 ? (a * d - b * b) / s.max : 0.0;
    return s;
}

GramianSet::GramianSet(const ModelParams& p, double t0, double T, double control_step, GramianRule rule,
                       double quad_step)
    : t0_(t0), T_(T), rule_(rule) {
    p.validate();
    if (!(T - t0 > 0.0) || t0 < 0.0) throw std::invalid_argument("GramianSet: need 0 <= t0 < T");
    intervals_ = uniform_intervals(T - t0, control_step);
    control_step_ = (T - t0) / static_cast<double>(intervals_);

    const auto modes = static_cast<std::size_t>(p.modes);
    gramians_.reserve(modes);
    for (int n = 1; n <= p.modes; ++n) {
        const double lambda = eigenvalue(n);
        const Mode2x2 gen = mode_matrix(n, p);
        Mode2x2 w{};
        if (rule == GramianRule::grid_trapezoid) {
            for (std::size_t i = 0; i <= intervals_; ++i) {
                const double weight = (i == 0 || i == intervals_) ? 0.5 : 1.0;
                const double tau = T - (t0 + control_step_ * static_cast<double>(i));
                w = w + (weight * control_step_) * gramian_integrand(gen, lambda, tau);
            }
        } else {
            const double span = T - t0;
            double h = quad_step > 0.0 ? quad_step : 0.01 / mode_rate(p, lambda);
            h = std::min(h, span / 16.0);
            const auto panels = static_cast<std::size_t>(std::ceil(span / h - 1e-9));
            w = simpson_gramian(gen, lambda, span, panels);
            const double used = span / static_cast<double>(panels + panels % 2);
            quad_step_ = quad_step_ == 0.0 ? used : std::min(quad_step_, used);
        }
        const WeightedSpectrum spec = weighted_spectrum(w, lambda);
        gramians_.push_back(w);
        const bool singular = !(spec.min > 0.0) || w.det() == 0.0 || !std::isfinite(w.det());
        // a singular block is only an error once gamma needs its inverse
        const double nan = std::numeric_limits<double>::quiet_NaN();
        inverses_.push_back(singular ? Mode2x2{nan, nan, nan, nan} : inverse2(w));
        conditions_.push_back(singular ? std::numeric_limits<double>::infinity() : spec.max / spec.min);
    }
}

// ---------------------------------------------------------------------------
// Controllability map and its right inverse

StateZ controllability_map(const ControlSignal& u, const ModelParams& p) {
    p.validate();
    if (u.modes() != static_cast<std::size_t>(p.modes)) {
        throw std::invalid_argument("controllability_map: control has " + std::to_string(u.modes()) +
                                    " modes, model has " + std::to_string(p.modes));
    }
    const double T = u.end();
    const double h = u.step();
    StateZ out(u.modes());
    for (std::size_t i = 0; i < u.nodes(); ++i) {
        // Trapezoid weights: right limit from the interval to the right,
        // left limit from the interval to the left.
        const bool first = i == 0;
        const bool last = i + 1 == u.nodes();
        const ModalCoeffs& lv = u.left(i);
        const ModalCoeffs& rv = u.right(i);
        const ModalCoeffs* from_left = first ? nullptr : &lv;
        const ModalCoeffs* from_right = last ? nullptr : &rv;
        const double tau = T - u.time(i);
        for (int n = 1; n <= p.modes; ++n) {
            const auto k = static_cast<std::size_t>(n - 1);
            double v = 0.0;
            if (from_left) v += 0.5 * h * (*from_left)[k];
            if (from_right) v += 0.5 * h * (*from_right)[k];
            if (v == 0.0) continue;
            const Mode2x2 e = expm2(mode_matrix(n, p), tau);
            out.w[k] += e.a12 * v;
            out.y[k] += e.a22 * v;
        }
    }
    return out;
}

ControlSignal gamma(const StateZ& xi, const GramianSet& gs, const ModelParams& p) {
    if (xi.modes() != gs.modes()) {
        throw std::invalid_argument("gamma: state has " + std::to_string(xi.modes()) + " modes, Gramian set has " +
                                    std::to_string(gs.modes()));
    }
    for (std::size_t k = 0; k < gs.modes(); ++k) {
        if (!(gs.condition(k) <= GramianSet::condition_limit)) {
            throw NumericalError("gamma: Gramian of mode " + std::to_string(k + 1) +
                                 " is ill-conditioned (cond = " + std::to_string(gs.condition(k)) + ")");
        }
    }
    const std::size_t nodes = gs.control_nodes();
    std::vector<ModalCoeffs> values(nodes, ModalCoeffs(gs.modes()));
    for (std::size_t k = 0; k < gs.modes(); ++k) {
        const int n = static_cast<int>(k + 1);
        const double lambda = eigenvalue(n);
        const auto eta = gs.inverse(k).apply(xi.w[k], xi.y[k]);
        if (eta[0] == 0.0 && eta[1] == 0.0) continue;
        const Mode2x2 gen = mode_matrix(n, p);
        for (std::size_t i = 0; i < nodes; ++i) {
            const double tau = gs.end() - (gs.start() + gs.control_step() * static_cast<double>(i));
            // b* E*(tau) eta = (E^T D eta)_2
            const Mode2x2 e = expm2(gen, tau);
            values[i][k] = e.a12 * lambda * eta[0] + e.a22 * eta[1];
        }
    }
    return ControlSignal(gs.start(), gs.control_step(), std::move(values));
}

GammaNorm gamma_norm(const GramianSet& gs, const ModelParams& p, double step) {
    const double span = gs.end() - gs.start();
    if (step <= 0.0) step = span / 2000.0;
    const auto intervals = static_cast<std::size_t>(std::ceil(span / step - 1e-9));
    const double h = span / static_cast<double>(intervals);
    GammaNorm out{0.0, h};
    for (std::size_t k = 0; k < gs.modes(); ++k) {
        const int n = static_cast<int>(k + 1);
        const double lambda = eigenvalue(n);
        const double root = std::sqrt(lambda);
        const Mode2x2 gen = mode_matrix(n, p);
        const Mode2x2& winv = gs.inverse(k);
        for (std::size_t i = 0; i <= intervals; ++i) {
            const double tau = span - h * static_cast<double>(i);
            const Mode2x2 e = expm2(gen, tau);
            // Row b* E*(tau) = (lambda e12, e22); then times W^{-1}.
            const double g1 = lambda * e.a12;
            const double g2 = e.a22;
            const double r1 = g1 * winv.a11 + g2 * winv.a21;
            const double r2 = g1 * winv.a12 + g2 * winv.a22;
            // Dual of the weighted norm: || r D^{-1/2} ||_2.
            out.value = std::max(out.value, std::hypot(r1 / root, r2));
        }
    }
    return out;
}

ControlSignal steering_control(const StateZ& z0, const StateZ& zstar, const GramianSet& gs, const ModelParams& p) {
    const StateZ free = apply_semigroup(z0, gs.end() - gs.start(), p);
    return gamma(zstar - free, gs, p);
}

ControlSignal steering_control(const StateZ& z0, const StateZ& zstar, double t0, double T, const ModelParams& p,
                               double control_step) {
    return steering_control(z0, zstar, GramianSet(p, t0, T, control_step), p);
}

StateZ linear_terminal_state(const StateZ& z0, const ControlSignal& u, const ModelParams& p) {
    return apply_semigroup(z0, u.end() - u.start(), p) + controllability_map(u, p);
}

}  // namespace beamctl
