#pragma once

// Gramians, the controllability map G u = int S(T-s) B u(s) ds, and its
// right inverse Gamma for the linear system z' = A z + B u, B = (0, I).

#include <cstddef>
#include <map>
#include <vector>

#include "beamctl/semigroup.hpp"
#include "beamctl/spectral.hpp"

namespace beamctl {

// Number of uniform intervals of length ~step covering `span`. Throws if
// span/step is not within 1e-6 of an integer.
[[nodiscard]] std::size_t uniform_intervals(double span, double step);

// Piecewise-linear control on a uniform grid. Node values are left limits;
// a node may carry a distinct right limit, which is how switched controls
// (pull-back) are represented.
class ControlSignal {
public:
    ControlSignal() = default;
    ControlSignal(double start, double step, std::vector<ModalCoeffs> values);

    [[nodiscard]] static ControlSignal zero(double start, double end, double step, std::size_t modes);

    [[nodiscard]] std::size_t nodes() const noexcept { return values_.size(); }
    [[nodiscard]] std::size_t modes() const noexcept { return values_.empty() ? 0 : values_.front().size(); }
    [[nodiscard]] double start() const noexcept { return start_; }
    [[nodiscard]] double step() const noexcept { return step_; }
    [[nodiscard]] double end() const noexcept { return time(nodes() - 1); }
    [[nodiscard]] double time(std::size_t i) const noexcept { return start_ + step_ * static_cast<double>(i); }

    [[nodiscard]] const ModalCoeffs& left(std::size_t i) const { return values_.at(i); }
    [[nodiscard]] const ModalCoeffs& right(std::size_t i) const;
    [[nodiscard]] bool has_jump(std::size_t i) const { return jumps_.contains(i); }
    [[nodiscard]] const std::vector<ModalCoeffs>& values() const noexcept { return values_; }
    [[nodiscard]] const std::map<std::size_t, ModalCoeffs>& jumps() const noexcept { return jumps_; }

    void set_left(std::size_t i, ModalCoeffs v);
    void set_right(std::size_t i, ModalCoeffs v);

    // Right-continuous piecewise-linear evaluation; t outside the grid throws.
    [[nodiscard]] ModalCoeffs at(double t) const;
    // L2-in-time norm with the trapezoid rule applied interval by interval.
    [[nodiscard]] double l2_norm() const;
    [[nodiscard]] bool all_finite() const;

    ControlSignal& operator+=(const ControlSignal& o);
    ControlSignal& operator*=(double s);

private:
    double start_ = 0.0;
    double step_ = 0.0;
    std::vector<ModalCoeffs> values_;
    std::map<std::size_t, ModalCoeffs> jumps_;
};

[[nodiscard]] ControlSignal operator+(ControlSignal a, const ControlSignal& b);
[[nodiscard]] ControlSignal operator*(double s, ControlSignal a);

// W_n = int_{t0}^{T} E(T-s) b b* E*(T-s) ds, composite Simpson with step <= h.
// Requires 0 <= t0 < T and h <= (T - t0)/16.
[[nodiscard]] Mode2x2 mode_gramian(int n, double t0, double T, const ModelParams& p, double h);

enum class GramianRule {
    // Trapezoid sum on the control grid, matching controllability_map; makes
    // Gamma an exact right inverse of the discrete map.
    grid_trapezoid,
    // Composite Simpson with a per-mode step resolving the oscillation; the
    // continuous-time Gramian.
    simpson,
};

class GramianSet {
public:
    static constexpr double condition_limit = 1e12;

    // control_step fixes the grid on which Gamma emits controls. quad_step only
    // applies to the Simpson rule; <= 0 picks a step resolving each mode.
    GramianSet(const ModelParams& p, double t0, double T, double control_step,
               GramianRule rule = GramianRule::grid_trapezoid, double quad_step = 0.0);

    [[nodiscard]] double start() const noexcept { return t0_; }
    [[nodiscard]] double end() const noexcept { return T_; }
    [[nodiscard]] double control_step() const noexcept { return control_step_; }
    [[nodiscard]] std::size_t control_nodes() const noexcept { return intervals_ + 1; }
    [[nodiscard]] GramianRule rule() const noexcept { return rule_; }
    // Finest Simpson step used (0 for the grid rule).
    [[nodiscard]] double quad_step() const noexcept { return quad_step_; }
    [[nodiscard]] std::size_t modes() const noexcept { return gramians_.size(); }

    [[nodiscard]] const Mode2x2& gramian(std::size_t mode_index) const { return gramians_.at(mode_index); }
    [[nodiscard]] const Mode2x2& inverse(std::size_t mode_index) const { return inverses_.at(mode_index); }
    // Condition number of W_n as a self-adjoint operator in the weighted norm.
    [[nodiscard]] double condition(std::size_t mode_index) const { return conditions_.at(mode_index); }

private:
    double t0_;
    double T_;
    double control_step_;
    std::size_t intervals_;
    GramianRule rule_;
    double quad_step_ = 0.0;
    std::vector<Mode2x2> gramians_;
    std::vector<Mode2x2> inverses_;
    std::vector<double> conditions_;
};

// Smallest and largest eigenvalue of D^{1/2} W D^{-1/2} (W D-symmetric).
struct WeightedSpectrum {
    double min = 0.0;
    double max = 0.0;
};
[[nodiscard]] WeightedSpectrum weighted_spectrum(const Mode2x2& w, double lambda);

// G u over the span of u, ending at u.end(). Trapezoid rule per interval,
// using the right limit at the left end and the left limit at the right end.
[[nodiscard]] StateZ controllability_map(const ControlSignal& u, const ModelParams& p);

// (Gamma xi)(t) = B* S*(T-t) W^{-1} xi on the Gramian set's control grid.
// Throws NumericalError naming the mode if cond(W_n) > condition_limit.
[[nodiscard]] ControlSignal gamma(const StateZ& xi, const GramianSet& gs, const ModelParams& p);

struct GammaNorm {
    double value = 0.0;
    double step = 0.0;
};
// sup over a uniform grid on [t0, T] of ||B* S*(T-s) W^{-1}||, maximised over
// modes. step <= 0 selects (T - t0)/2000.
[[nodiscard]] GammaNorm gamma_norm(const GramianSet& gs, const ModelParams& p, double step = 0.0);

// Minimum-energy control steering z0 at gs.start() to zstar at gs.end().
[[nodiscard]] ControlSignal steering_control(const StateZ& z0, const StateZ& zstar, const GramianSet& gs,
                                             const ModelParams& p);
[[nodiscard]] ControlSignal steering_control(const StateZ& z0, const StateZ& zstar, double t0, double T,
                                             const ModelParams& p, double control_step);

// S(T - t0) z0 + G u for the unperturbed linear system.
[[nodiscard]] StateZ linear_terminal_state(const StateZ& z0, const ControlSignal& u, const ModelParams& p);

}  // namespace beamctl
