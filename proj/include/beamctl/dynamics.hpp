#pragma once

// Mild solutions of the damped beam with cable nonlinearity -k w^+, forcing,
// a delayed perturbation f, impulsive velocity kicks at prescribed times and
// a nonlocal history condition z(s) + G(z_tau1, ..., z_tauq)(s) = rho(s).
//
// Time stepping is an exponential trapezoid rule: z(t+h) = S(h)(z(t) +
// h/2 g(t)) + h/2 g(t+h), where g = B u + F collects every source term. The
// linear part is propagated exactly by the closed-form group, so the stiff
// n^4 pi^4 scale imposes no step restriction. The control contribution is
// exactly the trapezoid controllability map, which is what lets the steering
// controls of the controllability module land on target.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beamctl/controllability.hpp"
#include "beamctl/semigroup.hpp"
#include "beamctl/spectral.hpp"

namespace beamctl {

// Uniformly sampled map t -> StateZ with optional left limits at marked nodes.
// Node values are right limits; interpolation is piecewise linear.
class SampledPath {
public:
    SampledPath() = default;
    SampledPath(double start, double step, std::vector<StateZ> values);

    [[nodiscard]] std::size_t nodes() const noexcept { return values_.size(); }
    [[nodiscard]] std::size_t modes() const noexcept { return values_.empty() ? 0 : values_.front().modes(); }
    [[nodiscard]] double start() const noexcept { return start_; }
    [[nodiscard]] double step() const noexcept { return step_; }
    [[nodiscard]] double end() const noexcept { return time(nodes() - 1); }
    [[nodiscard]] double time(std::size_t i) const noexcept { return start_ + step_ * static_cast<double>(i); }

    [[nodiscard]] const StateZ& value(std::size_t i) const { return values_.at(i); }
    [[nodiscard]] StateZ& value(std::size_t i) { return values_.at(i); }
    [[nodiscard]] const StateZ& left(std::size_t i) const;
    [[nodiscard]] bool marked(std::size_t i) const { return left_.contains(i); }
    [[nodiscard]] const std::map<std::size_t, StateZ>& marks() const noexcept { return left_; }
    void set_left(std::size_t i, StateZ v);
    void clear_mark(std::size_t i) { left_.erase(i); }

    // Node index for a time lying on the grid (within 1e-6 steps); throws
    // std::out_of_range otherwise.
    [[nodiscard]] std::size_t index_of(double t) const;
    [[nodiscard]] bool on_grid(double t) const;

    // Right-continuous linear interpolation.
    [[nodiscard]] StateZ at(double t) const;
    // Left-continuous linear interpolation (uses left limits at marked nodes).
    [[nodiscard]] StateZ left_at(double t) const;

    // max over nodes (left limits included) of the Z_{1/2} norm
    [[nodiscard]] double sup_norm() const;
    [[nodiscard]] double sup_distance(const SampledPath& other) const;

private:
    [[nodiscard]] StateZ interpolate(double t, bool from_left) const;

    double start_ = 0.0;
    double step_ = 0.0;
    std::vector<StateZ> values_;
    std::map<std::size_t, StateZ> left_;
};

// Element of PC_r: a path on [-r, 0].
class Segment : public SampledPath {
public:
    Segment() = default;
    Segment(double span, double step, std::vector<StateZ> values);
    [[nodiscard]] static Segment constant(double span, double step, const StateZ& value);

    [[nodiscard]] double span() const noexcept { return -start(); }
    // Value at s = 0 and s = -r.
    [[nodiscard]] const StateZ& current() const { return value(nodes() - 1); }
    [[nodiscard]] const StateZ& oldest() const { return value(0); }
};

// Mild solution record on [-r, T]; impulse nodes carry both limits.
class Trajectory : public SampledPath {
public:
    Trajectory() = default;
    Trajectory(double delay, double horizon, double step, std::size_t modes);

    [[nodiscard]] double delay() const noexcept { return -start(); }
    [[nodiscard]] double horizon() const noexcept { return end(); }
    [[nodiscard]] std::size_t origin_index() const noexcept { return origin_; }
    [[nodiscard]] const StateZ& terminal() const { return value(nodes() - 1); }

private:
    std::size_t origin_ = 0;
};

// --- problem description ---------------------------------------------------

// p(t, x) = amplitude * cos(omega t + phase) * g(x)
struct ForcingSpec {
    enum class Kind { zero, standing_wave, uniform };
    Kind kind = Kind::zero;
    double amplitude = 0.0;
    double omega = 0.0;
    double phase = 0.0;
    int mode = 1;  // standing_wave: g(x) = sin(mode pi x)
};

// Growth envelope H used in ||F(t, phi, u)|| <= alpha H(||phi(-r)||) + beta.
enum class Envelope { zero, identity, square };
[[nodiscard]] double apply_envelope(Envelope e, double x);

// The perturbation f(t, phi, u), evaluated pointwise on the collocation grid.
//   zero
//   delayed_saturating:  f = gain * tanh(w(t - r, x))
//   bounded_control:     f = gain * tanh(u(t, x) + w(t - r, x))   (needs u)
// Declared constants may only loosen the implied ones.
struct NonlinearitySpec {
    enum class Kind { zero, delayed_saturating, bounded_control };
    Kind kind = Kind::zero;
    double gain = 0.0;
    std::optional<double> lipschitz;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<Envelope> envelope;

    [[nodiscard]] bool depends_on_control() const noexcept { return kind == Kind::bounded_control; }
};

// Velocity jump J_k(t_k, z) = (0, I_k(z)):
//   kick:       I = offset + gain * y
//   saturating: I = offset + gain * tanh(y(x))
struct ImpulseSpec {
    enum class Kind { kick, saturating };
    double time = 0.0;
    Kind kind = Kind::kick;
    ModalCoeffs offset;  // empty means zero
    double gain = 0.0;
    std::optional<double> lipschitz;  // declared d_k
};

// G(phi_1..phi_q) = sum_j weight_j phi_j, on both components.
struct NonlocalSpec {
    std::vector<double> lags;
    std::vector<double> weights;
    std::optional<double> lipschitz;  // declared L_q
    [[nodiscard]] bool active() const;
};

struct ProblemSpec {
    ModelParams model;
    double step = 0.0;              // h; <= 0 selects T/2000
    std::size_t grid_points = 0;    // G; 0 selects 8N + 1
    double picard_tol = 1e-10;
    int picard_max_iter = 50;
    ForcingSpec forcing;
    NonlinearitySpec nonlinearity;
    std::vector<ImpulseSpec> impulses;
    NonlocalSpec nonlocal;
    Segment history;  // rho on [-r, 0]; empty means rho = 0

    // Applies defaults, snaps impulse times and lags to the time grid and
    // re-validates. Throws ConfigError on violations.
    void finalize();
    void validate() const;

    [[nodiscard]] double time_step() const;
    [[nodiscard]] std::size_t modes() const { return static_cast<std::size_t>(model.modes); }

    // Lipschitz and growth constants. The restoring term contributes k/pi^2
    // because ||w^+ - v^+|| <= ||w - v|| <= lambda_1^{-1/2} ||w - v||_{1/2}.
    [[nodiscard]] double restoring_lipschitz() const;
    [[nodiscard]] double perturbation_lipschitz() const;
    [[nodiscard]] double effective_lipschitz() const;
    [[nodiscard]] double nonlocal_lipschitz() const;
    [[nodiscard]] std::size_t nonlocal_count() const { return nonlocal.lags.size(); }
    [[nodiscard]] double impulse_lipschitz(std::size_t k) const;
    [[nodiscard]] double impulse_lipschitz_sum() const;
    // Envelope for p + f (the restoring term is state-dependent and excluded).
    [[nodiscard]] double growth_alpha() const;
    [[nodiscard]] double growth_beta() const;
    [[nodiscard]] Envelope growth_envelope() const;
    [[nodiscard]] double forcing_bound() const;
};

// Cached evaluation of the source terms for one problem.
class ForceModel {
public:
    explicit ForceModel(const ProblemSpec& spec);

    [[nodiscard]] const SineBasis& basis() const noexcept { return basis_; }
    [[nodiscard]] ModalCoeffs forcing(double t) const;
    // Velocity component of F: p(t) - k w^+ + f(t, delayed, u).
    [[nodiscard]] ModalCoeffs velocity_source(double t, const ModalCoeffs& current_w, const StateZ& delayed,
                                              const ModalCoeffs* control) const;
    [[nodiscard]] ModalCoeffs perturbation(const StateZ& delayed, const ModalCoeffs* control) const;
    [[nodiscard]] ModalCoeffs restoring(const ModalCoeffs& current_w) const;
    [[nodiscard]] StateZ impulse(std::size_t k, const StateZ& before) const;

private:
    ModelParams model_;
    ForcingSpec forcing_;
    NonlinearitySpec nonlinearity_;
    std::vector<ImpulseSpec> impulses_;
    SineBasis basis_;
    ModalCoeffs forcing_profile_;
    std::vector<ModalCoeffs> offsets_;
};

// F(t, seg, u) = (0, p(t) - k seg(0).w^+ + f(t, seg, u)). `control` may be
// null when f does not depend on u; otherwise std::invalid_argument.
[[nodiscard]] StateZ evaluate_F(double t, const Segment& seg, const ModalCoeffs* control, const ProblemSpec& spec);

// Node-wise sum_j weight_j segs[j]; all segments must share one grid.
[[nodiscard]] Segment evaluate_nonlocal(std::span<const Segment> segs, const ProblemSpec& spec);

// Window z(t + s), s in [-r, 0]. Marks are preserved when t is a grid node;
// otherwise values are interpolated from the right.
[[nodiscard]] Segment segment_at(const Trajectory& traj, double t);

struct MildSolution {
    Trajectory trajectory;
    int picard_iterations = 0;
    std::vector<double> picard_changes;  // sup-norm change per iteration
    double history_residual = 0.0;       // max_s ||z(s) + G(z_tau)(s) - rho(s)||
};

// Mild solution under control u (on [0, T] with the spec's step), resolving
// the nonlocal condition by Picard iteration over whole trajectories.
[[nodiscard]] MildSolution integrate_mild(const ProblemSpec& spec, const ControlSignal& u);

// One evaluation of the mild-solution right-hand side with every nonlinear
// term (history map, F, impulses) read from `frozen` instead of from the
// trajectory being computed. Its fixed points are mild solutions.
[[nodiscard]] Trajectory propagate_frozen(const ProblemSpec& spec, const ControlSignal& u, const Trajectory& frozen);

// rho - G(z_tau1, ..., z_tauq) sampled on the trajectory's [-r, 0] nodes.
[[nodiscard]] Segment resolved_history(const ProblemSpec& spec, const Trajectory& z);
[[nodiscard]] double history_residual(const ProblemSpec& spec, const Trajectory& z);

// CSV with header t,w_1..w_N,y_1..y_N,norm_z; marked nodes are written twice
// (left limit, then right limit); 17 significant digits.
void write_trajectory_csv(std::ostream& out, const SampledPath& path);
// Reads the format above back into a path starting at the first row's time.
[[nodiscard]] SampledPath read_path_csv(std::istream& in);

// "%.17g"
[[nodiscard]] std::string format_number(double v);

}  // namespace beamctl
