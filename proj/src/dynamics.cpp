#include "beamctl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "beamctl/errors.hpp"

namespace beamctl {

namespace {
constexpr double kGridTolerance = 1e-6;  // in units of the step

double inv_sqrt_lambda1() { return 1.0 / std::sqrt(eigenvalue(1)); }
}  // namespace

// ---------------------------------------------------------------------------
// SampledPath

SampledPath::SampledPath(double start, double step, std::vector<StateZ> values)
    : start_(start), step_(step), values_(std::move(values)) {
    if (!(step_ > 0.0)) throw std::invalid_argument("SampledPath: step must be positive");
    if (values_.size() < 2) throw std::invalid_argument("SampledPath: need at least two nodes");
    for (const auto& v : values_) {
        if (v.modes() != values_.front().modes()) throw std::invalid_argument("SampledPath: ragged mode counts");
    }
}

const StateZ& SampledPath::left(std::size_t i) const {
    if (auto it = left_.find(i); it != left_.end()) return it->second;
    return values_.at(i);
}

void SampledPath::set_left(std::size_t i, StateZ v) {
    if (i >= nodes()) throw std::out_of_range("SampledPath::set_left: node out of range");
    if (v.modes() != modes()) throw std::invalid_argument("SampledPath::set_left: mode count mismatch");
    left_[i] = std::move(v);
}

bool SampledPath::on_grid(double t) const {
    const double pos = (t - start_) / step_;
    const double r = std::round(pos);
    return r >= 0.0 && r <= static_cast<double>(nodes() - 1) && std::abs(pos - r) <= kGridTolerance;
}

std::size_t SampledPath::index_of(double t) const {
    if (!on_grid(t)) {
        throw std::out_of_range("time " + format_number(t) + " is not a node of the grid starting at " +
                                format_number(start_) + " with step " + format_number(step_));
    }
    return static_cast<std::size_t>(std::round((t - start_) / step_));
}

StateZ SampledPath::interpolate(double t, bool from_left) const {
    const double pos = (t - start_) / step_;
    const double last = static_cast<double>(nodes() - 1);
    if (pos < -kGridTolerance || pos > last + kGridTolerance) {
        throw std::out_of_range("time " + format_number(t) + " outside [" + format_number(start_) + ", " +
                                format_number(end()) + "]");
    }
    const double r = std::round(pos);
    if (std::abs(pos - r) <= 1e-12 * std::max(1.0, last)) {
        const auto i = static_cast<std::size_t>(r);
        return from_left ? left(i) : value(i);
    }
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    StateZ out = value(i);
    out *= (1.0 - frac);
    out.axpy(frac, left(i + 1));
    return out;
}

StateZ SampledPath::at(double t) const { return interpolate(t, false); }
StateZ SampledPath::left_at(double t) const { return interpolate(t, true); }

double SampledPath::sup_norm() const {
    double best = 0.0;
    for (const auto& v : values_) best = std::max(best, norm_z(v));
    for (const auto& [i, v] : left_) best = std::max(best, norm_z(v));
    return best;
}

double SampledPath::sup_distance(const SampledPath& other) const {
    if (other.nodes() != nodes() || other.modes() != modes()) {
        throw std::invalid_argument("sup_distance: paths live on different grids");
    }
    double best = 0.0;
    for (std::size_t i = 0; i < nodes(); ++i) {
        best = std::max(best, norm_z(value(i) - other.value(i)));
        if (marked(i) || other.marked(i)) best = std::max(best, norm_z(left(i) - other.left(i)));
    }
    return best;
}

Segment::Segment(double span, double step, std::vector<StateZ> values) : SampledPath(-span, step, std::move(values)) {
    if (std::abs(end()) > kGridTolerance * step) {
        throw std::invalid_argument("Segment: grid must cover exactly [-r, 0]");
    }
}

Segment Segment::constant(double span, double step, const StateZ& value) {
    const std::size_t n = uniform_intervals(span, step);
    return Segment(span, span / static_cast<double>(n), std::vector<StateZ>(n + 1, value));
}

namespace {
std::vector<StateZ> zero_states(std::size_t count, std::size_t modes) {
    return std::vector<StateZ>(count, StateZ(modes));
}
}  // namespace

Trajectory::Trajectory(double delay, double horizon, double step, std::size_t modes)
    : SampledPath(-delay, step, zero_states(uniform_intervals(delay + horizon, step) + 1, modes)),
      origin_(uniform_intervals(delay, step)) {
    if (std::abs(time(origin_)) > kGridTolerance * step) {
        throw std::invalid_argument("Trajectory: t = 0 is not a grid node");
    }
}

// ---------------------------------------------------------------------------
// Problem description

double apply_envelope(Envelope e, double x) {
    switch (e) {
        case Envelope::zero: return 0.0;
        case Envelope::identity: return x;
        case Envelope::square: return x * x;
    }
    return 0.0;
}

bool NonlocalSpec::active() const {
    return std::any_of(weights.begin(), weights.end(), [](double g) { return g != 0.0; });
}

double ProblemSpec::time_step() const { return step > 0.0 ? step : model.horizon / 2000.0; }

double ProblemSpec::restoring_lipschitz() const { return model.cable * inv_sqrt_lambda1(); }

namespace {
double implied_perturbation_lipschitz(const NonlinearitySpec& f) {
    switch (f.kind) {
        case NonlinearitySpec::Kind::zero: return 0.0;
        case NonlinearitySpec::Kind::delayed_saturating:
        case NonlinearitySpec::Kind::bounded_control: return std::abs(f.gain) * inv_sqrt_lambda1();
    }
    return 0.0;
}

struct Growth {
    double alpha = 0.0;
    double beta = 0.0;
    Envelope envelope = Envelope::zero;
};

Growth implied_growth(const NonlinearitySpec& f) {
    switch (f.kind) {
        case NonlinearitySpec::Kind::zero: return {};
        case NonlinearitySpec::Kind::delayed_saturating:
            return {std::abs(f.gain) * inv_sqrt_lambda1(), 0.0, Envelope::identity};
        case NonlinearitySpec::Kind::bounded_control: return {0.0, std::abs(f.gain), Envelope::zero};
    }
    return {};
}

double implied_impulse_lipschitz(const ImpulseSpec& imp) { return std::abs(imp.gain); }

ModalCoeffs forcing_profile(const ForcingSpec& f, const SineBasis& basis) {
    std::vector<double> g(basis.grid().points(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = basis.grid().node(i);
        switch (f.kind) {
            case ForcingSpec::Kind::zero: g[i] = 0.0; break;
            case ForcingSpec::Kind::standing_wave: g[i] = std::sin(std::numbers::pi * f.mode * x); break;
            case ForcingSpec::Kind::uniform: g[i] = 1.0; break;
        }
    }
    return basis.project(g);
}

std::size_t resolved_grid_points(const ProblemSpec& s) {
    return s.grid_points > 0 ? s.grid_points : 8 * s.modes() + 1;
}
}  // namespace

double ProblemSpec::perturbation_lipschitz() const {
    return nonlinearity.lipschitz.value_or(implied_perturbation_lipschitz(nonlinearity));
}

double ProblemSpec::effective_lipschitz() const { return restoring_lipschitz() + perturbation_lipschitz(); }

double ProblemSpec::nonlocal_lipschitz() const {
    double best = 0.0;
    for (double g : nonlocal.weights) best = std::max(best, std::abs(g));
    return nonlocal.lipschitz.value_or(best);
}

double ProblemSpec::impulse_lipschitz(std::size_t k) const {
    const ImpulseSpec& imp = impulses.at(k);
    return imp.lipschitz.value_or(implied_impulse_lipschitz(imp));
}

double ProblemSpec::impulse_lipschitz_sum() const {
    double acc = 0.0;
    for (std::size_t k = 0; k < impulses.size(); ++k) acc += impulse_lipschitz(k);
    return acc;
}

double ProblemSpec::growth_alpha() const { return nonlinearity.alpha.value_or(implied_growth(nonlinearity).alpha); }

double ProblemSpec::growth_beta() const {
    return nonlinearity.beta.value_or(implied_growth(nonlinearity).beta + forcing_bound());
}

Envelope ProblemSpec::growth_envelope() const {
    return nonlinearity.envelope.value_or(implied_growth(nonlinearity).envelope);
}

double ProblemSpec::forcing_bound() const {
    if (forcing.kind == ForcingSpec::Kind::zero || forcing.amplitude == 0.0) return 0.0;
    const SineBasis basis(SpatialGrid(resolved_grid_points(*this)), modes());
    return std::abs(forcing.amplitude) * forcing_profile(forcing, basis).norm();
}

void ProblemSpec::finalize() {
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("model", e.what());
    }
    const double h = time_step();
    step = h;
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("grids.h", "time step must be positive");
    try {
        (void)uniform_intervals(model.horizon, h);
    } catch (const std::invalid_argument&) {
        throw ConfigError("grids.h", "horizon T = " + format_number(model.horizon) +
                                         " is not an integer multiple of h = " + format_number(h));
    }
    try {
        (void)uniform_intervals(model.delay, h);
    } catch (const std::invalid_argument&) {
        throw ConfigError("grids.h", "delay span r = " + format_number(model.delay) +
                                         " is not an integer multiple of h = " + format_number(h));
    }
    if (model.delay < 2.0 * h * (1.0 - 1e-12)) throw ConfigError("grids.h", "delay span r must cover >= 2 steps");

    grid_points = resolved_grid_points(*this);

    auto snap = [h](double t, const std::string& path) {
        const double snapped = std::round(t / h) * h;
        if (std::abs(snapped - t) > 0.5 * h) {
            throw ConfigError(path, "time " + format_number(t) + " is not within h/2 of a grid node");
        }
        return snapped;
    };
    for (std::size_t k = 0; k < impulses.size(); ++k) {
        impulses[k].time = snap(impulses[k].time, "impulses[" + std::to_string(k) + "].time");
    }
    for (std::size_t j = 0; j < nonlocal.lags.size(); ++j) {
        nonlocal.lags[j] = snap(nonlocal.lags[j], "delays.tau[" + std::to_string(j) + "]");
    }
    for (auto& imp : impulses) {
        if (imp.offset.size() == 0) imp.offset = ModalCoeffs(modes());
    }
    validate();
}

void ProblemSpec::validate() const {
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("model", e.what());
    }
    const double h = time_step();
    const std::size_t g = resolved_grid_points(*this);
    if (g < SpatialGrid::minimum_points(modes())) {
        throw ConfigError("grids.G", "collocation grid needs G >= 2N+1 = " +
                                         std::to_string(SpatialGrid::minimum_points(modes())));
    }
    if (!(picard_tol > 0.0)) throw ConfigError("experiment.picard_tol", "must be positive");
    if (picard_max_iter < 1) throw ConfigError("experiment.picard_max_iter", "must be >= 1");

    for (std::size_t k = 0; k < impulses.size(); ++k) {
        const std::string path = "impulses[" + std::to_string(k) + "]";
        const ImpulseSpec& imp = impulses[k];
        if (!(imp.time > 0.0 && imp.time < model.horizon)) {
            throw ConfigError(path + ".time", "impulse times must satisfy 0 < t_1 < ... < t_m < T");
        }
        if (k > 0 && !(imp.time > impulses[k - 1].time + 0.5 * h)) {
            throw ConfigError(path + ".time", "impulse times must satisfy 0 < t_1 < ... < t_m < T");
        }
        if (imp.offset.size() != 0 && imp.offset.size() != modes()) {
            throw ConfigError(path + ".offset", "expected " + std::to_string(modes()) + " modal coefficients");
        }
        if (imp.lipschitz && *imp.lipschitz < implied_impulse_lipschitz(imp) - 1e-15) {
            throw ConfigError(path + ".d_k", "declared Lipschitz constant is below the catalog value " +
                                               format_number(implied_impulse_lipschitz(imp)));
        }
    }

    if (nonlocal.lags.size() != nonlocal.weights.size()) {
        throw ConfigError("nonlocal.gamma", "delays.tau and nonlocal.gamma must have the same length");
    }
    for (std::size_t j = 0; j < nonlocal.lags.size(); ++j) {
        const double tau = nonlocal.lags[j];
        const bool ok = tau > 0.0 && tau < model.delay - 0.5 * h && (j == 0 || tau > nonlocal.lags[j - 1] + 0.5 * h);
        if (!ok) {
            throw ConfigError("delays.tau[" + std::to_string(j) + "]",
                              "lags must satisfy 0 < tau_1 < ... < tau_q < r");
        }
    }

    if (nonlocal.lipschitz) {
        double implied_lq = 0.0;
        for (double g : nonlocal.weights) implied_lq = std::max(implied_lq, std::abs(g));
        if (*nonlocal.lipschitz < implied_lq - 1e-15) {
            throw ConfigError("nonlocal.L_q", "declared Lipschitz constant is below max |gamma_j| = " +
                                                  format_number(implied_lq));
        }
    }

    const Growth implied = implied_growth(nonlinearity);
    if (nonlinearity.lipschitz && *nonlinearity.lipschitz < implied_perturbation_lipschitz(nonlinearity) - 1e-15) {
        throw ConfigError("nonlinearity.l_f", "declared Lipschitz constant is below the catalog value " +
                                                  format_number(implied_perturbation_lipschitz(nonlinearity)));
    }
    const bool same_envelope = !nonlinearity.envelope || *nonlinearity.envelope == implied.envelope;
    if (same_envelope && nonlinearity.alpha && *nonlinearity.alpha < implied.alpha - 1e-15) {
        throw ConfigError("nonlinearity.alpha1", "declared growth constant is below the catalog value " +
                                                     format_number(implied.alpha));
    }
    if (nonlinearity.beta && *nonlinearity.beta < implied.beta + forcing_bound() - 1e-15) {
        throw ConfigError("nonlinearity.beta1", "declared growth constant is below the catalog value " +
                                                    format_number(implied.beta + forcing_bound()));
    }

    if (history.nodes() > 0) {
        if (history.modes() != modes()) {
            throw ConfigError("history", "history has " + std::to_string(history.modes()) + " modes, model has " +
                                             std::to_string(modes()));
        }
        if (std::abs(history.span() - model.delay) > kGridTolerance * history.step()) {
            throw ConfigError("history", "history must cover exactly [-r, 0]");
        }
    }
}

// ---------------------------------------------------------------------------
// Source terms

ForceModel::ForceModel(const ProblemSpec& spec)
    : model_(spec.model),
      forcing_(spec.forcing),
      nonlinearity_(spec.nonlinearity),
      impulses_(spec.impulses),
      basis_(SpatialGrid(resolved_grid_points(spec)), spec.modes()) {
    forcing_profile_ = forcing_profile(forcing_, basis_);
    for (const auto& imp : impulses_) {
        offsets_.push_back(imp.offset.size() == 0 ? ModalCoeffs(spec.modes()) : imp.offset);
    }
}

ModalCoeffs ForceModel::forcing(double t) const {
    if (forcing_.kind == ForcingSpec::Kind::zero || forcing_.amplitude == 0.0) {
        return ModalCoeffs(basis_.modes());
    }
    return (forcing_.amplitude * std::cos(forcing_.omega * t + forcing_.phase)) * forcing_profile_;
}

ModalCoeffs ForceModel::restoring(const ModalCoeffs& current_w) const {
    return (-model_.cable) * basis_.positive_part(current_w);
}

ModalCoeffs ForceModel::perturbation(const StateZ& delayed, const ModalCoeffs* control) const {
    switch (nonlinearity_.kind) {
        case NonlinearitySpec::Kind::zero: return ModalCoeffs(basis_.modes());
        case NonlinearitySpec::Kind::delayed_saturating: {
            std::vector<double> v = basis_.reconstruct(delayed.w);
            for (double& x : v) x = std::tanh(x);
            return nonlinearity_.gain * basis_.project(v);
        }
        case NonlinearitySpec::Kind::bounded_control: {
            if (control == nullptr) {
                throw std::invalid_argument("bounded_control perturbation needs the control value");
            }
            std::vector<double> v = basis_.reconstruct(delayed.w + *control);
            for (double& x : v) x = std::tanh(x);
            return nonlinearity_.gain * basis_.project(v);
        }
    }
    return ModalCoeffs(basis_.modes());
}

ModalCoeffs ForceModel::velocity_source(double t, const ModalCoeffs& current_w, const StateZ& delayed,
                                        const ModalCoeffs* control) const {
    ModalCoeffs out = forcing(t);
    out += restoring(current_w);
    if (nonlinearity_.kind != NonlinearitySpec::Kind::zero) out += perturbation(delayed, control);
    return out;
}

StateZ ForceModel::impulse(std::size_t k, const StateZ& before) const {
    const ImpulseSpec& imp = impulses_.at(k);
    StateZ jump(basis_.modes());
    jump.y = offsets_.at(k);
    if (imp.gain != 0.0) {
        if (imp.kind == ImpulseSpec::Kind::kick) {
            jump.y.axpy(imp.gain, before.y);
        } else {
            std::vector<double> v = basis_.reconstruct(before.y);
            for (double& x : v) x = std::tanh(x);
            jump.y.axpy(imp.gain, basis_.project(v));
        }
    }
    return jump;
}

StateZ evaluate_F(double t, const Segment& seg, const ModalCoeffs* control, const ProblemSpec& spec) {
    if (seg.modes() != spec.modes()) throw std::invalid_argument("evaluate_F: segment mode count mismatch");
    if (std::abs(seg.span() - spec.model.delay) > kGridTolerance * seg.step()) {
        throw std::invalid_argument("evaluate_F: segment must cover [-r, 0]");
    }
    const ForceModel model(spec);
    StateZ out(spec.modes());
    out.y = model.velocity_source(t, seg.current().w, seg.oldest(), control);
    return out;
}

Segment evaluate_nonlocal(std::span<const Segment> segs, const ProblemSpec& spec) {
    if (segs.size() != spec.nonlocal.weights.size()) {
        throw std::invalid_argument("evaluate_nonlocal: expected " + std::to_string(spec.nonlocal.weights.size()) +
                                    " segments, got " + std::to_string(segs.size()));
    }
    if (segs.empty()) throw std::invalid_argument("evaluate_nonlocal: no segments");
    const Segment& first = segs.front();
    for (const auto& s : segs) {
        if (s.nodes() != first.nodes() || s.step() != first.step() || s.start() != first.start() ||
            s.modes() != first.modes()) {
            throw std::invalid_argument("evaluate_nonlocal: segments do not share one grid");
        }
    }
    std::vector<StateZ> values(first.nodes(), StateZ(first.modes()));
    bool any_mark = false;
    for (const auto& s : segs) any_mark = any_mark || !s.marks().empty();
    Segment out(first.span(), first.step(), std::move(values));
    for (std::size_t i = 0; i < out.nodes(); ++i) {
        bool marked = false;
        StateZ left(first.modes());
        for (std::size_t j = 0; j < segs.size(); ++j) {
            const double g = spec.nonlocal.weights[j];
            out.value(i).axpy(g, segs[j].value(i));
            if (any_mark) {
                left.axpy(g, segs[j].left(i));
                marked = marked || segs[j].marked(i);
            }
        }
        if (marked) out.set_left(i, std::move(left));
    }
    return out;
}

Segment segment_at(const Trajectory& traj, double t) {
    if (!(t >= -kGridTolerance * traj.step() && t <= traj.horizon() + kGridTolerance * traj.step())) {
        throw std::domain_error("segment_at: t = " + format_number(t) + " outside [0, T]");
    }
    const double r = traj.delay();
    const std::size_t window = uniform_intervals(r, traj.step());
    std::vector<StateZ> values;
    values.reserve(window + 1);
    if (traj.on_grid(t)) {
        const std::size_t end = traj.index_of(t);
        const std::size_t begin = end - window;
        for (std::size_t i = begin; i <= end; ++i) values.push_back(traj.value(i));
        Segment seg(r, traj.step(), std::move(values));
        for (std::size_t i = begin; i <= end; ++i) {
            if (traj.marked(i)) seg.set_left(i - begin, traj.left(i));
        }
        return seg;
    }
    for (std::size_t i = 0; i <= window; ++i) {
        values.push_back(traj.at(t - r + traj.step() * static_cast<double>(i)));
    }
    return Segment(r, traj.step(), std::move(values));
}

// ---------------------------------------------------------------------------
// Time marching

namespace {

// rho sampled on the trajectory's history nodes.
Segment sample_history(const ProblemSpec& spec, double step) {
    const double r = spec.model.delay;
    if (spec.history.nodes() == 0) return Segment::constant(r, step, StateZ(spec.modes()));
    const std::size_t n = uniform_intervals(r, step);
    std::vector<StateZ> values;
    values.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) values.push_back(spec.history.at(-r + step * static_cast<double>(i)));
    Segment out(r, step, std::move(values));
    for (const auto& [m, left] : spec.history.marks()) {
        const double s = spec.history.time(m);
        if (out.on_grid(s)) out.set_left(out.index_of(s), left);
    }
    return out;
}

std::vector<std::size_t> lag_offsets(const ProblemSpec& spec, double step) {
    std::vector<std::size_t> out;
    for (double tau : spec.nonlocal.lags) out.push_back(uniform_intervals(tau, step));
    return out;
}

void check_control(const ControlSignal& u, const ProblemSpec& spec, std::size_t intervals, double h) {
    if (u.modes() != spec.modes()) {
        throw std::invalid_argument("control has " + std::to_string(u.modes()) + " modes, model has " +
                                    std::to_string(spec.modes()));
    }
    if (std::abs(u.start()) > kGridTolerance * h || u.nodes() != intervals + 1 ||
        std::abs(u.step() - h) > 1e-9 * h) {
        throw std::invalid_argument("control must be sampled on [0, T] with the integration step");
    }
}

std::map<std::size_t, std::size_t> impulse_nodes(const ProblemSpec& spec, const Trajectory& traj) {
    std::map<std::size_t, std::size_t> out;
    for (std::size_t k = 0; k < spec.impulses.size(); ++k) {
        const double tk = spec.impulses[k].time;
        if (!traj.on_grid(tk)) {
            throw ConfigError("impulses[" + std::to_string(k) + "].time",
                              "impulse time " + format_number(tk) + " is not a grid node");
        }
        out[traj.index_of(tk)] = k;
    }
    return out;
}

// Marches the mild-solution recursion over [0, T]. History nodes come from
// `history`. Nonlinear terms read from `frozen` when given, otherwise from the
// trajectory being built.
Trajectory march(const ProblemSpec& spec, const ForceModel& forces, const ControlSignal& u, const Segment& history,
                 const Trajectory* frozen) {
    const double h = spec.time_step();
    Trajectory traj(spec.model.delay, spec.model.horizon, h, spec.modes());
    const std::size_t origin = traj.origin_index();
    const std::size_t last = traj.nodes() - 1;
    check_control(u, spec, last - origin, h);
    if (frozen && (frozen->nodes() != traj.nodes() || frozen->modes() != traj.modes())) {
        throw std::invalid_argument("frozen trajectory lives on a different grid");
    }
    if (history.nodes() != origin + 1) throw std::invalid_argument("history does not match the trajectory grid");

    for (std::size_t i = 0; i <= origin; ++i) {
        traj.value(i) = history.value(i);
        if (history.marked(i)) traj.set_left(i, history.left(i));
    }

    const auto impulses = impulse_nodes(spec, traj);
    const ModalPropagator step(spec.model, h);
    const bool needs_control = spec.nonlinearity.depends_on_control();

    for (std::size_t i = origin; i < last; ++i) {
        const std::size_t ui = i - origin;
        const double t0 = traj.time(i);
        const double t1 = traj.time(i + 1);
        const Trajectory& src = frozen ? *frozen : traj;

        // Left end: right limits everywhere.
        StateZ g0(spec.modes());
        g0.y = forces.velocity_source(t0, src.value(i).w, src.value(i - origin), needs_control ? &u.right(ui) : nullptr);
        g0.y += u.right(ui);

        StateZ z = traj.value(i);
        z.axpy(0.5 * h, g0);
        z = step.apply(z);

        // Right end: left limits. The w-component of z(t+h) does not receive
        // the h/2 g(t+h) correction (B and F only act on y), so the restoring
        // term is explicit.
        const ModalCoeffs& w_end = frozen ? frozen->left(i + 1).w : z.w;
        StateZ g1(spec.modes());
        g1.y = forces.velocity_source(t1, w_end, src.left(i + 1 - origin), needs_control ? &u.left(ui + 1) : nullptr);
        g1.y += u.left(ui + 1);
        z.axpy(0.5 * h, g1);

        if (auto it = impulses.find(i + 1); it != impulses.end()) {
            const StateZ& before = frozen ? frozen->left(i + 1) : z;
            StateZ after = z + forces.impulse(it->second, before);
            traj.set_left(i + 1, std::move(z));
            traj.value(i + 1) = std::move(after);
        } else {
            traj.value(i + 1) = std::move(z);
        }
    }
    return traj;
}

}  // namespace

Segment resolved_history(const ProblemSpec& spec, const Trajectory& z) {
    const double h = z.step();
    Segment hist = sample_history(spec, h);
    if (!spec.nonlocal.active()) return hist;
    const auto offsets = lag_offsets(spec, h);
    const auto& weights = spec.nonlocal.weights;
    for (std::size_t i = 0; i < hist.nodes(); ++i) {
        bool marked = hist.marked(i);
        for (std::size_t j = 0; j < offsets.size(); ++j) marked = marked || z.marked(i + offsets[j]);
        StateZ left = hist.left(i);
        for (std::size_t j = 0; j < offsets.size(); ++j) {
            hist.value(i).axpy(-weights[j], z.value(i + offsets[j]));
            if (marked) left.axpy(-weights[j], z.left(i + offsets[j]));
        }
        if (marked) hist.set_left(i, std::move(left));
    }
    return hist;
}

double history_residual(const ProblemSpec& spec, const Trajectory& z) {
    const Segment target = resolved_history(spec, z);
    double worst = 0.0;
    for (std::size_t i = 0; i < target.nodes(); ++i) {
        worst = std::max(worst, norm_z(z.value(i) - target.value(i)));
        if (target.marked(i) || z.marked(i)) worst = std::max(worst, norm_z(z.left(i) - target.left(i)));
    }
    return worst;
}

MildSolution integrate_mild(const ProblemSpec& spec, const ControlSignal& u) {
    spec.validate();
    const ForceModel forces(spec);
    const double h = spec.time_step();

    MildSolution out;
    Segment hist = sample_history(spec, h);
    Trajectory prev;
    for (int iter = 1;; ++iter) {
        Trajectory traj = march(spec, forces, u, hist, nullptr);
        out.picard_iterations = iter;
        if (!spec.nonlocal.active()) {
            out.trajectory = std::move(traj);
            break;
        }
        if (iter > 1) {
            const double change = traj.sup_distance(prev);
            out.picard_changes.push_back(change);
            if (change <= spec.picard_tol) {
                out.trajectory = std::move(traj);
                break;
            }
        }
        if (iter >= spec.picard_max_iter) {
            const auto& c = out.picard_changes;
            const double ratio = c.size() >= 2 ? c[c.size() - 1] / c[c.size() - 2] : std::nan("");
            throw NumericalError("integrate_mild: nonlocal Picard iteration did not converge in " +
                                 std::to_string(spec.picard_max_iter) + " iterations (last ratio " +
                                 format_number(ratio) + ")");
        }
        hist = resolved_history(spec, traj);
        prev = std::move(traj);
    }
    out.history_residual = history_residual(spec, out.trajectory);
    return out;
}

Trajectory propagate_frozen(const ProblemSpec& spec, const ControlSignal& u, const Trajectory& frozen) {
    spec.validate();
    const ForceModel forces(spec);
    return march(spec, forces, u, resolved_history(spec, frozen), &frozen);
}

// ---------------------------------------------------------------------------
// CSV

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_trajectory_csv(std::ostream& out, const SampledPath& path) {
    const std::size_t n = path.modes();
    out << "t";
    for (std::size_t k = 1; k <= n; ++k) out << ",w_" << k;
    for (std::size_t k = 1; k <= n; ++k) out << ",y_" << k;
    out << ",norm_z\n";
    auto row = [&](double t, const StateZ& z) {
        out << format_number(t);
        for (std::size_t k = 0; k < n; ++k) out << ',' << format_number(z.w[k]);
        for (std::size_t k = 0; k < n; ++k) out << ',' << format_number(z.y[k]);
        out << ',' << format_number(norm_z(z)) << '\n';
    };
    for (std::size_t i = 0; i < path.nodes(); ++i) {
        if (path.marked(i)) row(path.time(i), path.left(i));
        row(path.time(i), path.value(i));
    }
}

SampledPath read_path_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("read_path_csv: empty input");
    std::size_t columns = 1;
    for (char c : line) columns += c == ',' ? 1 : 0;
    const bool has_norm = line.find("norm_z") != std::string::npos;
    const std::size_t state_cols = columns - 1 - (has_norm ? 1 : 0);
    if (columns < 3 || state_cols % 2 != 0) throw std::invalid_argument("read_path_csv: malformed header");
    const std::size_t n = state_cols / 2;

    std::vector<double> times;
    std::vector<StateZ> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
        if (cells.size() != columns) throw std::invalid_argument("read_path_csv: row with wrong column count");
        StateZ z(n);
        for (std::size_t k = 0; k < n; ++k) {
            z.w[k] = cells[1 + k];
            z.y[k] = cells[1 + n + k];
        }
        times.push_back(cells[0]);
        rows.push_back(std::move(z));
    }
    // Collapse repeated times into (left, right) pairs.
    std::vector<double> node_times;
    std::vector<StateZ> values;
    std::map<std::size_t, StateZ> lefts;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i + 1 < rows.size() && times[i + 1] == times[i]) {
            lefts[values.size()] = rows[i];
            continue;
        }
        node_times.push_back(times[i]);
        values.push_back(rows[i]);
    }
    if (values.size() < 2) throw std::invalid_argument("read_path_csv: need at least two nodes");
    const double start = node_times.front();
    const double step = (node_times.back() - start) / static_cast<double>(node_times.size() - 1);
    for (std::size_t i = 0; i < node_times.size(); ++i) {
        if (std::abs(node_times[i] - (start + step * static_cast<double>(i))) > kGridTolerance * step) {
            throw std::invalid_argument("read_path_csv: times are not uniformly spaced");
        }
    }
    SampledPath path(start, step, std::move(values));
    for (auto& [i, v] : lefts) path.set_left(i, std::move(v));
    return path;
}

}  // namespace beamctl
