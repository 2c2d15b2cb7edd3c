#include "beamctl/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "beamctl/errors.hpp"

namespace beamctl {

double ContractionReport::recompute_C() const {
    return M * L_q * static_cast<double>(q) + M * horizon * l + M * N_imp;
}

double ContractionReport::recompute_lhs() const {
    return M * L_q * static_cast<double>(q) + M * horizon * B_norm * gamma_norm * recompute_C() + M * horizon * l +
           M * N_imp;
}

ContractionReport contraction_constants(const ProblemSpec& spec, EstimationGrids grids) {
    const ModelParams& p = spec.model;
    p.validate();
    ContractionReport r;
    const NormBound mb = operator_norm_bound(p, grids.semigroup_step);
    r.M = mb.value;
    r.M_step = mb.step;
    const GramianSet gs(p, 0.0, p.horizon, spec.time_step(), GramianRule::simpson);
    const GammaNorm gn = gamma_norm(gs, p, grids.gamma_step);
    r.gamma_norm = gn.value;
    r.gamma_step = gn.step;
    r.horizon = p.horizon;
    r.l = spec.effective_lipschitz();
    r.l_restoring = spec.restoring_lipschitz();
    r.L_q = spec.nonlocal_lipschitz();
    r.q = spec.nonlocal_count();
    r.N_imp = spec.impulse_lipschitz_sum();
    r.C = r.recompute_C();
    r.lhs = r.recompute_lhs();
    r.satisfied = r.lhs < 1.0;
    return r;
}

void write_report(std::ostream& out, const ContractionReport& r) {
    out << "M = " << format_number(r.M) << '\n'
        << "M_grid_step = " << format_number(r.M_step) << '\n'
        << "B_norm = " << format_number(r.B_norm) << '\n'
        << "Gamma_norm = " << format_number(r.gamma_norm) << '\n'
        << "Gamma_grid_step = " << format_number(r.gamma_step) << '\n'
        << "T = " << format_number(r.horizon) << '\n'
        << "l = " << format_number(r.l) << '\n'
        << "l_restoring = " << format_number(r.l_restoring) << '\n'
        << "L_q = " << format_number(r.L_q) << '\n'
        << "q = " << r.q << '\n'
        << "N_imp = " << format_number(r.N_imp) << '\n'
        << "C = " << format_number(r.C) << '\n'
        << "lhs = " << format_number(r.lhs) << '\n'
        << "satisfied = " << (r.satisfied ? "true" : "false") << '\n';
}

// ---------------------------------------------------------------------------

namespace {

double sigma_limit(const ProblemSpec& spec) {
    const double T = spec.model.horizon;
    const double tm = spec.impulses.empty() ? 0.0 : spec.impulses.back().time;
    return std::min(T - tm, spec.model.delay);
}

}  // namespace

std::vector<double> default_sigmas(const ProblemSpec& spec) {
    const double h = spec.time_step();
    const double limit = sigma_limit(spec);
    std::vector<double> out;
    for (double f : {0.2, 0.1, 0.05, 0.025}) {
        const double steps = std::floor(f * limit / h + 1e-9);
        if (steps < 1.0) {
            throw ConfigError("experiment.sigmas", "time step too coarse for the default sigma schedule");
        }
        out.push_back(steps * h);
    }
    return out;
}

ControlSignal pullback_control(const ControlSignal& u, const Trajectory& traj, double sigma, const StateZ& zstar,
                               const ProblemSpec& spec) {
    const double T = spec.model.horizon;
    const double limit = sigma_limit(spec);
    if (!(sigma > 0.0 && sigma < limit)) {
        throw std::invalid_argument("pullback_control: sigma = " + format_number(sigma) +
                                    " must satisfy 0 < sigma < min(T - t_m, r) = " + format_number(limit));
    }
    const double h = u.step();
    const double switch_time = T - sigma;
    const double pos = (switch_time - u.start()) / h;
    if (std::abs(pos - std::round(pos)) > 1e-6 || std::abs(u.end() - T) > 1e-6 * h) {
        throw std::invalid_argument("pullback_control: T - sigma must be a node of the control grid on [0, T]");
    }
    const auto m = static_cast<std::size_t>(std::round(pos));
    const StateZ z_switch = traj.value(traj.index_of(switch_time));
    const GramianSet gs(spec.model, switch_time, T, h);
    const ControlSignal tail = steering_control(z_switch, zstar, gs, spec.model);

    std::vector<ModalCoeffs> values(u.values().begin(), u.values().begin() + static_cast<std::ptrdiff_t>(m + 1));
    for (std::size_t j = 1; j < tail.nodes(); ++j) values.push_back(tail.left(j));
    ControlSignal out(u.start(), h, std::move(values));
    for (const auto& [i, v] : u.jumps()) {
        if (i < m) out.set_right(i, v);
    }
    out.set_right(m, tail.left(0));
    return out;
}

ApproxResult approx_experiment(const ProblemSpec& spec, const ControlSignal& u, const StateZ& zstar,
                               std::vector<double> sigmas) {
    if (sigmas.empty()) sigmas = default_sigmas(spec);
    for (std::size_t i = 1; i < sigmas.size(); ++i) {
        if (!(sigmas[i] < sigmas[i - 1])) throw ConfigError("experiment.sigmas", "sigmas must be decreasing");
    }
    const ModelParams& p = spec.model;
    const double T = p.horizon;
    const double r = p.delay;
    const ForceModel forces(spec);

    ApproxResult out;
    out.M = operator_norm_bound(p).value;
    out.alpha = spec.growth_alpha();
    out.beta = spec.growth_beta();
    const Envelope env = spec.growth_envelope();

    const MildSolution nominal = integrate_mild(spec, u);
    const Trajectory& z = nominal.trajectory;
    out.nominal_terminal_error = norm_z(z.terminal() - zstar);
    const std::size_t origin = z.origin_index();

    for (double sigma : sigmas) {
        const ControlSignal us = pullback_control(u, z, sigma, zstar, spec);
        const Trajectory zs = integrate_mild(spec, us).trajectory;
        ApproxRow row;
        row.sigma = sigma;
        row.terminal_error = norm_z(zs.terminal() - zstar);

        const std::size_t first = zs.index_of(T - sigma);
        const std::size_t last = zs.nodes() - 1;
        const std::size_t lag = uniform_intervals(r, zs.step());
        for (std::size_t i = 0; i <= first; ++i) {
            row.locality_defect = std::max(row.locality_defect, norm_z(zs.value(i) - z.value(i)));
            row.locality_defect = std::max(row.locality_defect, norm_z(zs.left(i) - z.left(i)));
        }
        double integral = 0.0;
        double prev = 0.0;
        for (std::size_t i = first; i <= last; ++i) {
            const std::size_t d = i - lag;
            row.delay_identity_defect = std::max(row.delay_identity_defect, norm_z(zs.value(d) - z.value(d)));
            const double s = zs.time(i);
            const double integrand =
                semigroup_norm(T - s, p) * (out.alpha * apply_envelope(env, norm_z(zs.value(d))) + out.beta);
            if (i > first) integral += 0.5 * zs.step() * (prev + integrand);
            prev = integrand;

            const std::size_t ui = i - origin;
            const ModalCoeffs& uval = i == last ? us.left(ui) : us.right(ui);
            const ModalCoeffs f = forces.velocity_source(s, zs.value(i).w, zs.value(d),
                                                         spec.nonlinearity.depends_on_control() ? &uval : nullptr);
            row.tail_force_sup = std::max(row.tail_force_sup, f.norm());
        }
        row.bound_estimate = integral;
        out.rows.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------

StateZ L_operator(const Trajectory& y, const StateZ& zstar, const ProblemSpec& spec) {
    const double h = spec.time_step();
    const ControlSignal zero = ControlSignal::zero(0.0, spec.model.horizon, h, spec.modes());
    return zstar - propagate_frozen(spec, zero, y).terminal();
}

ExactResult exact_fixed_point(const ProblemSpec& spec, const StateZ& zstar, double tol, int max_iter) {
    if (spec.nonlinearity.depends_on_control()) {
        throw ConfigError("nonlinearity.catalog", "exact controllability needs a nonlinearity independent of u");
    }
    if (!(tol > 0.0)) throw ConfigError("experiment.tol", "must be positive");
    if (max_iter < 1) throw ConfigError("experiment.max_iter", "must be >= 1");
    const ModelParams& p = spec.model;
    const double h = spec.time_step();
    const GramianSet gs(p, 0.0, p.horizon, h);

    ExactResult out;
    out.report = contraction_constants(spec);

    const ControlSignal zero = ControlSignal::zero(0.0, p.horizon, h, spec.modes());
    Trajectory y = integrate_mild(spec, zero).trajectory;
    auto kappa = [&](const Trajectory& prev, ControlSignal& control) {
        control = gamma(L_operator(prev, zstar, spec), gs, p);
        return propagate_frozen(spec, control, prev);
    };

    double last_diff = std::numeric_limits<double>::quiet_NaN();
    int rising = 0;
    for (int iter = 1;; ++iter) {
        ControlSignal control;
        Trajectory next = kappa(y, control);
        const double diff = next.sup_distance(y);
        const double ratio = iter == 1 ? std::numeric_limits<double>::quiet_NaN() : diff / last_diff;
        out.log.push_back({iter, diff, ratio});
        y = std::move(next);
        out.control = std::move(control);
        if (diff <= tol) break;
        rising = ratio > 1.0 ? rising + 1 : 0;
        if (rising >= 3) {
            throw NumericalError("exact_fixed_point: iteration diverges (successive-difference ratio " +
                                 format_number(ratio) + " > 1 for 3 consecutive iterations)");
        }
        if (iter >= max_iter) {
            throw NumericalError("exact_fixed_point: no convergence in " + std::to_string(max_iter) +
                                 " iterations (last change " + format_number(diff) + ", ratio " +
                                 format_number(ratio) + ")");
        }
        last_diff = diff;
    }

    ControlSignal control;
    const Trajectory check = kappa(y, control);
    out.fixed_point_residual = check.sup_distance(y);
    out.trajectory = std::move(y);
    out.terminal_error = norm_z(out.trajectory.terminal() - zstar);
    out.mild_terminal_error = norm_z(integrate_mild(spec, out.control).trajectory.terminal() - zstar);
    return out;
}

}  // namespace beamctl
