#pragma once

// The two controllability experiments on the nonlinear system: the pull-back
// construction (steer the tail (T - sigma, T] with the linear Gramian control)
// and the fixed-point iteration for exact controllability together with its
// contraction certificate.

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "beamctl/controllability.hpp"
#include "beamctl/dynamics.hpp"

namespace beamctl {

// Constants entering the contraction inequality
//   M L_q q + M T |B| |Gamma| C + M T l + M N < 1,   C = M L_q q + M T l + M N.
struct ContractionReport {
    double M = 1.0;
    double M_step = 0.0;
    double B_norm = 1.0;
    double gamma_norm = 0.0;
    double gamma_step = 0.0;
    double horizon = 0.0;
    double l = 0.0;             // effective Lipschitz constant of F, includes k / pi^2
    double l_restoring = 0.0;   // the k / pi^2 part
    double L_q = 0.0;
    std::size_t q = 0;
    double N_imp = 0.0;
    double C = 0.0;
    double lhs = 0.0;
    bool satisfied = true;

    // lhs and C recomputed from the stored parts.
    [[nodiscard]] double recompute_C() const;
    [[nodiscard]] double recompute_lhs() const;
};

// Estimation grids for M and |Gamma|; <= 0 selects T/2000. |Gamma| uses the
// continuous (Simpson) Gramian on [0, T].
struct EstimationGrids {
    double semigroup_step = 0.0;
    double gamma_step = 0.0;
};

[[nodiscard]] ContractionReport contraction_constants(const ProblemSpec& spec, EstimationGrids grids = {});

// key = value lines, one per field.
void write_report(std::ostream& out, const ContractionReport& r);

// --- approximate controllability ---------------------------------------------

// {0.2, 0.1, 0.05, 0.025} * min(T - t_m, r), each rounded down to a multiple of h.
[[nodiscard]] std::vector<double> default_sigmas(const ProblemSpec& spec);

// u on [0, T - sigma]; on (T - sigma, T] the linear steering control from
// z(T - sigma) to zstar built on the Gramian over [T - sigma, T]. The node at
// T - sigma keeps u as its left limit and takes the steering value as its
// right limit. Throws std::invalid_argument unless 0 < sigma < min(T - t_m, r)
// and T - sigma is a node of u.
[[nodiscard]] ControlSignal pullback_control(const ControlSignal& u, const Trajectory& traj, double sigma,
                                             const StateZ& zstar, const ProblemSpec& spec);

struct ApproxRow {
    double sigma = 0.0;
    double terminal_error = 0.0;
    double bound_estimate = 0.0;
    // max over s in [T - sigma, T] of |z_sigma(s - r) - z(s - r)|
    double delay_identity_defect = 0.0;
    // max over [-r, T - sigma] of |z_sigma - z|
    double locality_defect = 0.0;
    // max over tail nodes of |F(t, z_sigma,t, u_sigma(t))|, restoring term included
    double tail_force_sup = 0.0;
};

struct ApproxResult {
    std::vector<ApproxRow> rows;
    double nominal_terminal_error = 0.0;
    double M = 1.0;
    double alpha = 0.0;
    double beta = 0.0;
};

// sigmas empty selects default_sigmas(spec).
[[nodiscard]] ApproxResult approx_experiment(const ProblemSpec& spec, const ControlSignal& u, const StateZ& zstar,
                                             std::vector<double> sigmas = {});

// --- exact controllability -----------------------------------------------------

// L y = zstar - S(T){rho(0) - G(y)(0)} - int S(T-s) F(s, y_s) ds - sum S(T-t_k) J_k(y(t_k^-)),
// with the integrals discretised exactly as the time stepper does.
[[nodiscard]] StateZ L_operator(const Trajectory& y, const StateZ& zstar, const ProblemSpec& spec);

struct IterationRecord {
    int iter = 0;
    double sup_diff = 0.0;
    double ratio = 0.0;  // NaN for the first iterate
};

struct ExactResult {
    ControlSignal control;
    Trajectory trajectory;
    std::vector<IterationRecord> log;
    ContractionReport report;
    double terminal_error = 0.0;       // |z(T) - zstar| of the last iterate
    double mild_terminal_error = 0.0;  // same, re-integrated with integrate_mild
    double fixed_point_residual = 0.0; // |kappa(z) - z|_sup at the returned z
};

// Picard iteration y <- kappa(y), kappa(y) = propagate_frozen(spec, Gamma L(y), y),
// from y_0 = mild solution under u = 0. Stops when the sup-norm change is
// <= tol. Throws NumericalError when the successive-difference ratio exceeds
// 1 three times in a row, or when max_iter is reached.
[[nodiscard]] ExactResult exact_fixed_point(const ProblemSpec& spec, const StateZ& zstar, double tol = 1e-10,
                                            int max_iter = 50);

}  // namespace beamctl
