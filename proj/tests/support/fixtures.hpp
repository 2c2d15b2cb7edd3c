#pragma once

// Shared benchmark problems, built the same way in unit and acceptance tests.

#include "beamctl/dynamics.hpp"
#include "oracles.hpp"

namespace fixtures {

// N = 4, one kick at t = 0.45, delay r = 0.3, q = 2 nonlocal lags with
// L_q = 0.1, k = 1, delayed saturating f and a standing-wave forcing.
inline beamctl::ProblemSpec full_system(double h) {
    using namespace beamctl;
    ProblemSpec s;
    s.model.modes = 4;
    s.model.cable = 1.0;
    s.step = h;
    s.grid_points = 33;
    s.forcing.kind = ForcingSpec::Kind::standing_wave;
    s.forcing.amplitude = 0.5;
    s.forcing.omega = 6.0;
    s.nonlinearity.kind = NonlinearitySpec::Kind::delayed_saturating;
    s.nonlinearity.gain = 0.5;
    ImpulseSpec imp;
    imp.time = 0.45;
    imp.gain = 0.1;
    imp.offset = ModalCoeffs{0.05, -0.02, 0.01, 0.0};
    s.impulses = {imp};
    s.nonlocal.lags = {0.1, 0.2};
    s.nonlocal.weights = {0.1, -0.05};
    s.history = Segment::constant(0.3, 0.0015,
                                  StateZ(ModalCoeffs{0.01, -0.002, 0.0005, 0.0}, ModalCoeffs{0.05, 0.02, -0.01, 0.005}));
    s.finalize();
    return s;
}

inline oracle::BeamProblem full_system_oracle() {
    oracle::BeamProblem p;
    p.N = 4;
    p.G = 33;
    p.forcing_amplitude = 0.5;
    p.forcing_omega = 6.0;
    p.saturating_gain = 0.5;
    p.kicks = {{0.45, {0.05, -0.02, 0.01, 0.0}, 0.1}};
    p.lags = {0.1, 0.2};
    p.weights = {0.1, -0.05};
    p.rho_w = {0.01, -0.002, 0.0005, 0.0};
    p.rho_y = {0.05, 0.02, -0.01, 0.005};
    return p;
}

inline double relative_terminal_error(const beamctl::StateZ& z, const oracle::BeamResult& ref) {
    oracle::Vec dw(z.modes()), dy(z.modes());
    for (std::size_t n = 0; n < z.modes(); ++n) {
        dw[n] = z.w[n] - ref.w_T[n];
        dy[n] = z.y[n] - ref.y_T[n];
    }
    return oracle::norm_z(dw, dy) / oracle::norm_z(ref.w_T, ref.y_T);
}

}  // namespace fixtures
