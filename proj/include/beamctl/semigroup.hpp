#pragma once

// The group S(t) generated by [[0, I], [-dA, -cI]] acts independently on each
// modal pair (w_n, y_n). Everything here works with the 2x2 blocks.

#include <array>
#include <cstddef>
#include <vector>

#include "beamctl/spectral.hpp"

namespace beamctl {

struct Mode2x2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    [[nodiscard]] static constexpr Mode2x2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

    [[nodiscard]] double trace() const { return a11 + a22; }
    [[nodiscard]] double det() const { return a11 * a22 - a12 * a21; }
    [[nodiscard]] Mode2x2 transpose() const { return {a11, a21, a12, a22}; }
    [[nodiscard]] std::array<double, 2> apply(double w, double y) const {
        return {a11 * w + a12 * y, a21 * w + a22 * y};
    }
    [[nodiscard]] double max_abs() const;

    friend bool operator==(const Mode2x2&, const Mode2x2&) = default;
};

[[nodiscard]] Mode2x2 operator*(const Mode2x2& a, const Mode2x2& b);
[[nodiscard]] Mode2x2 operator+(const Mode2x2& a, const Mode2x2& b);
[[nodiscard]] Mode2x2 operator-(const Mode2x2& a, const Mode2x2& b);
[[nodiscard]] Mode2x2 operator*(double s, const Mode2x2& a);

struct ModelParams {
    double damping = 1.0;    // c, 1/time
    double stiffness = 1.0;  // d
    double cable = 1.0;      // k, 1/time^2
    int modes = 8;           // N
    double horizon = 1.0;    // T
    double delay = 0.3;      // r

    // Throws std::invalid_argument naming the first violated constraint.
    void validate() const;
};

// Generator block [[0, 1], [-d lambda_n, -c]].
[[nodiscard]] Mode2x2 mode_matrix(int n, const ModelParams& p);

// Adjoint under <(a,b),(a',b')> = lambda_n a a' + b b', i.e. D^{-1} A^T D.
[[nodiscard]] Mode2x2 mode_adjoint_matrix(int n, const ModelParams& p);
[[nodiscard]] Mode2x2 weighted_adjoint(const Mode2x2& m, double lambda);

// Closed-form exp(m t) for any real 2x2 matrix, branching on the discriminant
// of its characteristic polynomial. Negative t is allowed.
[[nodiscard]] Mode2x2 expm2(const Mode2x2& m, double t);

// Induced norm of m as an operator on R^2 with the lambda-weighted norm,
// i.e. the spectral norm of D^{1/2} m D^{-1/2}.
[[nodiscard]] double weighted_norm(const Mode2x2& m, double lambda);

// Precomputed blocks exp(A_n t) (or of the adjoint) for n = 1..N at one t.
class ModalPropagator {
public:
    enum class Kind { forward, adjoint };

    ModalPropagator(const ModelParams& p, double t, Kind kind = Kind::forward);

    [[nodiscard]] double time() const noexcept { return t_; }
    [[nodiscard]] const Mode2x2& block(std::size_t mode_index) const { return blocks_.at(mode_index); }
    [[nodiscard]] std::size_t modes() const noexcept { return blocks_.size(); }
    [[nodiscard]] StateZ apply(const StateZ& z) const;
    // Largest weighted block norm, i.e. ||S(t)|| on the truncated space.
    [[nodiscard]] double norm() const;

private:
    double t_;
    std::vector<Mode2x2> blocks_;
};

[[nodiscard]] StateZ apply_semigroup(const StateZ& z, double t, const ModelParams& p);
[[nodiscard]] StateZ apply_adjoint_semigroup(const StateZ& z, double t, const ModelParams& p);

// ||S(t)|| over the N retained modes.
[[nodiscard]] double semigroup_norm(double t, const ModelParams& p);

struct NormBound {
    double value = 0.0;  // grid estimate of sup_{s in [0,T]} ||S(s)||
    double step = 0.0;   // time grid step used
    double argmax = 0.0;
};

// Grid estimate of M = sup_{s in [0,T]} ||S(s)||. step <= 0 selects T/2000.
[[nodiscard]] NormBound operator_norm_bound(const ModelParams& p, double step = 0.0);

}  // namespace beamctl
