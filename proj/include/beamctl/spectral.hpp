#pragma once

// Modal representation of functions on (0,1) for the hinged beam operator
// d^4/dx^4, in the orthonormal basis sqrt(2) sin(n pi x), n = 1..N.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace beamctl {

// lambda_n = n^4 pi^4. Throws std::domain_error for n <= 0.
[[nodiscard]] double eigenvalue(int n);

class ModalCoeffs {
public:
    ModalCoeffs() = default;
    explicit ModalCoeffs(std::size_t modes, double fill = 0.0) : c_(modes, fill) {}
    explicit ModalCoeffs(std::vector<double> c) : c_(std::move(c)) {}
    ModalCoeffs(std::initializer_list<double> c) : c_(c) {}

    [[nodiscard]] std::size_t size() const noexcept { return c_.size(); }
    [[nodiscard]] double& operator[](std::size_t i) { return c_[i]; }
    [[nodiscard]] double operator[](std::size_t i) const { return c_[i]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return c_; }
    [[nodiscard]] std::span<double> values() noexcept { return c_; }

    // Unweighted L2(0,1) norm, equal to the Euclidean norm of the coefficients.
    [[nodiscard]] double norm() const;
    [[nodiscard]] bool all_finite() const;

    ModalCoeffs& operator+=(const ModalCoeffs& o);
    ModalCoeffs& operator-=(const ModalCoeffs& o);
    ModalCoeffs& operator*=(double s);
    // this += s * o
    ModalCoeffs& axpy(double s, const ModalCoeffs& o);

    friend bool operator==(const ModalCoeffs&, const ModalCoeffs&) = default;

private:
    std::vector<double> c_;
};

[[nodiscard]] ModalCoeffs operator+(ModalCoeffs a, const ModalCoeffs& b);
[[nodiscard]] ModalCoeffs operator-(ModalCoeffs a, const ModalCoeffs& b);
[[nodiscard]] ModalCoeffs operator*(double s, ModalCoeffs a);
[[nodiscard]] double dot(const ModalCoeffs& a, const ModalCoeffs& b);

// Element (w, y) of Z_{1/2} = X^{1/2} x X: position in the fractional space,
// velocity in L2.
struct StateZ {
    ModalCoeffs w;
    ModalCoeffs y;

    StateZ() = default;
    explicit StateZ(std::size_t modes) : w(modes), y(modes) {}
    StateZ(ModalCoeffs w_, ModalCoeffs y_);

    [[nodiscard]] std::size_t modes() const noexcept { return w.size(); }

    StateZ& operator+=(const StateZ& o);
    StateZ& operator-=(const StateZ& o);
    StateZ& operator*=(double s);
    StateZ& axpy(double s, const StateZ& o);

    friend bool operator==(const StateZ&, const StateZ&) = default;
};

[[nodiscard]] StateZ operator+(StateZ a, const StateZ& b);
[[nodiscard]] StateZ operator-(StateZ a, const StateZ& b);
[[nodiscard]] StateZ operator*(double s, StateZ a);

// sqrt(sum lambda_n w_n^2)
[[nodiscard]] double norm_half(const ModalCoeffs& w);
// sqrt(norm_half(w)^2 + |y|^2)
[[nodiscard]] double norm_z(const StateZ& z);
// Z_{1/2} inner product sum lambda_n a_n a'_n + b_n b'_n.
[[nodiscard]] double inner_z(const StateZ& a, const StateZ& b);

// Uniform interior collocation grid x_i = i/(G+1), i = 1..G.
class SpatialGrid {
public:
    explicit SpatialGrid(std::size_t points);

    [[nodiscard]] std::size_t points() const noexcept { return points_; }
    [[nodiscard]] double node(std::size_t i) const noexcept {
        return static_cast<double>(i + 1) / static_cast<double>(points_ + 1);
    }
    [[nodiscard]] std::vector<double> nodes() const;
    // Smallest grid that resolves the positive part of an N-mode function.
    [[nodiscard]] static std::size_t minimum_points(std::size_t modes) { return 2 * modes + 1; }

private:
    std::size_t points_;
};

// Discrete sine transform between N modal coefficients and samples on a grid.
// Precomputes the G x N basis table; immutable after construction.
class SineBasis {
public:
    SineBasis(SpatialGrid grid, std::size_t modes);

    [[nodiscard]] const SpatialGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t modes() const noexcept { return modes_; }

    [[nodiscard]] ModalCoeffs project(std::span<const double> samples) const;
    [[nodiscard]] std::vector<double> reconstruct(const ModalCoeffs& c) const;
    [[nodiscard]] ModalCoeffs positive_part(const ModalCoeffs& c) const;

private:
    SpatialGrid grid_;
    std::size_t modes_;
    std::vector<double> table_;  // row-major, table_[i * modes_ + n] = sqrt2 sin((n+1) pi x_i)
};

// Free-function forms. These build a SineBasis per call; hot loops should hold
// a SineBasis instead.
[[nodiscard]] ModalCoeffs project(std::span<const double> samples, std::size_t modes);
[[nodiscard]] std::vector<double> reconstruct(const ModalCoeffs& c, const SpatialGrid& grid);
[[nodiscard]] ModalCoeffs positive_part(const ModalCoeffs& c, const SpatialGrid& grid);

}  // namespace beamctl
