#include "beamctl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace beamctl {

double eigenvalue(int n) {
    if (n <= 0) {
        throw std::domain_error("eigenvalue: mode index must be >= 1, got " + std::to_string(n));
    }
    constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    return (n2 * n2) * (pi2 * pi2);
}

// ---------------------------------------------------------------------------
// ModalCoeffs

double ModalCoeffs::norm() const { return std::sqrt(dot(*this, *this)); }

bool ModalCoeffs::all_finite() const {
    return std::all_of(c_.begin(), c_.end(), [](double v) { return std::isfinite(v); });
}

namespace {
void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": mode count mismatch (" + std::to_string(a) +
                                    " vs " + std::to_string(b) + ")");
    }
}
}  // namespace

ModalCoeffs& ModalCoeffs::operator+=(const ModalCoeffs& o) {
    require_same_size(size(), o.size(), "ModalCoeffs +=");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
}

ModalCoeffs& ModalCoeffs::operator-=(const ModalCoeffs& o) {
    require_same_size(size(), o.size(), "ModalCoeffs -=");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
}

ModalCoeffs& ModalCoeffs::operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
}

ModalCoeffs& ModalCoeffs::axpy(double s, const ModalCoeffs& o) {
    require_same_size(size(), o.size(), "ModalCoeffs axpy");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += s * o.c_[i];
    return *this;
}

ModalCoeffs operator+(ModalCoeffs a, const ModalCoeffs& b) { return a += b; }
ModalCoeffs operator-(ModalCoeffs a, const ModalCoeffs& b) { return a -= b; }
ModalCoeffs operator*(double s, ModalCoeffs a) { return a *= s; }

double dot(const ModalCoeffs& a, const ModalCoeffs& b) {
    require_same_size(a.size(), b.size(), "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// ---------------------------------------------------------------------------
// StateZ

StateZ::StateZ(ModalCoeffs w_, ModalCoeffs y_) : w(std::move(w_)), y(std::move(y_)) {
    require_same_size(w.size(), y.size(), "StateZ");
}

StateZ& StateZ::operator+=(const StateZ& o) {
    w += o.w;
    y += o.y;
    return *this;
}

StateZ& StateZ::operator-=(const StateZ& o) {
    w -= o.w;
    y -= o.y;
    return *this;
}

StateZ& StateZ::operator*=(double s) {
    w *= s;
    y *= s;
    return *this;
}

StateZ& StateZ::axpy(double s, const StateZ& o) {
    w.axpy(s, o.w);
    y.axpy(s, o.y);
    return *this;
}

StateZ operator+(StateZ a, const StateZ& b) { return a += b; }
StateZ operator-(StateZ a, const StateZ& b) { return a -= b; }
StateZ operator*(double s, StateZ a) { return a *= s; }

double norm_half(const ModalCoeffs& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += eigenvalue(static_cast<int>(i + 1)) * w[i] * w[i];
    }
    return std::sqrt(acc);
}

double norm_z(const StateZ& z) { return std::sqrt(inner_z(z, z)); }

double inner_z(const StateZ& a, const StateZ& b) {
    require_same_size(a.modes(), b.modes(), "inner_z");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.modes(); ++i) {
        acc += eigenvalue(static_cast<int>(i + 1)) * a.w[i] * b.w[i] + a.y[i] * b.y[i];
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Grid and transforms

SpatialGrid::SpatialGrid(std::size_t points) : points_(points) {
    if (points == 0) throw std::invalid_argument("SpatialGrid: need at least one interior point");
}

std::vector<double> SpatialGrid::nodes() const {
    std::vector<double> x(points_);
    for (std::size_t i = 0; i < points_; ++i) x[i] = node(i);
    return x;
}

SineBasis::SineBasis(SpatialGrid grid, std::size_t modes) : grid_(grid), modes_(modes) {
    if (modes == 0) throw std::invalid_argument("SineBasis: need at least one mode");
    if (grid_.points() < SpatialGrid::minimum_points(modes)) {
        throw std::invalid_argument("SineBasis: grid of " + std::to_string(grid_.points()) +
                                    " points is too coarse for " + std::to_string(modes) +
                                    " modes (need G >= 2N+1)");
    }
    const std::size_t g = grid_.points();
    table_.resize(g * modes_);
    const double denom = static_cast<double>(g + 1);
    for (std::size_t i = 0; i < g; ++i) {
        for (std::size_t n = 0; n < modes_; ++n) {
            // Reduce (i+1)(n+1) mod 2(G+1) so the argument stays in [0, 2pi).
            const auto k = ((i + 1) * (n + 1)) % (2 * (g + 1));
            table_[i * modes_ + n] =
                std::numbers::sqrt2 * std::sin(std::numbers::pi * static_cast<double>(k) / denom);
        }
    }
}

ModalCoeffs SineBasis::project(std::span<const double> samples) const {
    if (samples.size() != grid_.points()) {
        throw std::invalid_argument("project: expected " + std::to_string(grid_.points()) + " samples, got " +
                                    std::to_string(samples.size()));
    }
    ModalCoeffs c(modes_);
    const double weight = 1.0 / static_cast<double>(grid_.points() + 1);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = samples[i];
        if (f == 0.0) continue;
        const double* row = &table_[i * modes_];
        for (std::size_t n = 0; n < modes_; ++n) c[n] += f * row[n];
    }
    c *= weight;
    return c;
}

std::vector<double> SineBasis::reconstruct(const ModalCoeffs& c) const {
    if (c.size() != modes_) {
        throw std::invalid_argument("reconstruct: expected " + std::to_string(modes_) + " modes, got " +
                                    std::to_string(c.size()));
    }
    std::vector<double> f(grid_.points(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double* row = &table_[i * modes_];
        double acc = 0.0;
        for (std::size_t n = 0; n < modes_; ++n) acc += c[n] * row[n];
        f[i] = acc;
    }
    return f;
}

ModalCoeffs SineBasis::positive_part(const ModalCoeffs& c) const {
    std::vector<double> f = reconstruct(c);
    for (double& v : f) v = std::max(v, 0.0);
    return project(f);
}

ModalCoeffs project(std::span<const double> samples, std::size_t modes) {
    return SineBasis(SpatialGrid(samples.size()), modes).project(samples);
}

std::vector<double> reconstruct(const ModalCoeffs& c, const SpatialGrid& grid) {
    if (c.size() == 0) throw std::invalid_argument("reconstruct: empty coefficient vector");
    // Reconstruction alone has no aliasing constraint; evaluate directly.
    std::vector<double> f(grid.points(), 0.0);
    for (std::size_t i = 0; i < grid.points(); ++i) {
        double acc = 0.0;
        for (std::size_t n = 0; n < c.size(); ++n) {
            acc += c[n] * std::numbers::sqrt2 * std::sin(std::numbers::pi * static_cast<double>(n + 1) * grid.node(i));
        }
        f[i] = acc;
    }
    return f;
}

ModalCoeffs positive_part(const ModalCoeffs& c, const SpatialGrid& grid) {
    return SineBasis(grid, c.size()).positive_part(c);
}

}  // namespace beamctl
