#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerics; only plain vectors and closed-form sine sums.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Mat2 = std::array<double, 4>;  // row-major a11 a12 a21 a22
using Vec = std::vector<double>;

inline double lambda(int n) {
    const double p = std::numbers::pi;
    return std::pow(n * p, 4);
}

inline Mat2 mul(const Mat2& a, const Mat2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3]};
}

// X' = A X, X(0) = I, classical RK4 with a fixed step count.
inline Mat2 rk4_expm(const Mat2& a, double t, int steps) {
    Mat2 x{1, 0, 0, 1};
    const double h = t / steps;
    auto f = [&](const Mat2& m) { return mul(a, m); };
    for (int i = 0; i < steps; ++i) {
        Mat2 k1 = f(x), k2, k3, k4, tmp;
        for (int j = 0; j < 4; ++j) tmp[j] = x[j] + 0.5 * h * k1[j];
        k2 = f(tmp);
        for (int j = 0; j < 4; ++j) tmp[j] = x[j] + 0.5 * h * k2[j];
        k3 = f(tmp);
        for (int j = 0; j < 4; ++j) tmp[j] = x[j] + h * k3[j];
        k4 = f(tmp);
        for (int j = 0; j < 4; ++j) x[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    }
    return x;
}

// Scaling and squaring with a 30-term Taylor series.
inline Mat2 taylor_expm(const Mat2& a, double t) {
    double norm = 0.0;
    for (double v : a) norm = std::max(norm, std::abs(v * t));
    int squarings = 0;
    while (norm > 0.05) {
        norm *= 0.5;
        ++squarings;
    }
    const double s = t / std::ldexp(1.0, squarings);
    Mat2 as{a[0] * s, a[1] * s, a[2] * s, a[3] * s};
    Mat2 sum{1, 0, 0, 1}, term{1, 0, 0, 1};
    for (int k = 1; k <= 30; ++k) {
        term = mul(term, as);
        for (double& v : term) v /= k;
        for (int j = 0; j < 4; ++j) sum[j] += term[j];
    }
    for (int i = 0; i < squarings; ++i) sum = mul(sum, sum);
    return sum;
}

inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + h * i);
    return acc * h / 3.0;
}

// Discrete sine transform on x_i = i/(G+1), written out as plain sums.
struct Dst {
    int G;
    int N;
    std::vector<double> table;  // (i, n) -> sqrt2 sin(n pi x_i)

    Dst(int points, int modes) : G(points), N(modes), table(static_cast<std::size_t>(points) * modes) {
        for (int i = 0; i < G; ++i) {
            const double x = (i + 1.0) / (G + 1.0);
            for (int n = 0; n < N; ++n) table[i * N + n] = std::sqrt(2.0) * std::sin((n + 1) * std::numbers::pi * x);
        }
    }
    Vec samples(const Vec& c) const {
        Vec f(G, 0.0);
        for (int i = 0; i < G; ++i)
            for (int n = 0; n < N; ++n) f[i] += c[n] * table[i * N + n];
        return f;
    }
    Vec coeffs(const Vec& f) const {
        Vec c(N, 0.0);
        for (int i = 0; i < G; ++i)
            for (int n = 0; n < N; ++n) c[n] += f[i] * table[i * N + n];
        for (double& v : c) v /= (G + 1.0);
        return c;
    }
    template <class Fn>
    Vec map(const Vec& c, Fn fn) const {
        Vec f = samples(c);
        for (double& v : f) v = fn(v);
        return coeffs(f);
    }
};

inline double norm_z(const Vec& w, const Vec& y) {
    double acc = 0.0;
    for (std::size_t n = 0; n < w.size(); ++n) acc += lambda(static_cast<int>(n + 1)) * w[n] * w[n] + y[n] * y[n];
    return std::sqrt(acc);
}

// Method-of-steps RK4 for the truncated beam system
//   w' = y
//   y' = -d lambda w - c y + p(t) - k P[w^+] + a P[tanh(w(t - r))] + u
// with kicks y(t_k^+) = y(t_k^-) + offset_k + g_k y(t_k^-), and history
// z(s) = rho - sum_j gamma_j z(tau_j + s) on [-r, 0] resolved by an outer
// fixed-point loop. Delayed values come from 4-point Lagrange interpolation
// of the stored positions.
struct BeamProblem {
    double c = 1, d = 1, k = 1;
    int N = 4;
    double T = 1, r = 0.3;
    int G = 33;
    double forcing_amplitude = 0, forcing_omega = 0, forcing_phase = 0;
    int forcing_mode = 1;
    double saturating_gain = 0;
    struct Kick {
        double time;
        Vec offset;
        double gain;
    };
    std::vector<Kick> kicks;
    std::vector<double> lags, weights;
    Vec rho_w, rho_y;
    Vec control;  // constant modal control, may be empty
};

struct BeamResult {
    Vec w_T, y_T;
    int outer_iterations = 0;
    double last_change = 0;
};

inline BeamResult solve_beam(const BeamProblem& p, double h, double tol = 1e-13, int max_outer = 80) {
    const int N = p.N;
    const Dst dst(p.G, N);
    const int R = static_cast<int>(std::lround(p.r / h));
    const int K = static_cast<int>(std::lround(p.T / h));
    const int total = R + K + 1;

    Vec profile(p.G);
    for (int i = 0; i < p.G; ++i)
        profile[i] = std::sin(p.forcing_mode * std::numbers::pi * (i + 1.0) / (p.G + 1.0));
    const Vec pc = dst.coeffs(profile);

    std::vector<int> kick_nodes;
    for (const auto& kk : p.kicks) kick_nodes.push_back(R + static_cast<int>(std::lround(kk.time / h)));
    std::vector<int> lag_nodes;
    for (double tau : p.lags) lag_nodes.push_back(static_cast<int>(std::lround(tau / h)));

    std::vector<Vec> W(total, Vec(N)), Y(total, Vec(N));
    std::vector<Vec> hist_w(R + 1, p.rho_w), hist_y(R + 1, p.rho_y);

    auto delayed = [&](double node_pos) {
        // node_pos: fractional node index of t - r
        int base = static_cast<int>(std::floor(node_pos)) - 1;
        if (base < 0) base = 0;
        const double x = node_pos;
        Vec out(N, 0.0);
        for (int a = 0; a < 4; ++a) {
            double l = 1.0;
            for (int b = 0; b < 4; ++b)
                if (b != a) l *= (x - (base + b)) / static_cast<double>(a - b);
            for (int n = 0; n < N; ++n) out[n] += l * W[base + a][n];
        }
        return out;
    };

    auto rhs = [&](double t, const Vec& w, const Vec& y, const Vec& wd, Vec& dw, Vec& dy) {
        const Vec plus = dst.map(w, [](double v) { return v > 0 ? v : 0.0; });
        Vec sat(N, 0.0);
        if (p.saturating_gain != 0) sat = dst.map(wd, [](double v) { return std::tanh(v); });
        const double amp = p.forcing_amplitude * std::cos(p.forcing_omega * t + p.forcing_phase);
        for (int n = 0; n < N; ++n) {
            dw[n] = y[n];
            dy[n] = -p.d * lambda(n + 1) * w[n] - p.c * y[n] + amp * pc[n] - p.k * plus[n] + p.saturating_gain * sat[n];
            if (!p.control.empty()) dy[n] += p.control[n];
        }
    };

    BeamResult res;
    std::vector<Vec> prevW, prevY;
    for (int outer = 1; outer <= max_outer; ++outer) {
        for (int i = 0; i <= R; ++i) {
            W[i] = hist_w[i];
            Y[i] = hist_y[i];
        }
        for (int i = R; i < total - 1; ++i) {
            const double t = (i - R) * h;
            Vec k1w(N), k1y(N), k2w(N), k2y(N), k3w(N), k3y(N), k4w(N), k4y(N), tw(N), ty(N);
            const Vec d0 = W[i - R];
            const Vec dm = delayed(i - R + 0.5);
            const Vec d1 = W[i - R + 1];
            rhs(t, W[i], Y[i], d0, k1w, k1y);
            for (int n = 0; n < N; ++n) tw[n] = W[i][n] + 0.5 * h * k1w[n], ty[n] = Y[i][n] + 0.5 * h * k1y[n];
            rhs(t + 0.5 * h, tw, ty, dm, k2w, k2y);
            for (int n = 0; n < N; ++n) tw[n] = W[i][n] + 0.5 * h * k2w[n], ty[n] = Y[i][n] + 0.5 * h * k2y[n];
            rhs(t + 0.5 * h, tw, ty, dm, k3w, k3y);
            for (int n = 0; n < N; ++n) tw[n] = W[i][n] + h * k3w[n], ty[n] = Y[i][n] + h * k3y[n];
            rhs(t + h, tw, ty, d1, k4w, k4y);
            for (int n = 0; n < N; ++n) {
                W[i + 1][n] = W[i][n] + h / 6 * (k1w[n] + 2 * k2w[n] + 2 * k3w[n] + k4w[n]);
                Y[i + 1][n] = Y[i][n] + h / 6 * (k1y[n] + 2 * k2y[n] + 2 * k3y[n] + k4y[n]);
            }
            for (std::size_t kk = 0; kk < kick_nodes.size(); ++kk) {
                if (kick_nodes[kk] != i + 1) continue;
                for (int n = 0; n < N; ++n) {
                    const double off = p.kicks[kk].offset.empty() ? 0.0 : p.kicks[kk].offset[n];
                    Y[i + 1][n] += off + p.kicks[kk].gain * Y[i + 1][n];
                }
            }
        }
        res.outer_iterations = outer;
        bool nonlocal = false;
        for (double g : p.weights) nonlocal = nonlocal || g != 0;
        if (!nonlocal) break;
        if (!prevW.empty()) {
            double change = 0.0;
            for (int i = 0; i < total; ++i) {
                Vec dw(N), dy(N);
                for (int n = 0; n < N; ++n) dw[n] = W[i][n] - prevW[i][n], dy[n] = Y[i][n] - prevY[i][n];
                change = std::max(change, norm_z(dw, dy));
            }
            res.last_change = change;
            if (change <= tol) break;
        }
        prevW = W;
        prevY = Y;
        for (int i = 0; i <= R; ++i) {
            for (int n = 0; n < N; ++n) {
                hist_w[i][n] = p.rho_w[n];
                hist_y[i][n] = p.rho_y[n];
                for (std::size_t j = 0; j < lag_nodes.size(); ++j) {
                    hist_w[i][n] -= p.weights[j] * W[i + lag_nodes[j]][n];
                    hist_y[i][n] -= p.weights[j] * Y[i + lag_nodes[j]][n];
                }
            }
        }
    }
    res.w_T = W.back();
    res.y_T = Y.back();
    return res;
}

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(g);
}

}  // namespace oracle
