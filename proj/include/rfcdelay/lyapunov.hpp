#pragma once

// 2x2 matrix algebra, Lyapunov equation A^T P + P A = -I, and the
// stability constants (Lambda, k, p) of the planar switched family
// A(lambda) = lambda*A1 + (1-lambda)*A2.

#include "rfcdelay/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace rfcdelay {

struct Vec2 {
    double x1 = 0.0;
    double x2 = 0.0;

    [[nodiscard]] constexpr double norm2_sq() const noexcept { return x1 * x1 + x2 * x2; }
    [[nodiscard]] double norm_inf() const noexcept { return std::max(std::abs(x1), std::abs(x2)); }
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Mat2 {
    double a11 = 0.0, a12 = 0.0;
    double a21 = 0.0, a22 = 0.0;

    static constexpr Mat2 identity() noexcept { return {1.0, 0.0, 0.0, 1.0}; }

    [[nodiscard]] constexpr double trace() const noexcept { return a11 + a22; }
    [[nodiscard]] constexpr double det() const noexcept { return a11 * a22 - a12 * a21; }
    [[nodiscard]] constexpr Mat2 transposed() const noexcept { return {a11, a21, a12, a22}; }
    [[nodiscard]] bool finite() const noexcept {
        return std::isfinite(a11) && std::isfinite(a12) && std::isfinite(a21) && std::isfinite(a22);
    }
    [[nodiscard]] double max_abs() const noexcept {
        return std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)});
    }

    friend constexpr Mat2 operator+(const Mat2& a, const Mat2& b) noexcept {
        return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
    }
    friend constexpr Mat2 operator-(const Mat2& a, const Mat2& b) noexcept {
        return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
    }
    friend constexpr Mat2 operator*(double s, const Mat2& a) noexcept {
        return {s * a.a11, s * a.a12, s * a.a21, s * a.a22};
    }
    friend constexpr Mat2 operator*(const Mat2& a, const Mat2& b) noexcept {
        return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
                a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
    }
    friend constexpr Vec2 operator*(const Mat2& a, const Vec2& v) noexcept {
        return {a.a11 * v.x1 + a.a12 * v.x2, a.a21 * v.x1 + a.a22 * v.x2};
    }
    friend bool operator==(const Mat2&, const Mat2&) = default;
};

/// x^T M x
[[nodiscard]] constexpr double quad_form(const Mat2& m, const Vec2& x) noexcept {
    return x.x1 * (m.a11 * x.x1 + m.a12 * x.x2) + x.x2 * (m.a21 * x.x1 + m.a22 * x.x2);
}

/// Convex combination lambda*a1 + (1-lambda)*a2.
[[nodiscard]] constexpr Mat2 blend(const Mat2& a1, const Mat2& a2, double lambda) noexcept {
    return lambda * a1 + (1.0 - lambda) * a2;
}

/// Eigenvalues (lo, hi) of the symmetric matrix [[a, b], [b, c]] by the quadratic formula.
[[nodiscard]] inline std::array<double, 2> sym_eigenvalues(double a, double b, double c) noexcept {
    const double mean = 0.5 * (a + c);
    const double radius = std::hypot(0.5 * (a - c), b);
    const double hi = mean + radius;
    const double lo = mean - radius;
    // Recover the smaller-magnitude root from the determinant to avoid cancellation.
    const double det = a * c - b * b;
    if (std::abs(hi) >= std::abs(lo) && hi != 0.0) {
        return {det / hi, hi};
    }
    if (lo != 0.0) {
        return {lo, det / lo};
    }
    return {lo, hi};
}

/// Minimum eigenvalue of the symmetric part of m (m is assumed symmetric).
[[nodiscard]] inline double sym_min_eigenvalue(const Mat2& m) noexcept {
    return sym_eigenvalues(m.a11, 0.5 * (m.a12 + m.a21), m.a22)[0];
}

/// Symmetric positive definite P together with its extreme eigenvalues.
struct SymPosDef2 {
    double p11 = 0.0;
    double p12 = 0.0;
    double p22 = 0.0;
    double c1 = 0.0;  // min eigenvalue
    double c2 = 0.0;  // max eigenvalue

    [[nodiscard]] Mat2 matrix() const noexcept { return {p11, p12, p12, p22}; }
    [[nodiscard]] double form(const Vec2& x) const noexcept { return quad_form(matrix(), x); }
};

/// Planar Hurwitz test: trace < 0 and det > 0.
[[nodiscard]] constexpr bool is_hurwitz(const Mat2& a) noexcept {
    return a.trace() < 0.0 && a.det() > 0.0;
}

/// Max-entry residual of A^T P + P A + I.
[[nodiscard]] inline double lyapunov_residual(const Mat2& a, const Mat2& p) noexcept {
    return (a.transposed() * p + p * a + Mat2::identity()).max_abs();
}

namespace detail {

// Gaussian elimination with partial pivoting on a 3x3 system.
inline std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> k, std::array<double, 3> rhs) {
    double scale = 0.0;
    for (const auto& row : k) {
        for (double v : row) scale = std::max(scale, std::abs(v));
    }
    if (scale == 0.0) throw SingularSystem("zero coefficient matrix");
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::abs(k[r][col]) > std::abs(k[piv][col])) piv = r;
        }
        if (std::abs(k[piv][col]) <= 1e-14 * scale) {
            throw SingularSystem("pivot below 1e-14 relative to matrix scale");
        }
        std::swap(k[piv], k[col]);
        std::swap(rhs[piv], rhs[col]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = k[r][col] / k[col][col];
            for (int c = col; c < 3; ++c) k[r][c] -= f * k[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    std::array<double, 3> out{};
    for (int r = 2; r >= 0; --r) {
        double acc = rhs[r];
        for (int c = r + 1; c < 3; ++c) acc -= k[r][c] * out[c];
        out[r] = acc / k[r][r];
    }
    return out;
}

}  // namespace detail

/// Solves A^T P + P A = -I for symmetric P through the 3x3 system in (p11, p12, p22).
[[nodiscard]] inline SymPosDef2 solve_lyapunov(const Mat2& a) {
    if (!a.finite()) throw NotHurwitz("matrix has non-finite entries");
    if (!is_hurwitz(a)) throw NotHurwitz("trace must be < 0 and det > 0");
    const std::array<std::array<double, 3>, 3> k{{
        {2.0 * a.a11, 2.0 * a.a21, 0.0},
        {a.a12, a.a11 + a.a22, a.a21},
        {0.0, 2.0 * a.a12, 2.0 * a.a22},
    }};
    const auto sol = detail::solve3(k, {-1.0, 0.0, -1.0});
    SymPosDef2 p{sol[0], sol[1], sol[2], 0.0, 0.0};
    const auto ev = sym_eigenvalues(p.p11, p.p12, p.p22);
    p.c1 = ev[0];
    p.c2 = ev[1];
    if (!(p.p11 > 0.0 && p.p11 * p.p22 - p.p12 * p.p12 > 0.0 && p.c1 > 0.0)) {
        throw SingularSystem("solution is not positive definite");
    }
    return p;
}

/// The planar pair (A1, A2); defaults are the matrices of the counterexample.
struct PlanarMatrices {
    Mat2 a1{0.0, 2.0, -0.5, -0.1};
    Mat2 a2{-0.1, 0.5, -2.0, 0.0};

    [[nodiscard]] constexpr Mat2 at(double lambda) const noexcept { return blend(a1, a2, lambda); }
};

/// min eig of -(A(lambda)^T P0 + P0 A(lambda)).
[[nodiscard]] inline double decay_margin(const PlanarMatrices& mats, const SymPosDef2& p0, double lambda) noexcept {
    const Mat2 a = mats.at(lambda);
    const Mat2 p = p0.matrix();
    const Mat2 s = a.transposed() * p + p * a;
    return sym_min_eigenvalue(-1.0 * s);
}

struct LambdaSearch {
    double margin = 0.5;        // required decay margin (the -margin*I bound)
    int grid_points = 1000;     // monotonicity pre-scan
    double tolerance = 1e-9;    // bisection absolute tolerance
};

/// Largest Lambda in (0, 1] with A(l)^T P0 + P0 A(l) <= -margin*I for every l in [0, Lambda].
/// Returns 1 when the whole interval is feasible.
[[nodiscard]] inline double find_capital_lambda(const PlanarMatrices& mats, const SymPosDef2& p0,
                                                const LambdaSearch& search = {}) {
    auto feasible = [&](double l) { return decay_margin(mats, p0, l) >= search.margin; };
    if (!feasible(0.0)) {
        throw NoFeasibleLambda("lambda = 0 violates the margin; P0 does not solve the Lyapunov equation for A(0)");
    }
    const int n = std::max(search.grid_points, 2);
    int first_bad = -1;
    for (int i = 1; i <= n; ++i) {
        const double l = static_cast<double>(i) / n;
        const bool ok = feasible(l);
        if (!ok && first_bad < 0) first_bad = i;
        if (ok && first_bad >= 0) {
            throw NoFeasibleLambda("feasible set is not an interval on the scan grid (re-entry at lambda = " +
                                   std::to_string(l) + ")");
        }
    }
    if (first_bad < 0) return 1.0;
    double lo = static_cast<double>(first_bad - 1) / n;
    double hi = static_cast<double>(first_bad) / n;
    while (hi - lo > search.tolerance) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    return lo;
}

struct StabilityConstants {
    double capital_lambda = 0.0;
    double k = 0.0;
    double p = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
};

/// Envelope gain and rate from the eigenvalue bounds alone; capital_lambda is left at 0.
[[nodiscard]] inline StabilityConstants envelope_constants(double c1, double c2) {
    if (!(c1 > 0.0) || !(c2 >= c1)) throw SingularSystem("need 0 < c1 <= c2");
    StabilityConstants out;
    out.c1 = c1;
    out.c2 = c2;
    out.k = std::sqrt(2.0 * c2 / c1);
    out.p = std::min(1.0, 1.0 / (4.0 * c2));
    return out;
}

/// k = sqrt(2 c2 / c1), p = min(1, 1 / (4 c2)), Lambda from find_capital_lambda.
[[nodiscard]] inline StabilityConstants stability_constants(const PlanarMatrices& mats, const SymPosDef2& p0,
                                                            const LambdaSearch& search = {}) {
    StabilityConstants out = envelope_constants(p0.c1, p0.c2);
    out.capital_lambda = find_capital_lambda(mats, p0, search);
    return out;
}

/// Convenience: constants for P0 solving the Lyapunov equation of A(0).
[[nodiscard]] inline StabilityConstants stability_constants(const PlanarMatrices& mats = {},
                                                            const LambdaSearch& search = {}) {
    return stability_constants(mats, solve_lyapunov(mats.at(0.0)), search);
}

}  // namespace rfcdelay
