#ifndef REFCAST_SINUSOID_HPP
#define REFCAST_SINUSOID_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "refcast/errors.hpp"

namespace refcast {

/// Least-squares projection of a series onto one sinusoidal cycle:
/// v[i] ~= sin_coeff * sin(2*pi*i/P) + cos_coeff * cos(2*pi*i/P) + offset.
struct SinusoidFit {
    double sin_coeff = 0.0;
    double cos_coeff = 0.0;
    double offset = 0.0;
    std::size_t period_samples = 0;

    double value_at(std::size_t i) const {
        const double theta =
            2.0 * M_PI * static_cast<double>(i) / static_cast<double>(period_samples);
        return sin_coeff * std::sin(theta) + cos_coeff * std::cos(theta) + offset;
    }

    /// Peak-to-mean swing of the fitted cycle.
    double amplitude() const { return std::hypot(sin_coeff, cos_coeff); }
};

namespace detail {

// Solves a symmetric 3x3 system by Gaussian elimination with partial
// pivoting. Throws DegenerateSystemError when a pivot collapses.
inline std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> a,
                                    std::array<double, 3> b, double pivot_tol) {
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        if (std::abs(a[pivot][col]) < pivot_tol) {
            throw DegenerateSystemError("singular normal equations (regressors collinear)");
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::array<double, 3> x{};
    for (int r = 2; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < 3; ++c) acc -= a[r][c] * x[c];
        x[r] = acc / a[r][r];
    }
    return x;
}

}  // namespace detail

/// Closed-form linear least squares of volumes onto
/// {sin(2*pi*i/P), cos(2*pi*i/P), 1}. Needs at least 3 samples and P >= 2.
inline SinusoidFit fit_sinusoid(const std::vector<double>& volumes,
                                std::size_t period_samples) {
    if (volumes.size() < 3) throw SeriesTooShortError(3, volumes.size());
    if (period_samples < 2) throw Error("period_samples must be at least 2");
    for (double v : volumes) {
        if (!std::isfinite(v)) throw NonFiniteInputError();
    }

    const std::size_t n = volumes.size();
    double ss = 0, cc = 0, sc = 0, s1 = 0, c1 = 0;
    double sv = 0, cv = 0, v1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double theta =
            2.0 * M_PI * static_cast<double>(i) / static_cast<double>(period_samples);
        const double s = std::sin(theta);
        const double c = std::cos(theta);
        const double v = volumes[i];
        ss += s * s;
        cc += c * c;
        sc += s * c;
        s1 += s;
        c1 += c;
        sv += s * v;
        cv += c * v;
        v1 += v;
    }
    const double nn = static_cast<double>(n);
    // Scale-aware pivot tolerance: regressors are O(1), so nn sets the scale.
    const double tol = 1e-9 * nn;
    const auto x = detail::solve3({{{ss, sc, s1}, {sc, cc, c1}, {s1, c1, nn}}},
                                  {sv, cv, v1}, tol);
    return SinusoidFit{x[0], x[1], x[2], period_samples};
}

/// Sum of squared residuals of a fit against the data it modelled.
inline double sinusoid_residual_ss(const SinusoidFit& fit, const std::vector<double>& volumes) {
    double acc = 0.0;
    for (std::size_t i = 0; i < volumes.size(); ++i) {
        const double r = volumes[i] - fit.value_at(i);
        acc += r * r;
    }
    return acc;
}

}  // namespace refcast

#endif  // REFCAST_SINUSOID_HPP
