#pragma once

// Reference implementations used only by tests. They take a different route
// from the library: every 1-df within-subjects effect is a one-sample t test
// on a per-participant contrast (F = t^2), and the incomplete beta function
// is integrated numerically.

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace oracle {

struct ContrastF {
    double ss = 0.0;
    double ss_error = 0.0;
    double f = 0.0;
};

/// F for the contrast with weights `w` over the four cells (index 2a + b).
inline ContrastF contrast_f(std::span<const std::array<double, 4>> rows, std::array<double, 4> w) {
    const double n = static_cast<double>(rows.size());
    std::vector<double> c;
    for (const auto& r : rows) c.push_back((w[0] * r[0] + w[1] * r[1] + w[2] * r[2] + w[3] * r[3]) / 2.0);
    double m = 0;
    for (double x : c) m += x / n;
    double v = 0;
    for (double x : c) v += (x - m) * (x - m);
    return {n * m * m, v, n * m * m / (v / (n - 1.0))};
}

inline ContrastF main_a(std::span<const std::array<double, 4>> rows) { return contrast_f(rows, {1, 1, -1, -1}); }
inline ContrastF main_b(std::span<const std::array<double, 4>> rows) { return contrast_f(rows, {1, -1, 1, -1}); }
inline ContrastF interaction(std::span<const std::array<double, 4>> rows) { return contrast_f(rows, {1, -1, -1, 1}); }

/// Total sum of squares about the grand mean.
inline double ss_total(std::span<const std::array<double, 4>> rows) {
    double g = 0;
    for (const auto& r : rows)
        for (double y : r) g += y;
    g /= 4.0 * static_cast<double>(rows.size());
    double s = 0;
    for (const auto& r : rows)
        for (double y : r) s += (y - g) * (y - g);
    return s;
}

/// I_x(a, b) by composite Simpson. For a < 1 the substitution u = t^a
/// removes the singularity at 0. Accurate for x away from 1 when b < 1.
inline double incomplete_beta_quadrature(double a, double b, double x, int intervals = 200000) {
    const bool sub = a < 1.0;
    const double upper = sub ? std::pow(x, a) : x;
    auto g = [&](double u) {
        if (sub) return std::pow(1.0 - std::pow(u, 1.0 / a), b - 1.0) / a;
        return std::pow(u, a - 1.0) * std::pow(1.0 - u, b - 1.0);
    };
    const double h = upper / intervals;
    double s = g(0.0) + g(upper);
    for (int i = 1; i < intervals; ++i) s += g(i * h) * (i % 2 ? 4.0 : 2.0);
    const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    return s * h / 3.0 / std::exp(log_beta);
}

}  // namespace oracle
