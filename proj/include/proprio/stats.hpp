#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "proprio/units.hpp"

namespace proprio::stats {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw ValidationError("mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1); 0 for fewer than two values.
inline double stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline double standard_error(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    return stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

namespace detail {

// Continued fraction for I_x(a, b), modified Lentz evaluation.
inline double incbeta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw std::runtime_error("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
inline double incomplete_beta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0)) throw ValidationError("incomplete_beta: a and b must be > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("incomplete_beta: x must lie in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    // the fraction converges fastest on this side of the mean
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::incbeta_cf(a, b, x) / a;
    return 1.0 - front * detail::incbeta_cf(b, a, 1.0 - x) / b;
}

/// Upper tail P(F >= f) of the F(d1, d2) distribution.
inline double f_survival(double f, double d1, double d2) {
    if (std::isnan(f)) throw ValidationError("f_survival: NaN statistic");
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
inline double t_two_sided(double t, double df) {
    if (std::isnan(t)) throw ValidationError("t_two_sided: NaN statistic");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

/// One within-subjects effect.
struct Effect {
    double ss = 0.0;        // effect sum of squares
    double ss_error = 0.0;  // effect-by-subject error sum of squares
    double df1 = 1.0;
    double df2 = 1.0;
    double f = 0.0;
    double p = 1.0;
    double eta_squared = 0.0;  // classical: ss / ss_total
    bool degenerate = false;   // zero error variance with a non-zero effect
};

inline Effect make_effect(double ss, double ss_error, double df1, double df2, double ss_total) {
    Effect e;
    e.ss = ss;
    e.ss_error = ss_error;
    e.df1 = df1;
    e.df2 = df2;
    // sums of squares below round-off of the total are treated as zero
    const double eps = 1e-12 * std::max(ss_total, 1e-300);
    const bool zero_effect = ss <= eps;
    const bool zero_error = ss_error <= eps;
    if (zero_effect) {
        e.f = 0.0;
        e.p = 1.0;
    } else if (zero_error) {
        e.f = std::numeric_limits<double>::infinity();
        e.p = 0.0;
        e.degenerate = true;
    } else {
        e.f = (ss / df1) / (ss_error / df2);
        e.p = f_survival(e.f, df1, df2);
    }
    e.eta_squared = ss_total > 0.0 ? ss / ss_total : 0.0;
    return e;
}

/// Cell layout of one participant's row: index = 2 * a + b for levels
/// a of factor A and b of factor B.
using Row2x2 = std::array<double, 4>;

struct Anova2x2 {
    int n = 0;
    double ss_total = 0.0;
    double ss_subject = 0.0;
    double ss_ab_error = 0.0;
    Effect a;
    Effect b;
    Effect ab;
};

/// Two-way fully within-subjects ANOVA on a balanced participant x 2 x 2 table.
inline Anova2x2 rm_anova_2x2(std::span<const Row2x2> rows) {
    const int n = static_cast<int>(rows.size());
    if (n < 2) throw ValidationError("rm_anova_2x2: need at least 2 participants");
    for (const auto& r : rows)
        for (double y : r)
            if (!std::isfinite(y)) throw ValidationError("rm_anova_2x2: missing or non-finite cell");

    const double dn = n;
    double grand = 0.0;
    std::vector<double> subj(static_cast<std::size_t>(n));
    std::array<double, 2> ma{}, mb{};
    std::array<double, 4> mab{};
    for (int i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        subj[static_cast<std::size_t>(i)] = (r[0] + r[1] + r[2] + r[3]) / 4.0;
        for (int c = 0; c < 4; ++c) {
            grand += r[static_cast<std::size_t>(c)];
            mab[static_cast<std::size_t>(c)] += r[static_cast<std::size_t>(c)] / dn;
            ma[static_cast<std::size_t>(c / 2)] += r[static_cast<std::size_t>(c)] / (2.0 * dn);
            mb[static_cast<std::size_t>(c % 2)] += r[static_cast<std::size_t>(c)] / (2.0 * dn);
        }
    }
    grand /= 4.0 * dn;

    Anova2x2 out;
    out.n = n;
    double ss_a = 0, ss_b = 0, ss_ab = 0, ss_as = 0, ss_bs = 0, ss_abs = 0, ss_s = 0, ss_t = 0;
    for (int k = 0; k < 2; ++k) {
        ss_a += 2.0 * dn * (ma[k] - grand) * (ma[k] - grand);
        ss_b += 2.0 * dn * (mb[k] - grand) * (mb[k] - grand);
    }
    for (int c = 0; c < 4; ++c) {
        const double d = mab[c] - ma[c / 2] - mb[c % 2] + grand;
        ss_ab += dn * d * d;
    }
    for (int i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        const double mi = subj[static_cast<std::size_t>(i)];
        ss_s += 4.0 * (mi - grand) * (mi - grand);
        const std::array<double, 2> mia{(r[0] + r[1]) / 2.0, (r[2] + r[3]) / 2.0};
        const std::array<double, 2> mib{(r[0] + r[2]) / 2.0, (r[1] + r[3]) / 2.0};
        for (int k = 0; k < 2; ++k) {
            const double da = mia[k] - mi - ma[k] + grand;
            const double db = mib[k] - mi - mb[k] + grand;
            ss_as += 2.0 * da * da;
            ss_bs += 2.0 * db * db;
        }
        for (int c = 0; c < 4; ++c) {
            const double y = r[static_cast<std::size_t>(c)];
            ss_t += (y - grand) * (y - grand);
            const double e = y - mia[c / 2] - mib[c % 2] - mab[c] + mi + ma[c / 2] + mb[c % 2] - grand;
            ss_abs += e * e;
        }
    }
    out.ss_total = ss_t;
    out.ss_subject = ss_s;
    out.ss_ab_error = ss_abs;
    const double df_err = dn - 1.0;
    out.a = make_effect(ss_a, ss_as, 1.0, df_err, ss_t);
    out.b = make_effect(ss_b, ss_bs, 1.0, df_err, ss_t);
    out.ab = make_effect(ss_ab, ss_abs, 1.0, df_err, ss_t);
    return out;
}

struct Anova1 {
    int n = 0;
    double ss_total = 0.0;
    double ss_subject = 0.0;
    Effect effect;
};

/// One-way within-subjects ANOVA, participant x 2 levels.
inline Anova1 one_way_rm_anova(std::span<const std::array<double, 2>> rows) {
    const int n = static_cast<int>(rows.size());
    if (n < 2) throw ValidationError("one_way_rm_anova: need at least 2 participants");
    const double dn = n;
    double grand = 0.0;
    std::array<double, 2> ml{};
    for (const auto& r : rows) {
        if (!std::isfinite(r[0]) || !std::isfinite(r[1])) throw ValidationError("one_way_rm_anova: missing cell");
        grand += r[0] + r[1];
        ml[0] += r[0] / dn;
        ml[1] += r[1] / dn;
    }
    grand /= 2.0 * dn;
    double ss_t = 0, ss_s = 0, ss_e = 0, ss_l = 0;
    for (int k = 0; k < 2; ++k) ss_l += dn * (ml[k] - grand) * (ml[k] - grand);
    for (const auto& r : rows) {
        const double mi = (r[0] + r[1]) / 2.0;
        ss_s += 2.0 * (mi - grand) * (mi - grand);
        for (int k = 0; k < 2; ++k) {
            ss_t += (r[k] - grand) * (r[k] - grand);
            const double e = r[k] - mi - ml[k] + grand;
            ss_e += e * e;
        }
    }
    Anova1 out;
    out.n = n;
    out.ss_total = ss_t;
    out.ss_subject = ss_s;
    out.effect = make_effect(ss_l, ss_e, 1.0, dn - 1.0, ss_t);
    return out;
}

struct PairedT {
    double t = 0.0;
    double df = 0.0;
    double mean_difference = 0.0;
    double p_raw = 1.0;
    double p_adjusted = 1.0;  // Bonferroni
    bool degenerate = false;  // differences have zero variance
};

inline PairedT paired_t(std::span<const std::pair<double, double>> pairs, int comparisons = 1) {
    if (pairs.size() < 2) throw ValidationError("paired_t: need at least 2 pairs");
    if (comparisons < 1) throw ValidationError("paired_t: comparison count must be >= 1");
    std::vector<double> d;
    d.reserve(pairs.size());
    for (const auto& [a, b] : pairs) d.push_back(a - b);
    PairedT r;
    r.df = static_cast<double>(d.size() - 1);
    r.mean_difference = mean(d);
    const double sd = stddev(d);
    if (sd <= 1e-12 * std::max(1.0, std::abs(r.mean_difference))) {
        r.degenerate = true;
        r.t = r.mean_difference == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
        r.p_raw = r.mean_difference == 0.0 ? 1.0 : 0.0;
    } else {
        r.t = r.mean_difference / (sd / std::sqrt(static_cast<double>(d.size())));
        r.p_raw = t_two_sided(r.t, r.df);
    }
    r.p_adjusted = std::min(1.0, comparisons * r.p_raw);
    return r;
}

/// Post-hoc paired comparisons, each Bonferroni-adjusted for `m` tests.
inline std::vector<PairedT> paired_t_bonferroni(std::span<const std::vector<std::pair<double, double>>> comparisons,
                                                int m) {
    std::vector<PairedT> out;
    out.reserve(comparisons.size());
    for (const auto& c : comparisons) out.push_back(paired_t(c, m));
    return out;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit linear_regression(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ValidationError("linear_regression: size mismatch");
    if (xs.size() < 2) throw ValidationError("linear_regression: need at least 2 points");
    const double mx = mean(xs);
    const double my = mean(ys);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) throw ValidationError("linear_regression: x has no spread");
    LinearFit f;
    f.n = xs.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

}  // namespace proprio::stats
