#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "proprio/protocol.hpp"
#include "proprio/session_log.hpp"
#include "proprio/stats.hpp"

namespace proprio::analysis {

inline double angle_error(double final_deg, double target_deg) { return final_deg - target_deg; }
inline double angle_error_magnitude(double final_deg, double target_deg) { return std::abs(final_deg - target_deg); }

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_se(std::span<const double> xs) { return {stats::mean(xs), stats::standard_error(xs)}; }

/// Per-participant mean |error| and signed error for one test condition.
struct ParticipantCondition {
    double mean_abs = 0.0;
    double mean_signed = 0.0;
    double mean_force = 0.0;
    int trials = 0;
};

inline ParticipantCondition participant_condition(const SessionLog& log, Condition c) {
    ParticipantCondition out;
    for (const auto& t : log.trials()) {
        if (t.phase != Phase::Testing || t.condition != c) continue;
        out.mean_abs += std::abs(t.signed_error);
        out.mean_signed += t.signed_error;
        out.mean_force += t.steady_force;
        ++out.trials;
    }
    if (out.trials == 0)
        throw ValidationError("participant " + log.header().participant_id + " is missing condition " + c.code());
    out.mean_abs /= out.trials;
    out.mean_signed /= out.trials;
    out.mean_force /= out.trials;
    return out;
}

/// Subjective difficulty ratings keyed by participant and condition.
using DifficultyRatings = std::map<std::string, std::map<std::string, double>>;

/// Reads `participant_id,condition,rating` rows (header line required).
inline DifficultyRatings parse_difficulty_csv(std::istream& in, const std::string& source = "<difficulty>") {
    DifficultyRatings out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (n == 1) {
            if (line != "participant_id,condition,rating")
                throw LogParseError(source, n, "expected header 'participant_id,condition,rating'");
            continue;
        }
        const auto f = csv_detail::split(line);
        if (f.size() != 3) throw LogParseError(source, n, "expected 3 fields");
        if (!Condition::parse(f[1])) throw LogParseError(source, n, "unknown condition '" + std::string(f[1]) + "'");
        double v = 0.0;
        auto r = std::from_chars(f[2].data(), f[2].data() + f[2].size(), v);
        if (r.ec != std::errc{} || r.ptr != f[2].data() + f[2].size() || !std::isfinite(v))
            throw LogParseError(source, n, "bad rating '" + std::string(f[2]) + "'");
        out[std::string(f[0])][std::string(f[1])] = v;
    }
    if (n == 0) throw LogParseError(source, 0, "empty difficulty file");
    return out;
}

struct ConditionSummary {
    Condition condition;
    int n = 0;
    MeanSe abs_error;
    MeanSe signed_error;
    std::optional<MeanSe> difficulty;
};

/// Across-participant mean and SE per test condition, in display order.
inline std::vector<ConditionSummary> summarize_conditions(std::span<const SessionLog> logs,
                                                          const DifficultyRatings* difficulty = nullptr) {
    if (logs.empty()) throw ValidationError("no session logs to summarize");
    std::vector<ConditionSummary> out;
    for (const Condition c : kConditionsDisplayOrder) {
        std::vector<double> abs_v, signed_v, diff_v;
        for (const auto& log : logs) {
            const auto pc = participant_condition(log, c);
            abs_v.push_back(pc.mean_abs);
            signed_v.push_back(pc.mean_signed);
            if (difficulty) {
                auto p = difficulty->find(log.header().participant_id);
                if (p != difficulty->end()) {
                    auto r = p->second.find(c.code());
                    if (r != p->second.end()) diff_v.push_back(r->second);
                }
            }
        }
        ConditionSummary s{c, static_cast<int>(logs.size()), mean_se(abs_v), mean_se(signed_v), std::nullopt};
        if (!diff_v.empty()) s.difficulty = mean_se(diff_v);
        out.push_back(s);
    }
    return out;
}

/// Participant x condition table of mean |error|; cell index 2*a + b with
/// a = 0 for haptic, 1 for no haptic and b = 0 for visual, 1 for no visual.
inline std::vector<stats::Row2x2> error_table(std::span<const SessionLog> logs) {
    std::vector<stats::Row2x2> rows;
    for (const auto& log : logs) {
        stats::Row2x2 r{};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                r[static_cast<std::size_t>(2 * a + b)] = participant_condition(log, Condition{a == 0, b == 0}).mean_abs;
        rows.push_back(r);
    }
    return rows;
}

/// The angle-error tests: two-way ANOVA, one-way ANOVAs on haptics within
/// each visual level, and Bonferroni-corrected paired t-tests (m = 2).
struct ErrorStatistics {
    stats::Anova2x2 two_way;
    stats::Anova1 haptic_in_nv;
    stats::Anova1 haptic_in_v;
    stats::PairedT posthoc_nv;  // H nV vs nH nV
    stats::PairedT posthoc_v;   // H V vs nH V
};

inline ErrorStatistics error_statistics(std::span<const SessionLog> logs) {
    const auto rows = error_table(logs);
    ErrorStatistics s;
    s.two_way = stats::rm_anova_2x2(rows);
    std::vector<std::array<double, 2>> nv, v;
    std::vector<std::pair<double, double>> nv_pairs, v_pairs;
    for (const auto& r : rows) {
        nv.push_back({r[1], r[3]});
        v.push_back({r[0], r[2]});
        nv_pairs.emplace_back(r[1], r[3]);
        v_pairs.emplace_back(r[0], r[2]);
    }
    s.haptic_in_nv = stats::one_way_rm_anova(nv);
    s.haptic_in_v = stats::one_way_rm_anova(v);
    s.posthoc_nv = stats::paired_t(nv_pairs, 2);
    s.posthoc_v = stats::paired_t(v_pairs, 2);
    return s;
}

struct AngleRow {
    Condition condition;
    double target = 0.0;
    MeanSe abs_error;
    MeanSe signed_error;
    MeanSe force;
};

/// Error and force by condition and target angle; each participant's
/// trials at that angle are averaged first.
inline std::vector<AngleRow> by_angle(std::span<const SessionLog> logs) {
    if (logs.empty()) throw ValidationError("no session logs");
    std::vector<AngleRow> out;
    for (const Condition c : kConditionsDisplayOrder) {
        for (const double target : kCanonicalAngles) {
            std::vector<double> a, s, f;
            for (const auto& log : logs) {
                double sa = 0, ss = 0, sf = 0;
                int k = 0;
                for (const auto& t : log.trials()) {
                    if (t.phase != Phase::Testing || t.condition != c || t.target != target) continue;
                    sa += std::abs(t.signed_error);
                    ss += t.signed_error;
                    sf += t.steady_force;
                    ++k;
                }
                if (k == 0) continue;
                a.push_back(sa / k);
                s.push_back(ss / k);
                f.push_back(sf / k);
            }
            if (a.empty()) continue;
            out.push_back({c, target, mean_se(a), mean_se(s), mean_se(f)});
        }
    }
    return out;
}

struct ForceFit {
    Condition condition;
    bool applicable = false;  // false for conditions without haptic output
    stats::LinearFit fit;
    double mean_force = 0.0;
    std::size_t trials = 0;
};

/// Least-squares steady force against target angle over all test trials of
/// `condition`.
inline ForceFit force_angle_regression(std::span<const SessionLog> logs, Condition condition) {
    std::vector<double> x, y;
    for (const auto& log : logs)
        for (const auto& t : log.trials())
            if (t.phase == Phase::Testing && t.condition == condition) {
                x.push_back(t.target);
                y.push_back(t.steady_force);
            }
    if (x.empty()) throw ValidationError("no test trials for condition " + condition.code());
    ForceFit out;
    out.condition = condition;
    out.trials = x.size();
    out.mean_force = stats::mean(y);
    if (!condition.haptic) return out;
    if (std::set<double>(x.begin(), x.end()).size() < 3)
        throw ValidationError("force regression needs at least 3 distinct target angles");
    out.applicable = true;
    out.fit = stats::linear_regression(x, y);
    return out;
}

struct LearningPoint {
    int block = 0;  // 1-based
    MeanSe abs_error;
    MeanSe speed;   // targets per minute
};

/// Practice-phase error and completion speed per block.
inline std::vector<LearningPoint> learning_curve(std::span<const SessionLog> logs, int blocks = 4) {
    if (logs.empty()) throw ValidationError("no session logs");
    std::vector<LearningPoint> out;
    for (int b = 0; b < blocks; ++b) {
        std::vector<double> err, speed;
        for (const auto& log : logs) {
            double se = 0, dur = 0;
            int k = 0;
            for (const auto& t : log.trials()) {
                if (t.phase != Phase::Practice || t.block_index != b) continue;
                se += std::abs(t.signed_error);
                dur += t.duration;
                ++k;
            }
            if (k == 0)
                throw ValidationError("participant " + log.header().participant_id + " is missing practice block " +
                                      std::to_string(b + 1));
            err.push_back(se / k);
            speed.push_back(dur > 0 ? k / (dur / 60.0) : 0.0);
        }
        out.push_back({b + 1, mean_se(err), mean_se(speed)});
    }
    return out;
}

// ---- tables ----------------------------------------------------------------

namespace detail {

inline void cell(std::string& out, double v) {
    out += ',';
    csv_detail::put(out, v);
}

inline void cell(std::string& out, const MeanSe& m) {
    cell(out, m.mean);
    cell(out, m.se);
}

}  // namespace detail

/// Per-participant calibration means plus a cohort mean/SE row.
inline std::string calibration_table(std::span<const SessionLog> logs) {
    std::string out = "participant_id,min_pos_mm,max_pos_mm,min_force_n,max_force_n,repetitions\n";
    std::array<std::vector<double>, 4> cols;
    for (const auto& log : logs) {
        if (!log.calibration()) continue;
        const auto& c = *log.calibration();
        out += log.header().participant_id;
        const std::array<double, 4> v{c.min_pos.value(), c.max_pos.value(), c.min_force.value(), c.max_force.value()};
        for (std::size_t i = 0; i < 4; ++i) {
            detail::cell(out, v[i]);
            cols[i].push_back(v[i]);
        }
        out += ',';
        csv_detail::put_int(out, c.repetitions);
        out += '\n';
    }
    if (!cols[0].empty()) {
        for (const char* label : {"mean", "se"}) {
            out += label;
            for (const auto& col : cols)
                detail::cell(out, std::string_view(label) == "mean" ? stats::mean(col) : stats::standard_error(col));
            out += ",\n";
        }
    }
    return out;
}

inline std::string summary_table(std::span<const ConditionSummary> rows) {
    const bool with_difficulty = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.difficulty.has_value(); });
    std::string out = "condition,n,mean_abs_error_deg,se_abs_error_deg,mean_signed_error_deg,se_signed_error_deg";
    if (with_difficulty) out += ",mean_difficulty,se_difficulty";
    out += '\n';
    for (const auto& r : rows) {
        out += r.condition.label();
        out += ',';
        csv_detail::put_int(out, r.n);
        detail::cell(out, r.abs_error);
        detail::cell(out, r.signed_error);
        if (with_difficulty) {
            if (r.difficulty) {
                detail::cell(out, *r.difficulty);
            } else {
                out += ",,";
            }
        }
        out += '\n';
    }
    return out;
}

inline std::string stats_table(const ErrorStatistics& s) {
    std::string out = "test,effect,df1,df2,statistic,p,p_bonferroni,eta_squared_classical,degenerate\n";
    auto effect = [&](const char* test, const char* name, const stats::Effect& e) {
        out += test;
        out += ',';
        out += name;
        detail::cell(out, e.df1);
        detail::cell(out, e.df2);
        detail::cell(out, e.f);
        detail::cell(out, e.p);
        out += ',';
        detail::cell(out, e.eta_squared);
        out += e.degenerate ? ",1\n" : ",0\n";
    };
    auto ttest = [&](const char* name, const stats::PairedT& t) {
        out += "paired_t,";
        out += name;
        detail::cell(out, t.df);
        out += ',';
        detail::cell(out, t.t);
        detail::cell(out, t.p_raw);
        detail::cell(out, t.p_adjusted);
        out += t.degenerate ? ",,1\n" : ",,0\n";
    };
    effect("rm_anova_2x2", "haptic", s.two_way.a);
    effect("rm_anova_2x2", "visual", s.two_way.b);
    effect("rm_anova_2x2", "haptic_x_visual", s.two_way.ab);
    effect("rm_anova_1way_nV", "haptic", s.haptic_in_nv.effect);
    effect("rm_anova_1way_V", "haptic", s.haptic_in_v.effect);
    ttest("H_nV-nH_nV", s.posthoc_nv);
    ttest("H_V-nH_V", s.posthoc_v);
    return out;
}

inline std::string angle_table(std::span<const AngleRow> rows) {
    std::string out = "condition,target_deg,mean_abs_error_deg,se_abs_error_deg,mean_signed_error_deg,se_signed_error_deg\n";
    for (const auto& r : rows) {
        out += r.condition.label();
        detail::cell(out, r.target);
        detail::cell(out, r.abs_error);
        detail::cell(out, r.signed_error);
        out += '\n';
    }
    return out;
}

/// Mean force per angle followed by one fit row per condition.
inline std::string force_table(std::span<const AngleRow> rows, std::span<const ForceFit> fits) {
    std::string out = "condition,target_deg,mean_force_n,se_force_n\n";
    for (const auto& r : rows) {
        out += r.condition.label();
        detail::cell(out, r.target);
        detail::cell(out, r.force);
        out += '\n';
    }
    out += "\ncondition,applicable,slope_n_per_deg,intercept_n,r_squared,mean_force_n,trials\n";
    for (const auto& f : fits) {
        out += f.condition.label();
        out += f.applicable ? ",1" : ",0";
        if (f.applicable) {
            detail::cell(out, f.fit.slope);
            detail::cell(out, f.fit.intercept);
            detail::cell(out, f.fit.r_squared);
        } else {
            out += ",,,";
        }
        detail::cell(out, f.mean_force);
        out += ',';
        csv_detail::put_int(out, f.trials);
        out += '\n';
    }
    return out;
}

inline std::string learning_table(std::span<const LearningPoint> pts) {
    std::string out = "block,mean_abs_error_deg,se_abs_error_deg,mean_speed_per_min,se_speed_per_min\n";
    for (const auto& p : pts) {
        csv_detail::put_int(out, p.block);
        detail::cell(out, p.abs_error);
        detail::cell(out, p.speed);
        out += '\n';
    }
    return out;
}

}  // namespace proprio::analysis
