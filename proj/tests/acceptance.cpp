// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/anova_oracle.hpp"
#include "proprio/analysis.hpp"
#include "proprio/device.hpp"
#include "proprio/mapping.hpp"
#include "proprio/session.hpp"
#include "proprio/stats.hpp"
#include "support.hpp"

using namespace proprio;

namespace {

// tolerances and budgets
constexpr double kRoundTripTol = 1e-9;
constexpr int kMappingPairs = 1'000'000;
constexpr double kMappingBudgetS = 1.0;
constexpr int kControlSequences = 100'000;
constexpr int kControlSteps = 20;
constexpr double kSettleBand = 0.02;
constexpr double kSettleLimitS = 1.0;
constexpr double kProtocolBudgetS = 10.0;
constexpr double kOracleTol = 1e-6;
constexpr double kIdentityTol = 1e-9;
constexpr int kMainCohort = 20;
constexpr std::uint64_t kMainSeed = 2024;
constexpr double kAlpha = 0.05;
constexpr double kVisualAbsMax = 2.0;
constexpr double kVisualSignedMax = 0.5;
constexpr double kMainBudgetS = 120.0;
constexpr double kForceR2Min = 0.99;
constexpr double kNoHapticForceMax = 1.0;
constexpr int kLearningCohort = 100;
constexpr std::uint64_t kLearningSeed = 77;
constexpr int kRoundTrips = 100;

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

Outcome mapping() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1);
    const CalibrationResult c{ActuatorPos::make(8.27), ActuatorPos::make(12.28), ForceN::make(0.41), ForceN::make(6.42), 3};
    Outcome o;
    o.pass = angle_to_position(180.0, c).value() == 8.27 && angle_to_position(45.0, c).value() == 12.28;
    double worst = 0;
    for (int i = 0; i < kMappingPairs; ++i) {
        const double a1 = 45.0 + rng.uniform01() * 135.0, a2 = 45.0 + rng.uniform01() * 135.0;
        const double p1 = angle_to_position(a1, c).value(), p2 = angle_to_position(a2, c).value();
        worst = std::max(worst, std::abs(position_to_angle(ActuatorPos::make(p1), c).value() - a1));
        if ((a1 < a2 && !(p1 > p2)) || (a1 > a2 && !(p1 < p2))) o.pass = false;
    }
    const double t = seconds_since(t0);
    o.pass = o.pass && worst <= kRoundTripTol && t < kMappingBudgetS;
    o.detail = fmt("endpoints exact, 1e6 pairs monotone, max round-trip error %.2e deg, %.3f s", worst, t);
    return o;
}

Outcome fsm() {
    using M = DeviceMode;
    using E = DeviceEvent;
    const std::map<std::pair<M, E>, M> table = {
        {{M::Calibration, E::StartCalibration}, M::Calibration}, {{M::Calibration, E::CalibrationDone}, M::Runtime},
        {{M::Calibration, E::SafetyPressed}, M::EStop},          {{M::Calibration, E::OperatorReset}, M::Calibration},
        {{M::Runtime, E::StartCalibration}, M::Calibration},     {{M::Runtime, E::CalibrationDone}, M::Runtime},
        {{M::Runtime, E::SafetyPressed}, M::EStop},              {{M::Runtime, E::OperatorReset}, M::Runtime},
        {{M::EStop, E::StartCalibration}, M::EStop},             {{M::EStop, E::CalibrationDone}, M::EStop},
        {{M::EStop, E::SafetyPressed}, M::EStop},                {{M::EStop, E::OperatorReset}, M::Calibration},
    };
    int ok = 0;
    for (const auto& [k, to] : table) ok += fsm_transition(k.first, k.second) == to;
    return {ok == 12 && table.size() == 12, fmt("%.0f/12 transitions match; EStop left only by operator reset", ok)};
}

Outcome control_loop() {
    DeviceConfig quiet;
    quiet.skin.sensor_noise_sigma = 0.0;
    quiet.skin.quantization_step = 0.0;
    Rng rng(1);
    DeviceState s;
    s.mode = DeviceMode::Runtime;
    s.pos = ActuatorPos::make(5.0);
    s.target_pos = ActuatorPos::make(10.0);
    s.pid.gains = quiet.pid;
    double last_outside = 0;
    for (int i = 0; i < 300; ++i) {
        s = step_actuator(s, quiet, quiet.dt, rng);
        if (std::abs(s.pos.value() - 10.0) > kSettleBand * 5.0) last_outside = s.clock;
    }

    const DeviceConfig cfg;
    Rng gen(2024), sensor(7);
    double worst_step = 0, lo = 1e9, hi = -1e9;
    for (int seq = 0; seq < kControlSequences; ++seq) {
        DeviceState d;
        d.mode = DeviceMode::Runtime;
        d.pos = ActuatorPos::make(gen.uniform01() * 30.0);
        d.pid.gains = cfg.pid;
        for (int k = 0; k < kControlSteps; ++k) {
            if (k == 0 || gen.below(4) == 0) d.target_pos = ActuatorPos::make(gen.uniform01() * 30.0);
            const double before = d.pos.value();
            d = step_actuator(d, cfg, cfg.dt, sensor);
            worst_step = std::max(worst_step, std::abs(d.pos.value() - before));
            lo = std::min(lo, d.pos.value());
            hi = std::max(hi, d.pos.value());
        }
    }
    const bool pass = last_outside < kSettleLimitS && lo >= 0.0 && hi <= 30.0 && worst_step <= cfg.max_speed * cfg.dt + 1e-12;
    return {pass, fmt("5 mm step settled (2%%) at %.2f s; positions in [%.3f, %.3f] mm; max step %.4f mm", last_outside, lo,
                      hi, worst_step)};
}

Outcome protocol_counts() {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::string why;
    for (int i = 0; i < 2; ++i) {  // one participant per group
        const auto log = simulate_participant(SessionConfig{}, 5, i);
        std::map<Phase, int> n;
        for (const auto& t : log.trials()) ++n[t.phase];
        if (n[Phase::Target] != 20 || n[Phase::HapticFeedback] != 10 || n[Phase::Practice] != 40 || n[Phase::Testing] != 40)
            pass = false, why += " counts";
        std::vector<double> hf;
        std::map<std::tuple<Phase, std::string, int>, std::vector<double>> blocks;
        std::vector<std::string> test_order;
        for (const auto& t : log.trials()) {
            if (t.phase == Phase::HapticFeedback) hf.push_back(t.target);
            blocks[{t.phase, t.condition.code(), t.block_index}].push_back(t.target);
            if (t.phase == Phase::Testing && (test_order.empty() || test_order.back() != t.condition.code()))
                test_order.push_back(t.condition.code());
        }
        for (std::size_t k = 1; k < hf.size(); ++k)
            if (!(hf[k] < hf[k - 1])) pass = false, why += " hf-order";
        const std::set<double> canon(kCanonicalAngles.begin(), kCanonicalAngles.end());
        for (const auto& [key, v] : blocks)
            if (v.size() != 10 || std::set<double>(v.begin(), v.end()) != canon) pass = false, why += " permutation";
        const std::vector<std::string> expect =
            i == 0 ? std::vector<std::string>{"H_nV", "H_V", "nH_nV", "nH_V"} : std::vector<std::string>{"nH_nV", "nH_V", "H_nV", "H_V"};
        if (test_order != expect) pass = false, why += " test-order";
    }
    const double t = seconds_since(t0);
    pass = pass && t < kProtocolBudgetS;
    return {pass, fmt("both groups: 20/10/40/40 trials, descending HF, permuted blocks, nV before V; %.2f s", t) + why};
}

Outcome determinism() {
    const auto a = to_csv(simulate_participant(SessionConfig{}, 42, 0));
    const auto b = to_csv(simulate_participant(SessionConfig{}, 42, 0));
    const auto c = to_csv(simulate_participant(SessionConfig{}, 43, 0));
    return {a == b && a != c, fmt("repeat run byte-identical (%.0f bytes); different seed differs", static_cast<double>(a.size()))};
}

std::vector<std::vector<std::string>> read_csv(const std::string& name) {
    std::ifstream in(std::string(PROPRIO_TEST_DATA) + "/" + name);
    if (!in) throw std::runtime_error("missing fixture " + name);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        rows.push_back(f);
    }
    return rows;
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

Outcome statistics_oracle() {
    double worst_oracle = 0, worst_frozen = 0, worst_ft = 0, worst_ss = 0, worst_inv = 0;
    std::map<int, std::vector<stats::Row2x2>> data;
    for (int k = 1; k <= 3; ++k) {
        for (const auto& r : read_csv("anova_dataset_" + std::to_string(k) + ".csv"))
            data[k].push_back({std::stod(r[1]), std::stod(r[2]), std::stod(r[3]), std::stod(r[4])});
        const auto& rows = data[k];
        const auto a = stats::rm_anova_2x2(rows);
        auto rel = [](double x, double y) { return std::abs(x - y) / std::max(1.0, std::abs(y)); };
        worst_oracle = std::max({worst_oracle, rel(a.a.f, oracle::main_a(rows).f), rel(a.b.f, oracle::main_b(rows).f),
                                 rel(a.ab.f, oracle::interaction(rows).f), rel(a.ss_total, oracle::ss_total(rows))});
        const double parts = a.ss_subject + a.a.ss + a.a.ss_error + a.b.ss + a.b.ss_error + a.ab.ss + a.ab.ss_error;
        worst_ss = std::max(worst_ss, std::abs(parts - a.ss_total) / a.ss_total);
        for (std::size_t b : {0u, 1u}) {
            std::vector<std::array<double, 2>> two;
            std::vector<std::pair<double, double>> pairs;
            for (const auto& r : rows) {
                two.push_back({r[b], r[2 + b]});
                pairs.emplace_back(r[b], r[2 + b]);
            }
            const auto f = stats::one_way_rm_anova(two).effect.f;
            const auto t = stats::paired_t(pairs).t;
            worst_ft = std::max(worst_ft, std::abs(f - t * t) / f);
        }
        auto moved = rows;
        for (auto& r : moved)
            for (double& y : r) y = 3.7 * y - 12.5;
        const auto m = stats::rm_anova_2x2(moved);
        worst_inv = std::max({worst_inv, rel(m.a.f, a.a.f), rel(m.b.f, a.b.f), rel(m.ab.f, a.ab.f)});
    }
    for (const auto& r : read_csv("anova_frozen.csv")) {
        const auto& rows = data.at(std::stoi(r[0]));
        double got = 0;
        if (r[1] == "two_way") {
            const auto a = stats::rm_anova_2x2(rows);
            got = r[2] == "haptic" ? a.a.f : r[2] == "visual" ? a.b.f : a.ab.f;
        } else {
            const std::size_t b = r[1].find("_nV") != std::string::npos ? 1 : 0;
            std::vector<std::array<double, 2>> two;
            std::vector<std::pair<double, double>> pairs;
            for (const auto& row : rows) {
                two.push_back({row[b], row[2 + b]});
                pairs.emplace_back(row[b], row[2 + b]);
            }
            got = r[1].rfind("one_way", 0) == 0 ? stats::one_way_rm_anova(two).effect.f : stats::paired_t(pairs).t;
        }
        const double want = std::stod(r[3]);
        worst_frozen = std::max(worst_frozen, std::abs(got - want) / std::max(1.0, std::abs(want)));
    }
    const bool pass = worst_oracle <= kOracleTol && worst_frozen <= kOracleTol && worst_ft <= kIdentityTol &&
                      worst_ss <= kIdentityTol && worst_inv <= kOracleTol;
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "3 datasets n=14: oracle %.1e, statsmodels/scipy %.1e, F-t^2 %.1e, SS sum %.1e, affine invariance %.1e",
                  worst_oracle, worst_frozen, worst_ft, worst_ss, worst_inv);
    return {pass, buf};
}

Outcome main_effect() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto logs = simulate_cohort(SessionConfig{}, kMainSeed, kMainCohort);
    const auto summary = analysis::summarize_conditions(logs);
    const auto st = analysis::error_statistics(logs);
    std::map<std::string, analysis::ConditionSummary> by;
    for (const auto& s : summary) by[s.condition.code()] = s;
    const double h_nv = by["H_nV"].abs_error.mean, nh_nv = by["nH_nV"].abs_error.mean;
    const double p = st.haptic_in_nv.effect.p;
    bool pass = h_nv < nh_nv && p < kAlpha;
    double worst_abs = 0, worst_signed = 0;
    for (const char* c : {"H_V", "nH_V"}) {
        worst_abs = std::max(worst_abs, by[c].abs_error.mean);
        worst_signed = std::max(worst_signed, std::abs(by[c].signed_error.mean));
    }
    const double t = seconds_since(t0);
    pass = pass && worst_abs <= kVisualAbsMax && worst_signed <= kVisualSignedMax && t < kMainBudgetS;
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "n=%d: |err| H nV %.2f < nH nV %.2f deg, one-way p=%.2g; V |err| max %.2f deg, |signed| max %.2f deg; %.1f s",
                  kMainCohort, h_nv, nh_nv, p, worst_abs, worst_signed, t);
    return {pass, buf};
}

Outcome force_linearity() {
    const auto cfg = testing::noise_free_config();
    std::vector<SessionLog> logs;
    for (int i = 0; i < 4; ++i) logs.push_back(simulate_participant(cfg, 8, i));
    bool pass = true;
    std::string detail;
    for (const Condition c : {Condition{true, false}, Condition{true, true}}) {
        const auto f = analysis::force_angle_regression(logs, c);
        pass = pass && f.applicable && f.fit.slope < 0 && f.fit.r_squared > kForceR2Min;
        detail += c.label() + fmt(" slope %.4f N/deg R2 %.4f; ", f.fit.slope, f.fit.r_squared);
    }
    for (const Condition c : {Condition{false, false}, Condition{false, true}}) {
        const auto f = analysis::force_angle_regression(logs, c);
        pass = pass && f.mean_force < kNoHapticForceMax;
        detail += c.label() + fmt(" mean %.3f N; ", f.mean_force);
    }
    detail.resize(detail.size() - 2);
    return {pass, detail};
}

Outcome learning() {
    const auto logs = simulate_cohort(SessionConfig{}, kLearningSeed, kLearningCohort);
    const auto pts = analysis::learning_curve(logs);
    const bool pass = pts[1].abs_error.mean >= pts[2].abs_error.mean && pts[2].abs_error.mean >= pts[3].abs_error.mean;
    char buf[256];
    std::snprintf(buf, sizeof buf, "n=%d practice |err| by block: %.2f, %.2f, %.2f, %.2f deg", kLearningCohort,
                  pts[0].abs_error.mean, pts[1].abs_error.mean, pts[2].abs_error.mean, pts[3].abs_error.mean);
    return {pass, buf};
}

Outcome log_round_trip() {
    Rng rng(31337);
    int ok = 0;
    for (int i = 0; i < kRoundTrips; ++i) {
        const auto log = testing::random_log(rng);
        std::istringstream in(to_csv(log));
        ok += parse_csv(in) == log;
    }
    return {ok == kRoundTrips, fmt("%.0f/%.0f randomized logs identical after export/import", ok, kRoundTrips)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> checks = {
        {"mapping", mapping},
        {"fsm", fsm},
        {"control_loop", control_loop},
        {"protocol_counts", protocol_counts},
        {"determinism", determinism},
        {"statistics_oracle", statistics_oracle},
        {"main_effect", main_effect},
        {"force_linearity", force_linearity},
        {"learning", learning},
        {"log_round_trip", log_round_trip},
    };
    int failed = 0;
    for (const auto& [name, fn] : checks) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(checks.size()) - failed, checks.size());
    return failed ? 1 : 0;
}
