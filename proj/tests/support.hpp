#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "proprio/config.hpp"
#include "proprio/participant_io.hpp"
#include "proprio/rng.hpp"
#include "proprio/session_log.hpp"

namespace proprio::testing {

/// Default config with every noise source switched off.
inline SessionConfig noise_free_config() {
    SessionConfig cfg;
    cfg.device.skin.sensor_noise_sigma = 0.0;
    cfg.device.skin.quantization_step = 0.0;
    cfg.cohort.weber_fraction = 0.0;
    cfg.cohort.memory_noise_deg = 0.0;
    cfg.cohort.detection_sd_n = 0.0;
    cfg.cohort.comfort_sd_n = 0.0;
    cfg.cohort.policy.initial_uncertainty_n = 0.0;
    cfg.cohort.policy.uncertainty_floor_n = 0.0;
    return cfg;
}

/// Participant driven by a callback; handy for scripted edge cases.
class ScriptedIo final : public ParticipantIo {
public:
    explicit ScriptedIo(std::function<Action(const Observation&)> fn) : fn_(std::move(fn)) {}
    Action poll(const Observation& obs) override { return fn_(obs); }
    void on_session_end(SessionStatus s) override { ended = s; }

    std::optional<SessionStatus> ended;

private:
    std::function<Action(const Observation&)> fn_;
};

/// Calibration script: detects at `detect[rep]` N, reports discomfort at
/// `comfort` N, then disconnects once calibration is complete.
inline std::function<Action(const Observation&)> calibration_script(std::vector<double> detect, double comfort) {
    return [detect = std::move(detect), comfort](const Observation& o) {
        if (o.phase != Phase::Calibration) return Action::Disconnect;
        const auto rep = static_cast<std::size_t>(o.calibration_reps_done);
        if (o.prompt == Prompt::CalibrationDetection && rep < detect.size() && o.skin_force_n >= detect[rep])
            return Action::Detection;
        if (o.prompt == Prompt::CalibrationComfort && o.skin_force_n >= comfort) return Action::Comfort;
        return Action::None;
    };
}

/// Doubles for round-trip checks: interval ends, non-terminating binary
/// fractions and plain uniform draws.
inline double awkward_double(Rng& rng, double lo, double hi) {
    switch (rng.below(6)) {
        case 0: return lo;
        case 1: return hi;
        case 2: return lo + (hi - lo) / 3.0;
        case 3: return lo + std::nextafter(0.1, 1.0) * (hi - lo);
        default: return lo + rng.uniform01() * (hi - lo);
    }
}

/// Random but structurally valid session log.
inline SessionLog random_log(Rng& rng) {
    static const char* ids[] = {"P001", "p-7", "subject_12", "X"};
    SessionHeader h;
    h.participant_id = ids[rng.below(4)];
    h.seed = rng.next_u64();
    h.group = rng.coin() ? Group::HapticFirst : Group::NoHapticFirst;
    h.config_hash = "cafe" + std::to_string(rng.below(1000));
    h.status = static_cast<SessionStatus>(rng.below(4));
    SessionLog log(h);
    if (rng.coin()) {
        const double lo = awkward_double(rng, 0.0, 14.0);
        const double flo = awkward_double(rng, 0.0, 2.0);
        log.set_calibration({ActuatorPos::make(lo), ActuatorPos::make(lo + 1e-7 + rng.uniform01() * 15.0),
                             ForceN::make(flo), ForceN::make(flo + 0.5 + rng.uniform01() * 10.0),
                             3 + static_cast<int>(rng.below(3))});
    }
    const auto reps = rng.below(5);
    for (std::uint64_t i = 0; i < reps; ++i)
        log.append(CalibrationRep{awkward_double(rng, 0, 30), awkward_double(rng, 0, 30), awkward_double(rng, 0, 15),
                                  awkward_double(rng, 0, 15)});
    const auto trials = rng.below(40);
    for (std::uint64_t i = 0; i < trials; ++i) {
        TrialRecord t;
        t.phase = static_cast<Phase>(2 + rng.below(5));
        t.condition = Condition{rng.coin(), rng.coin()};
        t.block_index = static_cast<int>(rng.below(4));
        t.trial_index = static_cast<int>(rng.below(10));
        t.target = kCanonicalAngles[rng.below(10)];
        t.final_angle = awkward_double(rng, kMinAngle, kMaxAngle);
        t.signed_error = t.final_angle - t.target;
        t.duration = awkward_double(rng, 0.0, 120.0);
        t.key_presses = static_cast<int>(rng.below(80));
        t.steady_force = awkward_double(rng, 0.0, 15.0);
        log.append(t);
    }
    std::uint64_t tick = 0;
    const auto events = rng.below(60);
    for (std::uint64_t i = 0; i < events; ++i) {
        tick += 1 + rng.below(500);
        log.append(EventRecord{tick, static_cast<double>(tick) * 0.01, static_cast<Action>(1 + rng.below(7))});
    }
    double t = 0.0;
    const auto samples = rng.below(300);
    for (std::uint64_t i = 0; i < samples; ++i) {
        t += 0.01;
        SampleRecord s;
        s.t = t;
        s.actuator_pos = awkward_double(rng, 0.0, 30.0);
        s.commanded_pos = awkward_double(rng, 0.0, 30.0);
        s.force = rng.below(10) == 0 ? -0.0 : awkward_double(rng, 0.0, 45.0);
        s.arm_angle = awkward_double(rng, kMinAngle, kMaxAngle);
        s.phase = static_cast<Phase>(rng.below(7));
        if (rng.coin()) s.condition = Condition{rng.coin(), rng.coin()};
        log.append(s);
    }
    return log;
}

}  // namespace proprio::testing
