#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <numeric>
#include <optional>

#include "proprio/config.hpp"
#include "proprio/device.hpp"
#include "proprio/mapping.hpp"
#include "proprio/participant_io.hpp"
#include "proprio/participant_sim.hpp"
#include "proprio/protocol.hpp"
#include "proprio/session_log.hpp"
#include "proprio/virtual_arm.hpp"

namespace proprio {

/// Runs one complete session: calibration dialogue, the learning phases and
/// the four test conditions, ticking the device at the control rate and
/// logging everything.
///
/// All waiting happens inside `tick()`, so the device is stepped every
/// control period no matter what the participant is doing.
class SessionRunner {
public:
    SessionRunner(SessionConfig cfg, ParticipantIo& io, TickPacer* pacer = nullptr)
        : cfg_(std::move(cfg)),
          io_(io),
          pacer_(pacer),
          plan_(build_session_plan(cfg_.seed, cfg_.group, cfg_.protocol.mixed_block)),
          device_(cfg_.device, make_stream(cfg_.seed, Stream::Sensor)),
          arm_(make_stream(cfg_.seed, Stream::Arm)) {
        cfg_.validate();
        const auto window = static_cast<std::size_t>(std::lround(cfg_.protocol.steady_window_s / cfg_.device.dt));
        steady_capacity_ = std::max<std::size_t>(1, window);
    }

    const SessionPlan& plan() const { return plan_; }
    const Device& device() const { return device_; }

    SessionLog run() {
        log_ = SessionLog(SessionHeader{kLogSchemaVersion, cfg_.participant_id, cfg_.seed, cfg_.group, config_hash(cfg_),
                                        SessionStatus::Incomplete});
        SessionStatus status = SessionStatus::Complete;
        try {
            const CalibrationResult calib = run_calibration();
            log_.set_calibration(calib);
            mapping_.emplace(calib);
            for (std::size_t i = 0; i < plan_.phases.size(); ++i) {
                instructions();
                run_phase(plan_.phases[i]);
            }
            drive_ = Drive::Park;
        } catch (const Abort& a) {
            status = a.status;
        }
        log_.set_status(status);
        io_.on_session_end(status);
        return std::move(log_);
    }

private:
    struct Abort {
        SessionStatus status;
    };

    enum class Drive { Park, FollowArm, FixedAngle, Manual };

    /// Presentation state for one tick.
    struct View {
        Phase phase = Phase::Calibration;
        std::optional<Condition> condition;
        Prompt prompt = Prompt::None;
        bool input_enabled = false;
        int block = -1;
        int trial = -1;
        std::optional<double> target;
        bool arm_visible = false;
        std::optional<double> countdown;
    };

    double now() const { return static_cast<double>(tick_) * cfg_.device.dt; }

    std::uint64_t ticks_for(double seconds) const {
        return static_cast<std::uint64_t>(std::llround(seconds / cfg_.device.dt));
    }

    Action tick(const View& v) {
        switch (drive_) {
            case Drive::Park: device_.park(); break;
            case Drive::FollowArm: device_.set_target(mapping_->to_position(arm_.angle)); break;
            case Drive::FixedAngle: device_.set_target(mapping_->to_position(AngleDeg::make(fixed_angle_))); break;
            case Drive::Manual: break;
        }
        if (pacer_) pacer_->wait_for_tick(tick_ + 1, cfg_.device.dt);
        device_.step();
        ++tick_;
        const auto& ds = device_.state();

        steady_.push_back(ds.measured_force.value());
        if (steady_.size() > steady_capacity_) steady_.pop_front();

        if (tick_ % static_cast<std::uint64_t>(cfg_.logging.sample_decimation) == 0) {
            log_.append(SampleRecord{now(), ds.pos.value(), ds.target_pos.value(), ds.measured_force.value(),
                                     arm_.angle.value(), v.phase, v.condition});
        }

        Observation obs;
        obs.tick = tick_;
        obs.time_s = now();
        obs.phase = v.phase;
        obs.condition = v.condition;
        obs.prompt = v.prompt;
        obs.input_enabled = v.input_enabled;
        obs.block_index = v.block;
        obs.trial_index = v.trial;
        obs.target_deg = v.target;
        if (v.arm_visible) obs.arm_deg = arm_.angle.value();
        obs.countdown_s = v.countdown;
        obs.calibration_reps_done = calibration_reps_done_;
        obs.calibration_reps_required = cfg_.protocol.calibration.repetitions;
        obs.skin_force_n = ds.true_force.value();

        const Action a = io_.poll(obs);
        if (a == Action::None) return a;
        log_.append(EventRecord{tick_, now(), a});
        if (a == Action::Safety) {
            device_.handle(DeviceEvent::SafetyPressed);
            throw Abort{SessionStatus::AbortedSafety};
        }
        if (a == Action::Disconnect) throw Abort{SessionStatus::Incomplete};
        return a;
    }

    double steady_force() const {
        if (steady_.empty()) return 0.0;
        return std::accumulate(steady_.begin(), steady_.end(), 0.0) / static_cast<double>(steady_.size());
    }

    // ---- calibration -------------------------------------------------------

    void retract(const View& v) {
        drive_ = Drive::Manual;
        device_.park();
        View w = v;
        w.prompt = Prompt::Retracting;
        w.input_enabled = false;
        do {
            tick(w);
        } while (std::abs(device_.state().pos.value() - cfg_.device.park_pos) > 0.05);
    }

    CalibrationResult run_calibration() {
        const auto& proc = cfg_.protocol.calibration;
        const View base{.phase = Phase::Calibration};
        std::vector<CalibrationRep> reps;
        int attempts = 0;

        while (static_cast<int>(reps.size()) < proc.repetitions) {
            if (attempts++ >= proc.max_attempts) throw Abort{SessionStatus::CalibrationFailed};
            retract(base);

            double commanded = cfg_.device.park_pos;
            std::optional<std::pair<double, double>> detected;  // (pos, force)
            while (true) {
                commanded = std::min(commanded + proc.ramp_rate_mm_s * cfg_.device.dt, kStroke);
                device_.set_target(ActuatorPos::make(commanded));
                View v = base;
                v.prompt = detected ? Prompt::CalibrationComfort : Prompt::CalibrationDetection;
                v.input_enabled = true;
                const Action a = tick(v);
                const auto& ds = device_.state();
                if (a == Action::Detection && !detected) {
                    detected = {ds.pos.value(), ds.measured_force.value()};
                } else if (a == Action::Comfort) {
                    if (detected) {
                        CalibrationRep rep{detected->first, ds.pos.value(), detected->second, ds.measured_force.value()};
                        reps.push_back(rep);
                        log_.append(rep);
                        ++calibration_reps_done_;
                    }
                    break;  // out-of-order signal: discard and rerun
                }
                const bool at_limit = ds.measured_force.value() >= cfg_.device.max_applied_force ||
                                      (commanded >= kStroke && std::abs(ds.pos.value() - kStroke) < 0.05);
                if (at_limit) break;
            }
        }

        auto mean = [&](auto field) {
            double s = 0.0;
            for (const auto& r : reps) s += r.*field;
            return s / static_cast<double>(reps.size());
        };
        CalibrationResult result;
        try {
            result = CalibrationResult{ActuatorPos::make(mean(&CalibrationRep::min_pos)),
                                       ActuatorPos::make(mean(&CalibrationRep::max_pos)),
                                       ForceN::make(mean(&CalibrationRep::min_force)),
                                       ForceN::make(mean(&CalibrationRep::max_force)), static_cast<int>(reps.size())};
            result.validate();
        } catch (const ValidationError&) {
            throw Abort{SessionStatus::CalibrationFailed};
        }
        device_.handle(DeviceEvent::CalibrationDone);
        retract(base);
        drive_ = Drive::Park;
        return result;
    }

    // ---- learning and testing ---------------------------------------------

    /// Between sections: actuator parked, no haptic output.
    void instructions() {
        drive_ = Drive::Park;
        View v{.phase = Phase::Instructions};
        v.prompt = Prompt::Instructions;
        v.input_enabled = cfg_.protocol.confirm_gated_pauses;
        if (cfg_.protocol.confirm_gated_pauses) {
            while (tick(v) != Action::Confirm) {
            }
        } else {
            for (std::uint64_t n = ticks_for(cfg_.protocol.instruction_s); n > 0; --n) tick(v);
        }
    }

    void handle_key(Action a, int* counter) {
        if (a != Action::Flex && a != Action::Extend) return;
        arm_ = apply_key(std::move(arm_), a == Action::Flex ? KeyDirection::Flex : KeyDirection::Extend);
        if (counter) ++*counter;
    }

    void run_phase(const PhasePlan& pp) {
        switch (pp.phase) {
            case Phase::Explore: {
                arm_ = reset(std::move(arm_));
                drive_ = Drive::FollowArm;
                View v{.phase = Phase::Explore, .condition = pp.condition, .prompt = Prompt::Explore, .input_enabled = true};
                v.arm_visible = true;
                const auto n = ticks_for(cfg_.protocol.explore_s);
                for (std::uint64_t i = 0; i < n; ++i) {
                    v.countdown = static_cast<double>(n - i) * cfg_.device.dt;
                    handle_key(tick(v), nullptr);
                }
                break;
            }
            case Phase::HapticFeedback: {
                for (std::size_t b = 0; b < pp.blocks.size(); ++b)
                    for (std::size_t k = 0; k < pp.blocks[b].targets.size(); ++k)
                        stimulus_trial(pp, static_cast<int>(b), static_cast<int>(k), pp.blocks[b].targets[k]);
                break;
            }
            case Phase::Target:
            case Phase::Practice:
            case Phase::Testing: {
                arm_ = reset(std::move(arm_));
                drive_ = pp.condition.haptic ? Drive::FollowArm : Drive::Park;
                for (std::size_t b = 0; b < pp.blocks.size(); ++b) {
                    for (std::size_t k = 0; k < pp.blocks[b].targets.size(); ++k) {
                        const double target = pp.blocks[b].targets[k];
                        match_trial(pp, static_cast<int>(b), static_cast<int>(k), target);
                        if (pp.phase == Phase::Practice) corrective_display(pp, static_cast<int>(b), static_cast<int>(k), target);
                    }
                }
                break;
            }
            default:
                break;
        }
    }

    void match_trial(const PhasePlan& pp, int block, int trial, double target) {
        View v{.phase = pp.phase, .condition = pp.condition, .prompt = Prompt::MatchTarget, .input_enabled = true,
               .block = block, .trial = trial, .target = target};
        v.arm_visible = pp.condition.visual;
        steady_.clear();
        const std::uint64_t start = tick_;
        int keys = 0;
        while (true) {
            const Action a = tick(v);
            if (a == Action::Confirm) break;
            handle_key(a, &keys);
        }
        const double final_angle = arm_.angle.value();
        log_.append(TrialRecord{pp.phase, pp.condition, block, trial, target, final_angle, final_angle - target,
                                static_cast<double>(tick_ - start) * cfg_.device.dt, keys, steady_force()});
    }

    /// Arm and target shown for a fixed time; haptics stay live, keys ignored.
    void corrective_display(const PhasePlan& pp, int block, int trial, double target) {
        View v{.phase = pp.phase, .condition = pp.condition, .prompt = Prompt::Corrective, .input_enabled = false,
               .block = block, .trial = trial, .target = target};
        v.arm_visible = true;
        const auto n = ticks_for(cfg_.protocol.corrective_display_s);
        for (std::uint64_t i = 0; i < n; ++i) {
            v.countdown = static_cast<double>(n - i) * cfg_.device.dt;
            tick(v);
        }
    }

    /// Passive stimulus at a fixed angle for at least the dwell time.
    void stimulus_trial(const PhasePlan& pp, int block, int trial, double angle) {
        drive_ = Drive::FixedAngle;
        fixed_angle_ = angle;
        View v{.phase = pp.phase, .condition = pp.condition, .prompt = Prompt::FeelStimulus, .input_enabled = false,
               .block = block, .trial = trial, .target = angle};
        steady_.clear();
        const std::uint64_t start = tick_;
        const auto n = ticks_for(cfg_.protocol.haptic_feedback_dwell_s);
        for (std::uint64_t i = 1; i <= n; ++i) {
            v.countdown = static_cast<double>(n - i) * cfg_.device.dt;
            tick(v);
        }
        if (cfg_.protocol.confirm_gated_pauses) {
            v.countdown = 0.0;
            v.input_enabled = true;
            while (tick(v) != Action::Confirm) {
            }
        }
        log_.append(TrialRecord{pp.phase, pp.condition, block, trial, angle, angle, 0.0,
                                static_cast<double>(tick_ - start) * cfg_.device.dt, 0, steady_force()});
    }

    SessionConfig cfg_;
    ParticipantIo& io_;
    TickPacer* pacer_;
    SessionPlan plan_;
    Device device_;
    ArmState arm_;
    std::optional<LinearMapping> mapping_;
    SessionLog log_;

    Drive drive_ = Drive::Park;
    double fixed_angle_ = kMaxAngle;
    std::uint64_t tick_ = 0;
    int calibration_reps_done_ = 0;
    std::deque<double> steady_;
    std::size_t steady_capacity_ = 50;
};

/// Runs one synthetic participant end to end. `index` picks the group
/// (alternating) and the participant's RNG stream from `master_seed`.
inline SessionLog simulate_participant(const SessionConfig& base, std::uint64_t master_seed, int index) {
    SessionConfig cfg = base;
    cfg.seed = derive_seed(master_seed, static_cast<std::uint64_t>(index) + 1);
    cfg.group = group_for_participant(index);
    char id[16];
    std::snprintf(id, sizeof id, "P%03d", index + 1);
    cfg.participant_id = id;
    Rng prng = make_stream(cfg.seed, Stream::Participant);
    const PerceptionModel model = sample_participant(cfg.cohort, prng);
    SyntheticParticipant participant(model, cfg.cohort.policy, std::move(prng));
    SessionRunner runner(cfg, participant);
    return runner.run();
}

inline std::vector<SessionLog> simulate_cohort(const SessionConfig& base, std::uint64_t master_seed, int n) {
    if (n < 1) throw ValidationError("cohort size must be >= 1");
    std::vector<SessionLog> logs;
    logs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) logs.push_back(simulate_participant(base, master_seed, i));
    return logs;
}

}  // namespace proprio
