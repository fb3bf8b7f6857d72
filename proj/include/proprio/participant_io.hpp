#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "proprio/protocol.hpp"
#include "proprio/session_log.hpp"

namespace proprio {

enum class Prompt {
    None,
    Instructions,
    Retracting,
    CalibrationDetection,
    CalibrationComfort,
    Explore,
    MatchTarget,
    FeelStimulus,
    Corrective,
    SafetyStop,
    Done,
};

inline constexpr std::string_view to_string(Prompt p) {
    switch (p) {
        case Prompt::None: return "";
        case Prompt::Instructions: return "Listen to the instructions, then press confirm to continue.";
        case Prompt::Retracting: return "Please wait.";
        case Prompt::CalibrationDetection: return "Press when you first feel pressure.";
        case Prompt::CalibrationComfort: return "Press when the pressure becomes uncomfortable.";
        case Prompt::Explore: return "Move the arm freely and notice the pressure.";
        case Prompt::MatchTarget: return "Match the target angle, then press confirm.";
        case Prompt::FeelStimulus: return "Feel the pressure for the shown angle.";
        case Prompt::Corrective: return "Your arm (yellow) and the target (blue).";
        case Prompt::SafetyStop: return "Safety stop. Session paused; operator reset required.";
        case Prompt::Done: return "Session complete. Thank you!";
    }
    return "";
}

/// Everything the orchestrator exposes to a participant on one tick.
///
/// `arm_deg` is present only when the arm is visible in the current
/// condition. `skin_force_n` is the physical stimulus on the forearm; it is
/// what a synthetic participant feels and is never sent to the UI.
struct Observation {
    std::uint64_t tick = 0;
    double time_s = 0.0;
    Phase phase = Phase::Calibration;
    std::optional<Condition> condition;
    Prompt prompt = Prompt::None;
    bool input_enabled = false;
    int block_index = -1;
    int trial_index = -1;
    std::optional<double> target_deg;
    std::optional<double> arm_deg;
    std::optional<double> countdown_s;
    int calibration_reps_done = 0;
    int calibration_reps_required = 0;
    double skin_force_n = 0.0;
};

/// The participant side of a session: a synthetic model or a human behind
/// the UI socket. Polled once per control tick; must not block.
class ParticipantIo {
public:
    virtual ~ParticipantIo() = default;
    virtual Action poll(const Observation& obs) = 0;
    virtual void on_session_end(SessionStatus /*status*/) {}
};

/// Paces ticks against a clock. The synthetic path uses none.
class TickPacer {
public:
    virtual ~TickPacer() = default;
    virtual void wait_for_tick(std::uint64_t tick, double dt) = 0;
};

/// Replays a recorded event stream at its original ticks.
class ReplayIo final : public ParticipantIo {
public:
    explicit ReplayIo(std::vector<EventRecord> events) : events_(std::move(events)) {}

    Action poll(const Observation& obs) override {
        if (next_ < events_.size() && events_[next_].tick == obs.tick) return events_[next_++].action;
        return Action::None;
    }

private:
    std::vector<EventRecord> events_;
    std::size_t next_ = 0;
};

}  // namespace proprio
