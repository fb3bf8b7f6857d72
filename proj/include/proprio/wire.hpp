#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include <json.hpp>

#include "proprio/participant_io.hpp"

namespace proprio::wire {

inline constexpr int kVersion = 1;

inline constexpr std::string_view prompt_id(Prompt p) {
    switch (p) {
        case Prompt::None: return "none";
        case Prompt::Instructions: return "instructions";
        case Prompt::Retracting: return "retracting";
        case Prompt::CalibrationDetection: return "calibration_detection";
        case Prompt::CalibrationComfort: return "calibration_comfort";
        case Prompt::Explore: return "explore";
        case Prompt::MatchTarget: return "match_target";
        case Prompt::FeelStimulus: return "feel_stimulus";
        case Prompt::Corrective: return "corrective";
        case Prompt::SafetyStop: return "safety_stop";
        case Prompt::Done: return "done";
    }
    return "none";
}

/// Server -> client snapshot. `arm_deg` is emitted only when the
/// observation carries it, so hidden-arm conditions never leak the angle.
inline nlohmann::json state_json(const Observation& o) {
    nlohmann::json j = {
        {"v", kVersion},
        {"type", "state"},
        {"tick", o.tick},
        {"t_s", o.time_s},
        {"phase", std::string(to_string(o.phase))},
        {"prompt", std::string(to_string(o.prompt))},
        {"prompt_id", std::string(prompt_id(o.prompt))},
        {"input_enabled", o.input_enabled},
        {"block", o.block_index},
        {"trial", o.trial_index},
    };
    if (o.condition) j["condition"] = o.condition->code();
    if (o.target_deg) j["target_deg"] = *o.target_deg;
    if (o.arm_deg) j["arm_deg"] = *o.arm_deg;
    if (o.countdown_s) j["countdown_s"] = *o.countdown_s;
    if (o.phase == Phase::Calibration)
        j["calibration"] = {{"done", o.calibration_reps_done}, {"required", o.calibration_reps_required}};
    return j;
}

inline std::string encode_state(const Observation& o) { return state_json(o).dump(); }

inline std::string encode_busy() {
    return nlohmann::json{{"v", kVersion}, {"type", "busy"}, {"message", "a session is already running"}}.dump();
}

inline std::string encode_error(std::string_view code, std::string_view message) {
    return nlohmann::json{{"v", kVersion}, {"type", "error"}, {"code", code}, {"message", message}}.dump();
}

inline std::string encode_done(SessionStatus s) {
    return nlohmann::json{{"v", kVersion}, {"type", "done"}, {"status", std::string(to_string(s))}}.dump();
}

struct Decoded {
    std::optional<Action> action;
    std::string error;  // set when `action` is empty
};

/// Client -> server: {"v":1,"type":"key","key":"Flex|Extend|Confirm"},
/// {"v":1,"type":"signal","signal":"Detection|Comfort"}, {"v":1,"type":"safety"}.
inline Decoded decode_client(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        return {std::nullopt, "malformed JSON"};
    }
    if (!j.is_object()) return {std::nullopt, "message must be a JSON object"};
    auto v = j.find("v");
    if (v == j.end() || !v->is_number_integer() || v->get<int>() != kVersion) return {std::nullopt, "unsupported protocol version"};
    auto t = j.find("type");
    if (t == j.end() || !t->is_string()) return {std::nullopt, "missing message type"};
    const std::string type = t->get<std::string>();
    auto field = [&](const char* name) -> std::optional<std::string> {
        auto f = j.find(name);
        if (f == j.end() || !f->is_string()) return std::nullopt;
        return f->get<std::string>();
    };
    if (type == "safety") return {Action::Safety, {}};
    if (type == "key") {
        const auto k = field("key");
        if (k == "Flex") return {Action::Flex, {}};
        if (k == "Extend") return {Action::Extend, {}};
        if (k == "Confirm") return {Action::Confirm, {}};
        return {std::nullopt, "key must be Flex, Extend or Confirm"};
    }
    if (type == "signal") {
        const auto s = field("signal");
        if (s == "Detection") return {Action::Detection, {}};
        if (s == "Comfort") return {Action::Comfort, {}};
        return {std::nullopt, "signal must be Detection or Comfort"};
    }
    return {std::nullopt, "unknown message type '" + type + "'"};
}

inline std::string encode_key(Action a) {
    switch (a) {
        case Action::Flex: return R"({"v":1,"type":"key","key":"Flex"})";
        case Action::Extend: return R"({"v":1,"type":"key","key":"Extend"})";
        case Action::Confirm: return R"({"v":1,"type":"key","key":"Confirm"})";
        case Action::Detection: return R"({"v":1,"type":"signal","signal":"Detection"})";
        case Action::Comfort: return R"({"v":1,"type":"signal","signal":"Comfort"})";
        case Action::Safety: return R"({"v":1,"type":"safety"})";
        default: throw ValidationError("action has no wire form");
    }
}

/// Whether an inbound action is accepted on this tick.
inline bool accepts(const Observation& o, Action a) {
    if (a == Action::Safety || a == Action::Disconnect) return true;
    if (!o.input_enabled) return false;
    const bool calibrating = o.prompt == Prompt::CalibrationDetection || o.prompt == Prompt::CalibrationComfort;
    if (a == Action::Detection || a == Action::Comfort) return calibrating;
    return !calibrating;
}

/// A remote participant. The socket side calls `push` / `disconnect` from
/// its own thread; the session thread calls `poll` once per tick and
/// consumes at most one inbound action. Outbound text goes to `send`,
/// which must be safe to call from the session thread.
class RemoteParticipant final : public ParticipantIo {
public:
    explicit RemoteParticipant(std::function<void(std::string)> send, int heartbeat_ticks = 10)
        : send_(std::move(send)), heartbeat_ticks_(heartbeat_ticks) {}

    void push(Action a) {
        std::lock_guard lk(mu_);
        inbox_.push_back(a);
    }

    void disconnect() {
        std::lock_guard lk(mu_);
        disconnected_ = true;
    }

    Action poll(const Observation& obs) override {
        publish(obs);
        std::optional<Action> next;
        {
            std::lock_guard lk(mu_);
            if (!inbox_.empty()) {
                next = inbox_.front();
                inbox_.pop_front();
            } else if (disconnected_) {
                return Action::Disconnect;
            }
        }
        if (!next) return Action::None;
        if (!accepts(obs, *next)) {
            ++rejected_;
            send_(encode_error("rejected", "input is disabled on this screen"));
            return Action::None;
        }
        ++accepted_;
        return *next;
    }

    void on_session_end(SessionStatus s) override { send_(encode_done(s)); }

    int accepted() const { return accepted_; }
    int rejected() const { return rejected_; }

private:
    /// Sends a state message when anything but the clock changed, and at
    /// least every `heartbeat_ticks` ticks.
    void publish(const Observation& obs) {
        nlohmann::json j = state_json(obs);
        nlohmann::json key = j;
        key.erase("tick");
        key.erase("t_s");
        key.erase("countdown_s");
        if (key != last_key_ || obs.tick >= last_sent_tick_ + static_cast<std::uint64_t>(heartbeat_ticks_)) {
            send_(j.dump());
            last_key_ = std::move(key);
            last_sent_tick_ = obs.tick;
        }
    }

    std::function<void(std::string)> send_;
    int heartbeat_ticks_;
    std::mutex mu_;
    std::deque<Action> inbox_;
    bool disconnected_ = false;
    nlohmann::json last_key_;
    std::uint64_t last_sent_tick_ = 0;
    int accepted_ = 0;
    int rejected_ = 0;
};

/// Holds each tick to wall-clock time, optionally sped up by `speed`.
class RealTimePacer final : public TickPacer {
public:
    explicit RealTimePacer(double speed = 1.0) : speed_(speed) {
        if (!(speed > 0)) throw ValidationError("pacer speed must be > 0");
    }

    void wait_for_tick(std::uint64_t tick, double dt) override {
        if (!start_) start_ = std::chrono::steady_clock::now();
        const auto due = *start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                       std::chrono::duration<double>(static_cast<double>(tick) * dt / speed_));
        std::this_thread::sleep_until(due);
    }

private:
    double speed_;
    std::optional<std::chrono::steady_clock::time_point> start_;
};

}  // namespace proprio::wire
