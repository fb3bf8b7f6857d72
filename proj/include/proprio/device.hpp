#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "proprio/rng.hpp"
#include "proprio/units.hpp"

namespace proprio {

enum class DeviceMode { Calibration, Runtime, EStop };
enum class DeviceEvent { StartCalibration, CalibrationDone, SafetyPressed, OperatorReset };

inline constexpr std::string_view to_string(DeviceMode m) {
    switch (m) {
        case DeviceMode::Calibration: return "Calibration";
        case DeviceMode::Runtime: return "Runtime";
        case DeviceMode::EStop: return "EStop";
    }
    return "?";
}

inline constexpr std::string_view to_string(DeviceEvent e) {
    switch (e) {
        case DeviceEvent::StartCalibration: return "StartCalibration";
        case DeviceEvent::CalibrationDone: return "CalibrationDone";
        case DeviceEvent::SafetyPressed: return "SafetyPressed";
        case DeviceEvent::OperatorReset: return "OperatorReset";
    }
    return "?";
}

/// Mode FSM. The safety button wins from any mode; EStop only leaves via an
/// operator reset, and always into Calibration. Unlisted pairs are identity.
constexpr DeviceMode fsm_transition(DeviceMode mode, DeviceEvent event) {
    if (event == DeviceEvent::SafetyPressed) return DeviceMode::EStop;
    switch (mode) {
        case DeviceMode::EStop:
            return event == DeviceEvent::OperatorReset ? DeviceMode::Calibration : DeviceMode::EStop;
        case DeviceMode::Runtime:
            return event == DeviceEvent::StartCalibration ? DeviceMode::Calibration : DeviceMode::Runtime;
        case DeviceMode::Calibration:
            return event == DeviceEvent::CalibrationDone ? DeviceMode::Runtime : DeviceMode::Calibration;
    }
    return mode;
}

struct PidGains {
    double kp = 8.0;
    double ki = 2.0;
    double kd = 0.1;
    double integral_limit = 5.0;  // mm*s
    double output_limit = 12.0;   // mm/s
};

/// Position PID producing a commanded actuator velocity.
struct PidState {
    PidGains gains;
    double integral = 0.0;    // mm*s
    double prev_error = 0.0;  // mm
    bool primed = false;

    /// The integrator only accumulates while the output is unsaturated
    /// (conditional integration), and is bounded by `integral_limit`.
    double update(double error, double dt) {
        const double derivative = primed ? (error - prev_error) / dt : 0.0;
        prev_error = error;
        primed = true;
        const double candidate = std::clamp(integral + error * dt, -gains.integral_limit, gains.integral_limit);
        const double unclamped = gains.kp * error + gains.ki * candidate + gains.kd * derivative;
        if (std::abs(unclamped) <= gains.output_limit) integral = candidate;
        const double out = gains.kp * error + gains.ki * integral + gains.kd * derivative;
        return std::clamp(out, -gains.output_limit, gains.output_limit);
    }

    void reset() {
        integral = 0.0;
        prev_error = 0.0;
        primed = false;
    }
};

/// Linear-spring tissue contact plus the force sensor's noise floor.
struct SkinModel {
    double contact_pos = 8.0;          // mm; tactor touches skin here
    double stiffness = 1.5;            // N/mm
    double sensor_noise_sigma = 0.05;  // N
    double quantization_step = 0.02;   // N; 0 disables

    void validate() const {
        if (!std::isfinite(contact_pos) || contact_pos < 0.0 || contact_pos >= kStroke)
            throw ValidationError("skin.contact_pos_mm must lie in [0, 30)");
        if (!std::isfinite(stiffness) || stiffness <= 0.0) throw ValidationError("skin.stiffness_n_per_mm must be > 0");
        if (!std::isfinite(sensor_noise_sigma) || sensor_noise_sigma < 0.0)
            throw ValidationError("skin.sensor_noise_sigma_n must be >= 0");
        if (!std::isfinite(quantization_step) || quantization_step < 0.0)
            throw ValidationError("skin.quantization_step_n must be >= 0");
    }

    /// Extension at which the skin pushes back with `force` newtons.
    double position_for_force(double force) const { return contact_pos + force / stiffness; }
};

inline ForceN skin_force(ActuatorPos extension, const SkinModel& skin) {
    const double indentation = std::max(0.0, extension.value() - skin.contact_pos);
    return ForceN::clamped(skin.stiffness * indentation);
}

inline ForceN read_force_sensor(ForceN true_force, const SkinModel& skin, Rng& rng) {
    double f = rng.normal(true_force.value(), skin.sensor_noise_sigma);
    if (skin.quantization_step > 0.0) f = std::round(f / skin.quantization_step) * skin.quantization_step;
    return ForceN::clamped(f);
}

struct DeviceConfig {
    PidGains pid;
    SkinModel skin;
    double max_speed = 12.0;  // mm/s
    double dt = 0.01;         // s, control tick
    double park_pos = 5.0;    // mm, retracted and clear of the skin
    double max_applied_force = kMaxAppliedForce;

    void validate() const {
        skin.validate();
        auto positive = [](double v, const char* name) {
            if (!std::isfinite(v) || v <= 0.0) throw ValidationError(std::string(name) + " must be > 0");
        };
        positive(max_speed, "device.max_speed_mm_s");
        positive(dt, "device.dt_s");
        positive(pid.output_limit, "device.pid.output_limit_mm_s");
        positive(max_applied_force, "device.max_applied_force_n");
        if (!std::isfinite(pid.kp) || !std::isfinite(pid.ki) || !std::isfinite(pid.kd) || pid.kp < 0 || pid.ki < 0 ||
            pid.kd < 0)
            throw ValidationError("device.pid gains must be finite and >= 0");
        if (!std::isfinite(pid.integral_limit) || pid.integral_limit < 0)
            throw ValidationError("device.pid.integral_limit_mm_s must be >= 0");
        if (dt > 0.1) throw ValidationError("device.dt_s must be <= 0.1");
        if (!std::isfinite(park_pos) || park_pos < 0.0 || park_pos >= skin.contact_pos)
            throw ValidationError("device.park_pos_mm must be >= 0 and below skin.contact_pos_mm");
        if (max_applied_force > kMaxAppliedForce) throw ValidationError("device.max_applied_force_n must be <= 15");
    }
};

struct DeviceState {
    DeviceMode mode = DeviceMode::Calibration;
    ActuatorPos pos;
    ActuatorPos target_pos;
    PidState pid;
    ForceN measured_force;
    ForceN true_force;
    double commanded_velocity = 0.0;  // mm/s, last tick
    double clock = 0.0;               // s
};

/// Advances the actuator one tick: PID on position error, rate limit,
/// stroke clamp, then skin contact and sensor read-out.
inline DeviceState step_actuator(DeviceState s, const DeviceConfig& cfg, double dt, Rng& sensor_rng) {
    if (!std::isfinite(dt) || dt <= 0.0) throw ValidationError("step_actuator: dt must be finite and > 0");
    if (!std::isfinite(s.clock) || !std::isfinite(s.pid.integral) || !std::isfinite(s.pid.prev_error))
        throw ValidationError("step_actuator: non-finite device state");

    double velocity = 0.0;
    if (s.mode != DeviceMode::EStop) {
        velocity = s.pid.update(s.target_pos.value() - s.pos.value(), dt);
        velocity = std::clamp(velocity, -cfg.max_speed, cfg.max_speed);
        if (velocity > 0.0 && s.measured_force.value() >= cfg.max_applied_force) velocity = 0.0;
    }
    s.commanded_velocity = velocity;
    s.pos = ActuatorPos::clamped(s.pos.value() + velocity * dt);
    s.true_force = skin_force(s.pos, cfg.skin);
    s.measured_force = read_force_sensor(s.true_force, cfg.skin, sensor_rng);
    s.clock += dt;
    return s;
}

/// Single-owner simulated wearable: state, configuration and sensor noise stream.
class Device {
public:
    Device(DeviceConfig cfg, Rng sensor_rng) : cfg_(cfg), rng_(std::move(sensor_rng)) {
        cfg_.validate();
        state_.pid.gains = cfg_.pid;
        state_.pid.gains.output_limit = std::min(cfg_.pid.output_limit, cfg_.max_speed);
        state_.pos = ActuatorPos::make(cfg_.park_pos);
        state_.target_pos = state_.pos;
        state_.true_force = skin_force(state_.pos, cfg_.skin);
        state_.measured_force = state_.true_force;
    }

    const DeviceState& state() const { return state_; }
    const DeviceConfig& config() const { return cfg_; }
    DeviceMode mode() const { return state_.mode; }

    /// Ignored while in EStop: the setpoint is frozen there.
    void set_target(ActuatorPos target) {
        if (state_.mode == DeviceMode::EStop) return;
        state_.target_pos = target;
    }

    void park() { set_target(ActuatorPos::make(cfg_.park_pos)); }

    DeviceMode handle(DeviceEvent event) {
        const DeviceMode before = state_.mode;
        state_.mode = fsm_transition(before, event);
        if (before == DeviceMode::EStop && state_.mode != DeviceMode::EStop) {
            state_.pid.reset();
            state_.target_pos = state_.pos;
        }
        return state_.mode;
    }

    void step() { state_ = step_actuator(state_, cfg_, cfg_.dt, rng_); }

private:
    DeviceConfig cfg_;
    DeviceState state_;
    Rng rng_;
};

}  // namespace proprio
