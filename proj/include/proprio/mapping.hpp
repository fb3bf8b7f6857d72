#pragma once

#include <string>
#include <vector>

#include "proprio/units.hpp"

namespace proprio {

/// Participant-specific stimulus range found by the calibration dialogue.
struct CalibrationResult {
    ActuatorPos min_pos;  // first felt pressure
    ActuatorPos max_pos;  // onset of discomfort
    ForceN min_force;
    ForceN max_force;
    int repetitions = 0;

    void validate() const {
        if (!(min_pos < max_pos)) throw ValidationError("calibration: min_pos must be < max_pos");
        if (!(min_force < max_force)) throw ValidationError("calibration: min_force must be < max_force");
        if (repetitions < 3) throw ValidationError("calibration: at least 3 repetitions required");
    }

    friend bool operator==(const CalibrationResult&, const CalibrationResult&) = default;
};

/// Affine map: 180 deg -> min_pos, 45 deg -> max_pos.
inline ActuatorPos angle_to_position(AngleDeg angle, const CalibrationResult& calib) {
    const double frac = (kMaxAngle - angle.value()) / (kMaxAngle - kMinAngle);
    const double lo = calib.min_pos.value();
    const double hi = calib.max_pos.value();
    return ActuatorPos::clamped(lo + frac * (hi - lo));
}

inline ActuatorPos angle_to_position(double angle_deg, const CalibrationResult& calib) {
    return angle_to_position(AngleDeg::make(angle_deg), calib);
}

inline AngleDeg position_to_angle(ActuatorPos pos, const CalibrationResult& calib) {
    const double lo = calib.min_pos.value();
    const double hi = calib.max_pos.value();
    if (pos.value() < lo || pos.value() > hi)
        throw ValidationError("position_to_angle: " + std::to_string(pos.value()) + " mm outside calibrated span [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    const double frac = (pos.value() - lo) / (hi - lo);
    return AngleDeg::clamped(kMaxAngle - frac * (kMaxAngle - kMinAngle));
}

/// Angle <-> stimulus mapping used at runtime. Only the linear map ships.
class StimulusMapping {
public:
    virtual ~StimulusMapping() = default;
    virtual ActuatorPos to_position(AngleDeg angle) const = 0;
    virtual AngleDeg to_angle(ActuatorPos pos) const = 0;
};

class LinearMapping final : public StimulusMapping {
public:
    explicit LinearMapping(CalibrationResult calib) : calib_(calib) { calib_.validate(); }

    ActuatorPos to_position(AngleDeg angle) const override { return angle_to_position(angle, calib_); }
    AngleDeg to_angle(ActuatorPos pos) const override { return position_to_angle(pos, calib_); }

    const CalibrationResult& calibration() const { return calib_; }

private:
    CalibrationResult calib_;
};

}  // namespace proprio
