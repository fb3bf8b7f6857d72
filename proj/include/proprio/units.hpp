#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace proprio {

/// Thrown when an input violates a documented precondition (range, finiteness, ordering).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A double constrained to the closed interval [Tag::lo, Tag::hi].
///
/// `make` validates and throws; `clamped` saturates. The raw value is always
/// reachable through `value()` so arithmetic stays in plain doubles.
template <class Tag>
class Bounded {
public:
    static constexpr double lo = Tag::lo;
    static constexpr double hi = Tag::hi;

    constexpr Bounded() : v_(Tag::lo) {}

    static Bounded make(double v) {
        if (!std::isfinite(v) || v < lo || v > hi) {
            throw ValidationError(std::string(Tag::name) + " out of range [" + std::to_string(lo) + ", " +
                                  std::to_string(hi) + "]: " + std::to_string(v));
        }
        return Bounded(v);
    }

    static Bounded clamped(double v) {
        if (std::isnan(v)) throw ValidationError(std::string(Tag::name) + " is NaN");
        return Bounded(v < lo ? lo : (v > hi ? hi : v));
    }

    constexpr double value() const { return v_; }

    friend constexpr bool operator==(Bounded a, Bounded b) { return a.v_ == b.v_; }
    friend constexpr auto operator<=>(Bounded a, Bounded b) { return a.v_ <=> b.v_; }

private:
    constexpr explicit Bounded(double v) : v_(v) {}
    double v_;
};

struct AngleTag {
    static constexpr double lo = 45.0;
    static constexpr double hi = 180.0;
    static constexpr const char* name = "angle_deg";
};
struct PositionTag {
    static constexpr double lo = 0.0;
    static constexpr double hi = 30.0;
    static constexpr const char* name = "actuator_pos_mm";
};
struct ForceTag {
    static constexpr double lo = 0.0;
    static constexpr double hi = 45.0;
    static constexpr const char* name = "force_n";
};

/// Virtual elbow angle, 180 = fully extended, 45 = fully flexed.
using AngleDeg = Bounded<AngleTag>;
/// Linear actuator extension over its 30 mm stroke.
using ActuatorPos = Bounded<PositionTag>;
/// Force at the tactor, bounded by the sensor's full scale.
using ForceN = Bounded<ForceTag>;

inline constexpr double kMinAngle = AngleTag::lo;
inline constexpr double kMaxAngle = AngleTag::hi;
inline constexpr double kStroke = PositionTag::hi;
inline constexpr double kSensorFullScale = ForceTag::hi;
/// Upper bound on the force the device will ever command.
inline constexpr double kMaxAppliedForce = 15.0;

inline constexpr int kAnglesPerBlock = 10;

/// Target angles of one block in descending order: 180, 165, ..., 45.
inline constexpr std::array<double, kAnglesPerBlock> kCanonicalAngles = {180.0, 165.0, 150.0, 135.0, 120.0,
                                                                          105.0, 90.0,  75.0,  60.0,  45.0};

inline void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + " is not finite");
}

}  // namespace proprio
