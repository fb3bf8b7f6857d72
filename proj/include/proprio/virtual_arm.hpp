#pragma once

#include <algorithm>
#include <string_view>

#include "proprio/rng.hpp"
#include "proprio/units.hpp"

namespace proprio {

enum class KeyDirection { Flex, Extend };

/// One-DoF virtual elbow driven by keypad presses.
struct ArmState {
    AngleDeg angle = AngleDeg::make(kMaxAngle);
    Rng rng;
    int key_count = 0;
    int last_step = 0;  // magnitude drawn on the last press, before clamping

    explicit ArmState(Rng stream = Rng{}) : rng(std::move(stream)) {}
};

/// Each press moves 1 or 3 degrees (equal odds) and saturates at the range
/// ends; a saturated press still counts.
inline ArmState apply_key(ArmState arm, KeyDirection dir) {
    const int step = arm.rng.coin() ? 3 : 1;
    const double delta = dir == KeyDirection::Flex ? -step : step;
    arm.angle = AngleDeg::clamped(arm.angle.value() + delta);
    arm.last_step = step;
    ++arm.key_count;
    return arm;
}

inline ArmState reset(ArmState arm) {
    arm.angle = AngleDeg::make(kMaxAngle);
    arm.key_count = 0;
    return arm;
}

}  // namespace proprio
