#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "proprio/participant_io.hpp"
#include "proprio/rng.hpp"
#include "proprio/units.hpp"
#include "proprio/virtual_arm.hpp"

namespace proprio {

/// Perceptual parameters of one synthetic participant.
struct PerceptionModel {
    double weber_fraction = 0.10;      // sd of the multiplicative percept noise
    double detection_threshold = 0.41; // N
    double comfort_limit = 6.42;       // N
    double memory_noise = 4.0;         // deg, sd of remembered displacements

    void validate() const {
        if (!std::isfinite(weber_fraction) || weber_fraction < 0) throw ValidationError("weber_fraction must be >= 0");
        if (!std::isfinite(detection_threshold) || detection_threshold < 0)
            throw ValidationError("detection_threshold_n must be >= 0");
        if (!std::isfinite(comfort_limit) || !(detection_threshold < comfort_limit))
            throw ValidationError("detection_threshold_n must be < comfort_limit_n");
        if (!std::isfinite(memory_noise) || memory_noise < 0) throw ValidationError("memory_noise_deg must be >= 0");
    }
};

struct PolicyParams {
    double decision_interval_s = 0.3;    // one key press or judgement per interval
    double visual_tolerance_deg = 1.0;   // confirm when the shown arm is this close
    double dead_band_scale = 0.5;        // haptic dead-band, in units of the Weber jnd
    double min_dead_band_deg = 1.0;
    int integration_samples = 3;         // percepts averaged per haptic judgement
    int max_refinement_presses = 15;
    int bound_extra_presses = 3;         // overshoot into the stop for 45/180 targets
    double expected_step_deg = 2.0;      // mean of the {1, 3} step mixture
    double initial_uncertainty_n = 0.5;  // reference uncertainty after one exposure
    double uncertainty_floor_n = 0.02;
    double learn_window_deg = 0.5;       // explore exposures only count this close to a canonical angle
    double visual_attention = 0.25;      // learning weight of exposures with the arm on screen
    double settle_s = 0.2;               // wait after motion before trusting a percept
    std::optional<double> safety_press_s;  // press the safety button at this time

    void validate() const {
        if (!(decision_interval_s > 0)) throw ValidationError("policy.decision_interval_s must be > 0");
        if (!(visual_tolerance_deg >= 0)) throw ValidationError("policy.visual_tolerance_deg must be >= 0");
        if (!(dead_band_scale >= 0) || !(min_dead_band_deg >= 0)) throw ValidationError("policy dead-band must be >= 0");
        if (integration_samples < 1) throw ValidationError("policy.integration_samples must be >= 1");
        if (max_refinement_presses < 0 || bound_extra_presses < 0)
            throw ValidationError("policy press counts must be >= 0");
        if (!(expected_step_deg > 0)) throw ValidationError("policy.expected_step_deg must be > 0");
        if (!(initial_uncertainty_n >= uncertainty_floor_n) || !(uncertainty_floor_n >= 0))
            throw ValidationError("policy: need initial_uncertainty_n >= uncertainty_floor_n >= 0");
        if (!(learn_window_deg >= 0) || !(settle_s >= 0)) throw ValidationError("policy windows must be >= 0");
        if (!(visual_attention > 0 && visual_attention <= 1))
            throw ValidationError("policy.visual_attention must lie in (0, 1]");
    }
};

/// Multiplicative (Weber) percept noise; nullopt when below detection.
inline std::optional<double> perceive_force(double f_true, const PerceptionModel& model, Rng& rng) {
    const double percept = f_true * (1.0 + rng.normal(0.0, model.weber_fraction));
    if (percept < model.detection_threshold) return std::nullopt;
    return percept;
}

/// Remembered percept for one canonical angle.
struct ReferenceEntry {
    int exposures = 0;
    double weight = 0.0;      // attention-weighted exposure count
    double mean = 0.0;
    double uncertainty = 0.0; // N; non-increasing once set
};

struct ParticipantState {
    std::array<ReferenceEntry, kAnglesPerBlock> references{};
    double believed_angle = kMaxAngle;  // feedforward estimate of where the arm is

    // current trial plan
    bool planned = false;
    int pending_presses = 0;
    KeyDirection pending_direction = KeyDirection::Flex;
    int refinement_presses = 0;
    std::optional<double> recalled_reference;

    int learned_entries() const {
        return static_cast<int>(std::count_if(references.begin(), references.end(),
                                              [](const ReferenceEntry& e) { return e.exposures > 0; }));
    }

    void start_trial() {
        planned = false;
        pending_presses = 0;
        refinement_presses = 0;
        recalled_reference.reset();
    }
};

inline int nearest_canonical_index(double angle) {
    int best = 0;
    for (int i = 1; i < kAnglesPerBlock; ++i)
        if (std::abs(kCanonicalAngles[i] - angle) < std::abs(kCanonicalAngles[best] - angle)) best = i;
    return best;
}

/// Weighted running mean of percepts for the nearest canonical angle.
/// Uncertainty is initial / sqrt(accumulated weight), clamped to the floor
/// and never increasing. `weight` < 1 models exposures made while attention
/// is on the visible arm.
inline ParticipantState learn_reference(ParticipantState state, double angle, double percept, const PolicyParams& p,
                                        double weight = 1.0) {
    if (!(weight > 0)) throw ValidationError("learn_reference: weight must be > 0");
    auto& e = state.references[static_cast<std::size_t>(nearest_canonical_index(angle))];
    ++e.exposures;
    e.weight += weight;
    e.mean += (percept - e.mean) * weight / e.weight;
    const double u = std::max(p.uncertainty_floor_n, p.initial_uncertainty_n / std::sqrt(e.weight));
    e.uncertainty = e.exposures == 1 ? u : std::min(e.uncertainty, u);
    return state;
}

/// Least-squares slope (N/deg) of the learned table; falls back to the
/// participant's felt range when fewer than two entries exist.
inline double reference_slope(const ParticipantState& s, const PerceptionModel& m) {
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < kAnglesPerBlock; ++i) {
        const auto& e = s.references[static_cast<std::size_t>(i)];
        if (e.exposures == 0) continue;
        const double x = kCanonicalAngles[static_cast<std::size_t>(i)];
        n += 1;
        sx += x;
        sy += e.mean;
        sxx += x * x;
        sxy += x * e.mean;
    }
    const double fallback = -(m.comfort_limit - m.detection_threshold) / (kMaxAngle - kMinAngle);
    if (n < 2) return fallback;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return slope < 0 ? slope : fallback;
}

/// Remembered percept for `angle`: the table entry if learned, otherwise
/// linear interpolation between the nearest learned neighbours.
inline std::optional<double> reference_for(const ParticipantState& s, double angle) {
    const auto idx = static_cast<std::size_t>(nearest_canonical_index(angle));
    if (s.references[idx].exposures > 0) return s.references[idx].mean;
    std::optional<std::size_t> above, below;  // in angle
    for (std::size_t i = idx; i-- > 0;)
        if (s.references[i].exposures > 0) {
            above = i;
            break;
        }
    for (std::size_t i = idx + 1; i < s.references.size(); ++i)
        if (s.references[i].exposures > 0) {
            below = i;
            break;
        }
    if (above && below) {
        const double a0 = kCanonicalAngles[*above], a1 = kCanonicalAngles[*below];
        const double f = (angle - a0) / (a1 - a0);
        return s.references[*above].mean + f * (s.references[*below].mean - s.references[*above].mean);
    }
    if (above) return s.references[*above].mean;
    if (below) return s.references[*below].mean;
    return std::nullopt;
}

enum class KeyDecision { Flex, Extend, Confirm };

/// What the participant knows during a matching trial.
struct TrialView {
    double target = kMaxAngle;
    std::optional<double> displayed_arm;
    std::optional<double> percept;  // averaged percept, nullopt if nothing felt
    Condition condition;
};

inline bool is_range_end(double angle) { return angle <= kMinAngle || angle >= kMaxAngle; }

/// Matching policy.
///  - arm visible: step toward the shown difference, confirm within tolerance.
///  - arm hidden: feedforward press count from the remembered displacement
///    (expected step 2 deg); with haptics, then refine by comparing the
///    percept against the recalled reference for the target.
inline KeyDecision decide_key(ParticipantState& s, const TrialView& view, const PerceptionModel& model,
                              const PolicyParams& p, Rng& rng) {
    if (view.displayed_arm) {
        const double diff = *view.displayed_arm - view.target;
        if (std::abs(diff) <= p.visual_tolerance_deg) return KeyDecision::Confirm;
        return diff > 0 ? KeyDecision::Flex : KeyDecision::Extend;
    }

    if (!s.planned) {
        s.planned = true;
        const double delta = view.target - s.believed_angle + rng.normal(0.0, model.memory_noise);
        s.pending_presses = static_cast<int>(std::lround(std::abs(delta) / p.expected_step_deg));
        if (is_range_end(view.target)) s.pending_presses += p.bound_extra_presses;
        s.pending_direction = delta < 0 ? KeyDirection::Flex : KeyDirection::Extend;
        if (view.condition.haptic) {
            if (auto ref = reference_for(s, view.target)) {
                const auto& e = s.references[static_cast<std::size_t>(nearest_canonical_index(view.target))];
                const double sd = e.exposures > 0 ? e.uncertainty : p.initial_uncertainty_n;
                s.recalled_reference = std::max(0.0, *ref + rng.normal(0.0, sd));
            }
        }
    }
    if (s.pending_presses > 0) {
        --s.pending_presses;
        return s.pending_direction == KeyDirection::Flex ? KeyDecision::Flex : KeyDecision::Extend;
    }
    if (!view.condition.haptic || !s.recalled_reference) return KeyDecision::Confirm;
    if (s.refinement_presses >= p.max_refinement_presses) return KeyDecision::Confirm;

    const double slope = reference_slope(s, model);  // N/deg, negative
    const double felt = view.percept.value_or(0.0);
    const double ref = *s.recalled_reference;
    const double offset_deg = (felt - ref) / slope;  // > 0: arm above the target angle
    const double jnd_deg = model.weber_fraction * std::max(ref, model.detection_threshold) / std::abs(slope) /
                           std::sqrt(static_cast<double>(p.integration_samples));
    const double dead_band = std::max(p.min_dead_band_deg, p.dead_band_scale * jnd_deg);
    if (std::abs(offset_deg) <= dead_band) return KeyDecision::Confirm;
    ++s.refinement_presses;
    return offset_deg > 0 ? KeyDecision::Flex : KeyDecision::Extend;
}

/// Closed-loop synthetic participant behind the ParticipantIo boundary.
class SyntheticParticipant final : public ParticipantIo {
public:
    SyntheticParticipant(PerceptionModel model, PolicyParams policy, Rng rng)
        : model_(model), policy_(policy), rng_(std::move(rng)) {
        model_.validate();
        policy_.validate();
    }

    const ParticipantState& state() const { return state_; }
    const PerceptionModel& model() const { return model_; }

    Action poll(const Observation& obs) override {
        if (policy_.safety_press_s && obs.time_s >= *policy_.safety_press_s && !safety_sent_) {
            safety_sent_ = true;
            return Action::Safety;
        }
        track_context(obs);

        switch (obs.prompt) {
            case Prompt::CalibrationDetection: {
                // threshold judgements are made continuously during the ramp
                if (perceive_force(obs.skin_force_n, model_, rng_)) return Action::Detection;
                return Action::None;
            }
            case Prompt::CalibrationComfort: {
                auto felt = perceive_force(obs.skin_force_n, model_, rng_);
                if (felt && *felt >= model_.comfort_limit) return Action::Comfort;
                return Action::None;
            }
            default:
                break;
        }

        if (!ready(obs)) return Action::None;

        switch (obs.prompt) {
            case Prompt::Instructions:
                return obs.input_enabled ? act(obs, Action::Confirm) : Action::None;
            case Prompt::Explore:
                return act(obs, explore_step(obs));
            case Prompt::FeelStimulus:
                if (!stimulus_learned_ && obs.target_deg && settled(obs)) {
                    state_ = learn_reference(state_, *obs.target_deg, integrated_percept(obs.skin_force_n).value_or(0.0),
                                             policy_);
                    stimulus_learned_ = true;
                }
                if (obs.input_enabled && obs.countdown_s && *obs.countdown_s <= 0.0) return act(obs, Action::Confirm);
                return Action::None;
            case Prompt::Corrective:
                if (obs.arm_deg) state_.believed_angle = *obs.arm_deg;
                if (!corrective_learned_ && obs.arm_deg && obs.target_deg && settled(obs)) {
                    learn_for_target(*obs.target_deg, *obs.arm_deg, obs.skin_force_n, 1.0);
                    corrective_learned_ = true;
                }
                return Action::None;
            case Prompt::MatchTarget:
                return match_step(obs);
            default:
                return Action::None;
        }
    }

private:
    /// Detects phase and trial boundaries from the observation stream.
    void track_context(const Observation& obs) {
        if (obs.phase != last_phase_ || obs.condition != last_condition_) {
            if (obs.phase == Phase::Explore || obs.phase == Phase::Target || obs.phase == Phase::Practice ||
                obs.phase == Phase::Testing)
                state_.believed_angle = kMaxAngle;
            last_phase_ = obs.phase;
            last_condition_ = obs.condition;
        }
        const bool new_trial = obs.block_index != last_block_ || obs.trial_index != last_trial_;
        if (new_trial || obs.prompt != last_prompt_) {
            if (new_trial) state_.start_trial();
            stimulus_learned_ = false;
            corrective_learned_ = false;
            prompt_since_ = obs.time_s;
            last_action_time_ = obs.time_s;
            last_block_ = obs.block_index;
            last_trial_ = obs.trial_index;
            last_prompt_ = obs.prompt;
        }
    }

    bool ready(const Observation& obs) const { return obs.time_s - last_action_time_ >= policy_.decision_interval_s - 1e-9; }
    bool settled(const Observation& obs) const { return obs.time_s - prompt_since_ >= policy_.settle_s; }

    Action act(const Observation& obs, Action a) {
        if (a != Action::None) last_action_time_ = obs.time_s;
        return a;
    }

    std::optional<double> integrated_percept(double f_true) {
        double sum = 0.0;
        int felt = 0;
        for (int i = 0; i < policy_.integration_samples; ++i) {
            if (auto p = perceive_force(f_true, model_, rng_)) {
                sum += *p;
                ++felt;
            }
        }
        if (felt == 0) return std::nullopt;
        return sum / policy_.integration_samples;
    }

    void maybe_learn(double angle, double f_true) {
        const double nearest = kCanonicalAngles[static_cast<std::size_t>(nearest_canonical_index(angle))];
        if (std::abs(angle - nearest) > policy_.learn_window_deg) return;
        state_ = learn_reference(state_, angle, integrated_percept(f_true).value_or(0.0), policy_, policy_.visual_attention);
    }

    /// Shown where the arm ended up relative to the target: shift what is
    /// felt at the arm along the learned slope to the target angle.
    void learn_for_target(double target, double arm, double f_true, double weight) {
        const double felt = integrated_percept(f_true).value_or(0.0);
        const double shifted = std::max(0.0, felt + reference_slope(state_, model_) * (target - arm));
        state_ = learn_reference(state_, target, shifted, policy_, weight);
    }

    Action explore_step(const Observation& obs) {
        if (!obs.arm_deg) return Action::None;
        maybe_learn(*obs.arm_deg, obs.skin_force_n);
        if (*obs.arm_deg <= kMinAngle) explore_flexing_ = false;
        if (*obs.arm_deg >= kMaxAngle) explore_flexing_ = true;
        return explore_flexing_ ? Action::Flex : Action::Extend;
    }

    Action match_step(const Observation& obs) {
        if (!obs.target_deg) return Action::None;
        TrialView view;
        view.target = *obs.target_deg;
        view.displayed_arm = obs.arm_deg;
        view.condition = obs.condition.value_or(Condition{});
        if (view.condition.haptic && !obs.arm_deg) view.percept = integrated_percept(obs.skin_force_n);
        const KeyDecision d = decide_key(state_, view, model_, policy_, rng_);
        switch (d) {
            case KeyDecision::Flex:
                return act(obs, Action::Flex);
            case KeyDecision::Extend:
                return act(obs, Action::Extend);
            case KeyDecision::Confirm:
                if (obs.arm_deg) {
                    state_.believed_angle = *obs.arm_deg;
                    if (obs.phase == Phase::Target)
                        learn_for_target(view.target, *obs.arm_deg, obs.skin_force_n, policy_.visual_attention);
                } else {
                    state_.believed_angle = view.target;
                }
                return act(obs, Action::Confirm);
        }
        return Action::None;
    }

    PerceptionModel model_;
    PolicyParams policy_;
    Rng rng_;
    ParticipantState state_;

    Phase last_phase_ = Phase::Calibration;
    std::optional<Condition> last_condition_;
    int last_block_ = -2;
    int last_trial_ = -2;
    Prompt last_prompt_ = Prompt::None;
    double prompt_since_ = 0.0;
    double last_action_time_ = 0.0;
    bool stimulus_learned_ = false;
    bool corrective_learned_ = false;
    bool explore_flexing_ = true;
    bool safety_sent_ = false;
};

/// Population the synthetic cohort is drawn from.
struct CohortConfig {
    int participants = 14;
    double detection_mean_n = 0.41;
    double detection_sd_n = 0.10;
    double comfort_mean_n = 6.42;
    double comfort_sd_n = 1.5;
    double weber_fraction = 0.10;
    double memory_noise_deg = 4.0;
    PolicyParams policy;

    void validate() const {
        if (participants < 1) throw ValidationError("cohort.participants must be >= 1");
        if (!(detection_mean_n > 0) || !(detection_sd_n >= 0) || !(comfort_sd_n >= 0))
            throw ValidationError("cohort detection/comfort parameters must be positive");
        if (!(comfort_mean_n > detection_mean_n)) throw ValidationError("cohort.comfort_mean_n must exceed detection_mean_n");
        if (comfort_mean_n < 1.0 || comfort_mean_n > kMaxAppliedForce)
            throw ValidationError("cohort.comfort_mean_n must lie in [1, 15] N");
        PerceptionModel{weber_fraction, detection_mean_n, comfort_mean_n, memory_noise_deg}.validate();
        policy.validate();
    }
};

/// Draws one participant's thresholds; comfort stays inside [1, 15] N and
/// at least 0.5 N above detection.
inline PerceptionModel sample_participant(const CohortConfig& c, Rng& rng) {
    PerceptionModel m;
    m.weber_fraction = c.weber_fraction;
    m.memory_noise = c.memory_noise_deg;
    m.detection_threshold = std::clamp(rng.normal(c.detection_mean_n, c.detection_sd_n), 0.1, 2.0);
    m.comfort_limit = std::clamp(rng.normal(c.comfort_mean_n, c.comfort_sd_n), std::max(1.0, m.detection_threshold + 0.5),
                                 kMaxAppliedForce - 1.0);
    return m;
}

}  // namespace proprio
