#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "proprio/device.hpp"
#include "proprio/participant_sim.hpp"
#include "proprio/protocol.hpp"

namespace proprio {

struct CalibrationProcedure {
    double ramp_rate_mm_s = 1.0;
    int repetitions = 3;
    int max_attempts = 10;
};

struct ProtocolConfig {
    double explore_s = 60.0;
    double haptic_feedback_dwell_s = 10.0;
    double corrective_display_s = 10.0;
    double instruction_s = 3.0;          // pause length when not confirm-gated
    bool confirm_gated_pauses = false;   // humans advance instructions / stimuli with confirm
    double steady_window_s = 0.5;        // force averaging window before confirm
    CalibrationProcedure calibration;
    MixedBlockPattern mixed_block;

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!std::isfinite(v) || v <= 0.0) throw ValidationError(std::string(name) + " must be > 0");
        };
        positive(explore_s, "protocol.explore_s");
        positive(haptic_feedback_dwell_s, "protocol.haptic_feedback_dwell_s");
        positive(corrective_display_s, "protocol.corrective_display_s");
        positive(steady_window_s, "protocol.steady_window_s");
        positive(calibration.ramp_rate_mm_s, "protocol.calibration.ramp_rate_mm_s");
        if (!std::isfinite(instruction_s) || instruction_s < 0) throw ValidationError("protocol.instruction_s must be >= 0");
        if (calibration.repetitions < 3) throw ValidationError("protocol.calibration.repetitions must be >= 3");
        if (calibration.max_attempts < calibration.repetitions)
            throw ValidationError("protocol.calibration.max_attempts must be >= repetitions");
        mixed_block.validate();
    }
};

struct LoggingConfig {
    int sample_decimation = 1;  // log every n-th control tick

    void validate() const {
        if (sample_decimation < 1) throw ValidationError("logging.sample_decimation must be >= 1");
    }
};

struct SessionConfig {
    std::uint64_t seed = 1;
    std::string participant_id = "P001";
    Group group = Group::HapticFirst;
    DeviceConfig device;
    ProtocolConfig protocol;
    LoggingConfig logging;
    CohortConfig cohort;

    void validate() const {
        device.validate();
        protocol.validate();
        logging.validate();
        cohort.validate();
        if (participant_id.empty() || participant_id.find_first_of(",\n\r/\\") != std::string::npos)
            throw ValidationError("participant_id must be non-empty without ',', '/', '\\' or newlines");
        // the configured population must be reachable and safe on this skin/device
        const double max_pos = device.skin.position_for_force(cohort.comfort_mean_n);
        if (max_pos > kStroke) throw ValidationError("cohort.comfort_mean_n is beyond the actuator stroke for this skin model");
        const double force = skin_force(ActuatorPos::clamped(max_pos), device.skin).value();
        if (force < 1.0 || force > device.max_applied_force)
            throw ValidationError("calibrated max position must produce a force in [1, max_applied_force_n]");
    }
};

namespace config_detail {

using nlohmann::json;

/// Reads a JSON object field by field and rejects unknown keys.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError(path_ + ": expected an object");
    }

    ~ObjectReader() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ValidationError("unknown field '" + field(key) + "'");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) throw ValidationError("");
                out = it->template get<double>();
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw ValidationError("");
                out = it->template get<bool>();
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer()) throw ValidationError("");
                out = it->template get<T>();
            } else {
                if (!it->is_string()) throw ValidationError("");
                out = it->template get<std::string>();
            }
        } catch (const std::exception&) {
            throw ValidationError("field '" + field(key) + "' has the wrong type");
        }
    }

    template <class T>
    void get_optional(const char* key, std::optional<T>& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) return;
        T v{};
        get(key, v);
        out = v;
    }

    ObjectReader child(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        static const json empty = json::object();
        return ObjectReader(it == j_.end() ? empty : *it, field(key));
    }

    bool has(const char* key) const { return j_.contains(key); }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace config_detail

inline nlohmann::json to_json(const SessionConfig& c) {
    using nlohmann::json;
    json policy = {
        {"decision_interval_s", c.cohort.policy.decision_interval_s},
        {"visual_tolerance_deg", c.cohort.policy.visual_tolerance_deg},
        {"dead_band_scale", c.cohort.policy.dead_band_scale},
        {"min_dead_band_deg", c.cohort.policy.min_dead_band_deg},
        {"integration_samples", c.cohort.policy.integration_samples},
        {"max_refinement_presses", c.cohort.policy.max_refinement_presses},
        {"bound_extra_presses", c.cohort.policy.bound_extra_presses},
        {"expected_step_deg", c.cohort.policy.expected_step_deg},
        {"initial_uncertainty_n", c.cohort.policy.initial_uncertainty_n},
        {"uncertainty_floor_n", c.cohort.policy.uncertainty_floor_n},
        {"learn_window_deg", c.cohort.policy.learn_window_deg},
        {"visual_attention", c.cohort.policy.visual_attention},
        {"settle_s", c.cohort.policy.settle_s},
    };
    if (c.cohort.policy.safety_press_s) policy["safety_press_s"] = *c.cohort.policy.safety_press_s;
    return json{
        {"seed", c.seed},
        {"participant_id", c.participant_id},
        {"group", std::string(to_string(c.group))},
        {"device",
         {{"dt_s", c.device.dt},
          {"max_speed_mm_s", c.device.max_speed},
          {"park_pos_mm", c.device.park_pos},
          {"max_applied_force_n", c.device.max_applied_force},
          {"pid",
           {{"kp", c.device.pid.kp},
            {"ki", c.device.pid.ki},
            {"kd", c.device.pid.kd},
            {"integral_limit_mm_s", c.device.pid.integral_limit},
            {"output_limit_mm_s", c.device.pid.output_limit}}}}},
        {"skin",
         {{"contact_pos_mm", c.device.skin.contact_pos},
          {"stiffness_n_per_mm", c.device.skin.stiffness},
          {"sensor_noise_sigma_n", c.device.skin.sensor_noise_sigma},
          {"quantization_step_n", c.device.skin.quantization_step}}},
        {"protocol",
         {{"explore_s", c.protocol.explore_s},
          {"haptic_feedback_dwell_s", c.protocol.haptic_feedback_dwell_s},
          {"corrective_display_s", c.protocol.corrective_display_s},
          {"instruction_s", c.protocol.instruction_s},
          {"confirm_gated_pauses", c.protocol.confirm_gated_pauses},
          {"steady_window_s", c.protocol.steady_window_s},
          {"calibration",
           {{"ramp_rate_mm_s", c.protocol.calibration.ramp_rate_mm_s},
            {"repetitions", c.protocol.calibration.repetitions},
            {"max_attempts", c.protocol.calibration.max_attempts}}},
          {"mixed_block", {{"ascending", c.protocol.mixed_block.ascending}, {"descending", c.protocol.mixed_block.descending}}}}},
        {"logging", {{"sample_decimation", c.logging.sample_decimation}}},
        {"cohort",
         {{"participants", c.cohort.participants},
          {"detection_mean_n", c.cohort.detection_mean_n},
          {"detection_sd_n", c.cohort.detection_sd_n},
          {"comfort_mean_n", c.cohort.comfort_mean_n},
          {"comfort_sd_n", c.cohort.comfort_sd_n},
          {"weber_fraction", c.cohort.weber_fraction},
          {"memory_noise_deg", c.cohort.memory_noise_deg},
          {"policy", policy}}},
    };
}

/// Parses a config; absent fields keep their defaults. Throws ValidationError
/// naming the offending field.
inline SessionConfig config_from_json(const nlohmann::json& j) {
    using config_detail::ObjectReader;
    SessionConfig c;
    {
        ObjectReader r(j, "");
        r.get("seed", c.seed);
        r.get("participant_id", c.participant_id);
        std::string group(to_string(c.group));
        r.get("group", group);
        auto g = parse_group(group);
        if (!g) throw ValidationError("field 'group' must be HapticFirst or NoHapticFirst");
        c.group = *g;
        {
            auto d = r.child("device");
            d.get("dt_s", c.device.dt);
            d.get("max_speed_mm_s", c.device.max_speed);
            d.get("park_pos_mm", c.device.park_pos);
            d.get("max_applied_force_n", c.device.max_applied_force);
            auto p = d.child("pid");
            p.get("kp", c.device.pid.kp);
            p.get("ki", c.device.pid.ki);
            p.get("kd", c.device.pid.kd);
            p.get("integral_limit_mm_s", c.device.pid.integral_limit);
            p.get("output_limit_mm_s", c.device.pid.output_limit);
        }
        {
            auto s = r.child("skin");
            s.get("contact_pos_mm", c.device.skin.contact_pos);
            s.get("stiffness_n_per_mm", c.device.skin.stiffness);
            s.get("sensor_noise_sigma_n", c.device.skin.sensor_noise_sigma);
            s.get("quantization_step_n", c.device.skin.quantization_step);
        }
        {
            auto p = r.child("protocol");
            p.get("explore_s", c.protocol.explore_s);
            p.get("haptic_feedback_dwell_s", c.protocol.haptic_feedback_dwell_s);
            p.get("corrective_display_s", c.protocol.corrective_display_s);
            p.get("instruction_s", c.protocol.instruction_s);
            p.get("confirm_gated_pauses", c.protocol.confirm_gated_pauses);
            p.get("steady_window_s", c.protocol.steady_window_s);
            auto cal = p.child("calibration");
            cal.get("ramp_rate_mm_s", c.protocol.calibration.ramp_rate_mm_s);
            cal.get("repetitions", c.protocol.calibration.repetitions);
            cal.get("max_attempts", c.protocol.calibration.max_attempts);
            auto mb = p.child("mixed_block");
            mb.get("ascending", c.protocol.mixed_block.ascending);
            mb.get("descending", c.protocol.mixed_block.descending);
        }
        {
            auto l = r.child("logging");
            l.get("sample_decimation", c.logging.sample_decimation);
        }
        {
            auto co = r.child("cohort");
            co.get("participants", c.cohort.participants);
            co.get("detection_mean_n", c.cohort.detection_mean_n);
            co.get("detection_sd_n", c.cohort.detection_sd_n);
            co.get("comfort_mean_n", c.cohort.comfort_mean_n);
            co.get("comfort_sd_n", c.cohort.comfort_sd_n);
            co.get("weber_fraction", c.cohort.weber_fraction);
            co.get("memory_noise_deg", c.cohort.memory_noise_deg);
            auto p = co.child("policy");
            auto& pp = c.cohort.policy;
            p.get("decision_interval_s", pp.decision_interval_s);
            p.get("visual_tolerance_deg", pp.visual_tolerance_deg);
            p.get("dead_band_scale", pp.dead_band_scale);
            p.get("min_dead_band_deg", pp.min_dead_band_deg);
            p.get("integration_samples", pp.integration_samples);
            p.get("max_refinement_presses", pp.max_refinement_presses);
            p.get("bound_extra_presses", pp.bound_extra_presses);
            p.get("expected_step_deg", pp.expected_step_deg);
            p.get("initial_uncertainty_n", pp.initial_uncertainty_n);
            p.get("uncertainty_floor_n", pp.uncertainty_floor_n);
            p.get("learn_window_deg", pp.learn_window_deg);
            p.get("visual_attention", pp.visual_attention);
            p.get("settle_s", pp.settle_s);
            p.get_optional("safety_press_s", pp.safety_press_s);
        }
    }
    c.validate();
    return c;
}

inline SessionConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

/// FNV-1a over the canonical JSON dump of the resolved config.
inline std::string config_hash(const SessionConfig& c) {
    const std::string text = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace proprio
