#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "proprio/mapping.hpp"
#include "proprio/protocol.hpp"

namespace proprio {

inline constexpr int kLogSchemaVersion = 1;

/// What a participant (or the transport on their behalf) did on one tick.
enum class Action { None, Flex, Extend, Confirm, Detection, Comfort, Safety, Disconnect };

inline constexpr std::string_view to_string(Action a) {
    switch (a) {
        case Action::None: return "None";
        case Action::Flex: return "Flex";
        case Action::Extend: return "Extend";
        case Action::Confirm: return "Confirm";
        case Action::Detection: return "Detection";
        case Action::Comfort: return "Comfort";
        case Action::Safety: return "Safety";
        case Action::Disconnect: return "Disconnect";
    }
    return "?";
}

inline std::optional<Action> parse_action(std::string_view s) {
    for (Action a : {Action::None, Action::Flex, Action::Extend, Action::Confirm, Action::Detection, Action::Comfort,
                     Action::Safety, Action::Disconnect})
        if (to_string(a) == s) return a;
    return std::nullopt;
}

enum class SessionStatus { Complete, AbortedSafety, Incomplete, CalibrationFailed };

inline constexpr std::string_view to_string(SessionStatus s) {
    switch (s) {
        case SessionStatus::Complete: return "complete";
        case SessionStatus::AbortedSafety: return "aborted_safety";
        case SessionStatus::Incomplete: return "incomplete";
        case SessionStatus::CalibrationFailed: return "calibration_failed";
    }
    return "?";
}

inline std::optional<SessionStatus> parse_status(std::string_view s) {
    for (SessionStatus st :
         {SessionStatus::Complete, SessionStatus::AbortedSafety, SessionStatus::Incomplete, SessionStatus::CalibrationFailed})
        if (to_string(st) == s) return st;
    return std::nullopt;
}

struct SampleRecord {
    double t = 0.0;              // s
    double actuator_pos = 0.0;   // mm
    double commanded_pos = 0.0;  // mm
    double force = 0.0;          // N, as measured
    double arm_angle = 180.0;    // deg
    Phase phase = Phase::Calibration;
    std::optional<Condition> condition;

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct TrialRecord {
    Phase phase = Phase::Target;
    Condition condition;
    int block_index = 0;
    int trial_index = 0;
    double target = 180.0;        // deg
    double final_angle = 180.0;   // deg
    double signed_error = 0.0;    // final - target, deg
    double duration = 0.0;        // s, presentation to confirm
    int key_presses = 0;
    double steady_force = 0.0;    // N, mean measured force over the window before confirm

    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct EventRecord {
    std::uint64_t tick = 0;
    double t = 0.0;
    Action action = Action::None;

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// One calibration ramp: the detection and discomfort readings.
struct CalibrationRep {
    double min_pos = 0.0;
    double max_pos = 0.0;
    double min_force = 0.0;
    double max_force = 0.0;

    friend bool operator==(const CalibrationRep&, const CalibrationRep&) = default;
};

struct SessionHeader {
    int schema_version = kLogSchemaVersion;
    std::string participant_id;
    std::uint64_t seed = 0;
    Group group = Group::HapticFirst;
    std::string config_hash;
    SessionStatus status = SessionStatus::Incomplete;

    friend bool operator==(const SessionHeader&, const SessionHeader&) = default;
};

/// Append-only record of one session.
class SessionLog {
public:
    SessionLog() = default;
    explicit SessionLog(SessionHeader header) : header_(std::move(header)) {}

    const SessionHeader& header() const { return header_; }
    const std::optional<CalibrationResult>& calibration() const { return calibration_; }
    const std::vector<CalibrationRep>& calibration_reps() const { return calibration_reps_; }
    const std::vector<TrialRecord>& trials() const { return trials_; }
    const std::vector<EventRecord>& events() const { return events_; }
    const std::vector<SampleRecord>& samples() const { return samples_; }

    bool complete() const { return header_.status == SessionStatus::Complete; }

    void set_status(SessionStatus s) { header_.status = s; }

    void set_calibration(const CalibrationResult& c) { calibration_ = c; }

    void append(const CalibrationRep& rep) { calibration_reps_.push_back(rep); }

    void append(const SampleRecord& s) {
        if (!std::isfinite(s.t)) throw ValidationError("sample time is not finite");
        if (!samples_.empty() && !(s.t > samples_.back().t))
            throw ValidationError("sample time regression: " + std::to_string(s.t) +
                                  " <= " + std::to_string(samples_.back().t));
        samples_.push_back(s);
    }

    void append(const EventRecord& e) {
        if (!events_.empty() && !(e.tick > events_.back().tick))
            throw ValidationError("event tick regression at tick " + std::to_string(e.tick));
        events_.push_back(e);
    }

    void append(const TrialRecord& r) {
        if (r.signed_error != r.final_angle - r.target)
            throw ValidationError("trial signed_error must equal final - target");
        if (std::abs(r.signed_error) > kMaxAngle - kMinAngle) throw ValidationError("trial |signed_error| > 135");
        trials_.push_back(r);
    }

    friend bool operator==(const SessionLog&, const SessionLog&) = default;

private:
    SessionHeader header_;
    std::optional<CalibrationResult> calibration_;
    std::vector<CalibrationRep> calibration_reps_;
    std::vector<TrialRecord> trials_;
    std::vector<EventRecord> events_;
    std::vector<SampleRecord> samples_;
};

/// Malformed log file; `line()` is 1-based, 0 when not tied to a line.
class LogParseError : public std::runtime_error {
public:
    LogParseError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

namespace csv_detail {

inline constexpr std::string_view kMagic = "#proprio_session_log";
inline constexpr std::string_view kCalibrationColumns = "rep,min_pos_mm,max_pos_mm,min_force_n,max_force_n";
inline constexpr std::string_view kTrialColumns =
    "phase,condition,block,trial,target_deg,final_deg,signed_error_deg,duration_s,key_presses,steady_force_n";
inline constexpr std::string_view kEventColumns = "tick,t_s,action";
inline constexpr std::string_view kSampleColumns = "t_s,actuator_pos_mm,commanded_pos_mm,force_n,arm_deg,phase,condition";

/// Shortest text that parses back to the identical double.
inline void put(std::string& out, double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

template <class Int>
inline void put_int(std::string& out, Int v) {
    char buf[24];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

inline std::string condition_code(const std::optional<Condition>& c) { return c ? c->code() : "-"; }

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

struct Reader {
    std::istream& in;
    std::string source;
    std::size_t line_no = 0;
    std::string line;

    bool next() {
        if (!std::getline(in, line)) return false;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    }

    [[noreturn]] void fail(const std::string& what) const { throw LogParseError(source, line_no, what); }

    void expect_next(const char* what) {
        if (!next()) {
            ++line_no;
            fail(std::string("unexpected end of file, expected ") + what);
        }
    }

    double num(std::string_view s, const char* field) const {
        double v{};
        auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v))
            fail(std::string("bad number in field '") + field + "': '" + std::string(s) + "'");
        return v;
    }

    template <class Int>
    Int integer(std::string_view s, const char* field) const {
        Int v{};
        auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
            fail(std::string("bad integer in field '") + field + "': '" + std::string(s) + "'");
        return v;
    }

    std::vector<std::string_view> fields(std::size_t expected) const {
        auto f = split(line);
        if (f.size() != expected)
            fail("expected " + std::to_string(expected) + " fields, found " + std::to_string(f.size()));
        return f;
    }

    /// Reads "#key,value" and checks the key.
    std::string header_value(std::string_view key) {
        expect_next(("#" + std::string(key)).c_str());
        auto f = split(line);
        if (f.size() != 2 || f[0] != "#" + std::string(key)) fail("expected header '#" + std::string(key) + ",<value>'");
        return std::string(f[1]);
    }

    /// Reads "#table,<name>,<rows>" and the column line; returns the row count.
    std::size_t table_start(std::string_view name, std::string_view columns) {
        expect_next(("#table," + std::string(name)).c_str());
        auto f = split(line);
        if (f.size() != 3 || f[0] != "#table" || f[1] != name) fail("expected '#table," + std::string(name) + ",<rows>'");
        auto rows = integer<std::size_t>(f[2], "rows");
        expect_next("column header");
        if (line != columns) fail("unexpected columns for table " + std::string(name));
        return rows;
    }
};

}  // namespace csv_detail

/// Serializes a log: '#'-prefixed header block followed by the calibration,
/// trial, event and sample tables, each introduced by "#table,<name>,<rows>".
inline std::string to_csv(const SessionLog& log) {
    using namespace csv_detail;
    std::string out;
    out.reserve(128 + log.samples().size() * 64 + log.trials().size() * 96);
    const auto& h = log.header();
    out += kMagic;
    out += ',';
    put_int(out, h.schema_version);
    out += "\n#participant_id,";
    out += h.participant_id;
    out += "\n#seed,";
    put_int(out, h.seed);
    out += "\n#group,";
    out += to_string(h.group);
    out += "\n#config_hash,";
    out += h.config_hash;
    out += "\n#status,";
    out += to_string(h.status);
    out += "\n#calibration,";
    if (const auto& c = log.calibration()) {
        put(out, c->min_pos.value());
        out += ';';
        put(out, c->max_pos.value());
        out += ';';
        put(out, c->min_force.value());
        out += ';';
        put(out, c->max_force.value());
        out += ';';
        put_int(out, c->repetitions);
    } else {
        out += '-';
    }
    out += '\n';

    out += "#table,calibration,";
    put_int(out, log.calibration_reps().size());
    out += '\n';
    out += kCalibrationColumns;
    out += '\n';
    int rep = 0;
    for (const auto& r : log.calibration_reps()) {
        put_int(out, rep++);
        for (double v : {r.min_pos, r.max_pos, r.min_force, r.max_force}) {
            out += ',';
            put(out, v);
        }
        out += '\n';
    }

    out += "#table,trials,";
    put_int(out, log.trials().size());
    out += '\n';
    out += kTrialColumns;
    out += '\n';
    for (const auto& t : log.trials()) {
        out += to_string(t.phase);
        out += ',';
        out += t.condition.code();
        out += ',';
        put_int(out, t.block_index);
        out += ',';
        put_int(out, t.trial_index);
        for (double v : {t.target, t.final_angle, t.signed_error, t.duration}) {
            out += ',';
            put(out, v);
        }
        out += ',';
        put_int(out, t.key_presses);
        out += ',';
        put(out, t.steady_force);
        out += '\n';
    }

    out += "#table,events,";
    put_int(out, log.events().size());
    out += '\n';
    out += kEventColumns;
    out += '\n';
    for (const auto& e : log.events()) {
        put_int(out, e.tick);
        out += ',';
        put(out, e.t);
        out += ',';
        out += to_string(e.action);
        out += '\n';
    }

    out += "#table,samples,";
    put_int(out, log.samples().size());
    out += '\n';
    out += kSampleColumns;
    out += '\n';
    for (const auto& s : log.samples()) {
        put(out, s.t);
        for (double v : {s.actuator_pos, s.commanded_pos, s.force, s.arm_angle}) {
            out += ',';
            put(out, v);
        }
        out += ',';
        out += to_string(s.phase);
        out += ',';
        out += condition_code(s.condition);
        out += '\n';
    }
    return out;
}

inline SessionLog parse_csv(std::istream& in, const std::string& source = "<stream>") {
    using namespace csv_detail;
    Reader rd{in, source, {}};

    rd.expect_next("log magic");
    {
        auto f = split(rd.line);
        if (f.size() != 2 || f[0] != kMagic) rd.fail("not a session log (missing '#proprio_session_log' line)");
        const int version = rd.integer<int>(f[1], "schema_version");
        if (version != kLogSchemaVersion)
            rd.fail("schema version mismatch: file has " + std::to_string(version) + ", expected " +
                    std::to_string(kLogSchemaVersion));
    }

    SessionHeader h;
    h.participant_id = rd.header_value("participant_id");
    h.seed = rd.integer<std::uint64_t>(rd.header_value("seed"), "seed");
    {
        auto g = parse_group(rd.header_value("group"));
        if (!g) rd.fail("unknown group");
        h.group = *g;
    }
    h.config_hash = rd.header_value("config_hash");
    {
        auto st = parse_status(rd.header_value("status"));
        if (!st) rd.fail("unknown status");
        h.status = *st;
    }
    SessionLog log(h);

    const std::string calib = rd.header_value("calibration");
    if (calib != "-") {
        std::vector<std::string_view> parts;
        std::string_view sv(calib);
        std::size_t start = 0;
        for (std::size_t pos; (pos = sv.find(';', start)) != std::string_view::npos; start = pos + 1)
            parts.push_back(sv.substr(start, pos - start));
        parts.push_back(sv.substr(start));
        if (parts.size() != 5) rd.fail("calibration header needs 5 ';'-separated values");
        try {
            CalibrationResult c{ActuatorPos::make(rd.num(parts[0], "min_pos")), ActuatorPos::make(rd.num(parts[1], "max_pos")),
                                ForceN::make(rd.num(parts[2], "min_force")), ForceN::make(rd.num(parts[3], "max_force")),
                                rd.integer<int>(parts[4], "repetitions")};
            log.set_calibration(c);
        } catch (const ValidationError& e) {
            rd.fail(e.what());
        }
    }

    const auto n_calib = rd.table_start("calibration", kCalibrationColumns);
    for (std::size_t i = 0; i < n_calib; ++i) {
        rd.expect_next("calibration row");
        auto f = rd.fields(5);
        log.append(CalibrationRep{rd.num(f[1], "min_pos_mm"), rd.num(f[2], "max_pos_mm"), rd.num(f[3], "min_force_n"),
                                  rd.num(f[4], "max_force_n")});
    }

    const auto n_trials = rd.table_start("trials", kTrialColumns);
    for (std::size_t i = 0; i < n_trials; ++i) {
        rd.expect_next("trial row");
        auto f = rd.fields(10);
        TrialRecord t;
        auto phase = parse_phase(f[0]);
        if (!phase) rd.fail("unknown phase '" + std::string(f[0]) + "'");
        auto cond = Condition::parse(f[1]);
        if (!cond) rd.fail("unknown condition '" + std::string(f[1]) + "'");
        t.phase = *phase;
        t.condition = *cond;
        t.block_index = rd.integer<int>(f[2], "block");
        t.trial_index = rd.integer<int>(f[3], "trial");
        t.target = rd.num(f[4], "target_deg");
        t.final_angle = rd.num(f[5], "final_deg");
        t.signed_error = rd.num(f[6], "signed_error_deg");
        t.duration = rd.num(f[7], "duration_s");
        t.key_presses = rd.integer<int>(f[8], "key_presses");
        t.steady_force = rd.num(f[9], "steady_force_n");
        try {
            log.append(t);
        } catch (const ValidationError& e) {
            rd.fail(e.what());
        }
    }

    const auto n_events = rd.table_start("events", kEventColumns);
    for (std::size_t i = 0; i < n_events; ++i) {
        rd.expect_next("event row");
        auto f = rd.fields(3);
        auto a = parse_action(f[2]);
        if (!a) rd.fail("unknown action '" + std::string(f[2]) + "'");
        try {
            log.append(EventRecord{rd.integer<std::uint64_t>(f[0], "tick"), rd.num(f[1], "t_s"), *a});
        } catch (const ValidationError& e) {
            rd.fail(e.what());
        }
    }

    const auto n_samples = rd.table_start("samples", kSampleColumns);
    for (std::size_t i = 0; i < n_samples; ++i) {
        rd.expect_next("sample row");
        auto f = rd.fields(7);
        SampleRecord s;
        s.t = rd.num(f[0], "t_s");
        s.actuator_pos = rd.num(f[1], "actuator_pos_mm");
        s.commanded_pos = rd.num(f[2], "commanded_pos_mm");
        s.force = rd.num(f[3], "force_n");
        s.arm_angle = rd.num(f[4], "arm_deg");
        auto phase = parse_phase(f[5]);
        if (!phase) rd.fail("unknown phase '" + std::string(f[5]) + "'");
        s.phase = *phase;
        if (f[6] != "-") {
            auto cond = Condition::parse(f[6]);
            if (!cond) rd.fail("unknown condition '" + std::string(f[6]) + "'");
            s.condition = *cond;
        }
        try {
            log.append(s);
        } catch (const ValidationError& e) {
            rd.fail(e.what());
        }
    }

    while (rd.next())
        if (!rd.line.empty()) rd.fail("trailing content after samples table");
    return log;
}

inline std::string log_file_name(const SessionLog& log) {
    return "session_" + log.header().participant_id + "_" + std::to_string(log.header().seed) + ".csv";
}

inline void export_csv(const SessionLog& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const std::string text = to_csv(log);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline SessionLog import_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LogParseError(path.string(), 0, "cannot open file");
    return parse_csv(in, path.string());
}

}  // namespace proprio
