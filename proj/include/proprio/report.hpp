#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "proprio/analysis.hpp"

namespace proprio::report {

enum class Table { Calibration, Summary, Angle, Force, Learning };

inline constexpr Table kAllTables[] = {Table::Calibration, Table::Summary, Table::Angle, Table::Force, Table::Learning};

inline constexpr std::string_view to_string(Table t) {
    switch (t) {
        case Table::Calibration: return "calibration";
        case Table::Summary: return "summary";
        case Table::Angle: return "angle";
        case Table::Force: return "force";
        case Table::Learning: return "learning";
    }
    return "";
}

/// Parses "all" or a comma-separated list of table names.
inline std::set<Table> parse_tables(std::string_view spec) {
    std::set<Table> out;
    for (auto name : csv_detail::split(spec)) {
        if (name == "all") {
            out.insert(std::begin(kAllTables), std::end(kAllTables));
            continue;
        }
        bool found = false;
        for (Table t : kAllTables)
            if (to_string(t) == name) {
                out.insert(t);
                found = true;
            }
        if (!found) throw ValidationError("unknown table '" + std::string(name) + "'");
    }
    if (out.empty()) throw ValidationError("no tables selected");
    return out;
}

struct Outcome {
    std::vector<std::filesystem::path> written;
    std::vector<std::string> errors;  // one line each
};

inline void write_text(const std::filesystem::path& path, const std::string& text, Outcome& o) {
    std::ofstream out(path, std::ios::binary);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
    o.written.push_back(path);
}

/// Writes the selected tables into `dir`. Tables that cannot be computed
/// are reported in `errors`; the rest are still written. The summary
/// selection also writes stats.csv when at least two participants exist.
inline Outcome write_tables(std::span<const SessionLog> logs, const std::filesystem::path& dir,
                            const std::set<Table>& tables, const analysis::DifficultyRatings* difficulty = nullptr) {
    Outcome o;
    std::filesystem::create_directories(dir);
    std::vector<SessionLog> complete;
    for (const auto& l : logs)
        if (l.complete()) complete.push_back(l);

    auto attempt = [&](Table t, auto&& body) {
        if (!tables.count(t)) return;
        try {
            body();
        } catch (const std::exception& e) {
            o.errors.push_back(std::string(to_string(t)) + ": " + e.what());
        }
    };
    attempt(Table::Calibration, [&] { write_text(dir / "calibration.csv", analysis::calibration_table(logs), o); });
    attempt(Table::Summary, [&] {
        const auto rows = analysis::summarize_conditions(complete, difficulty);
        write_text(dir / "summary.csv", analysis::summary_table(rows), o);
        if (complete.size() >= 2) write_text(dir / "stats.csv", analysis::stats_table(analysis::error_statistics(complete)), o);
    });
    attempt(Table::Angle, [&] {
        const auto rows = analysis::by_angle(complete);
        write_text(dir / "angle.csv", analysis::angle_table(rows), o);
    });
    attempt(Table::Force, [&] {
        const auto rows = analysis::by_angle(complete);
        std::vector<analysis::ForceFit> fits;
        for (const Condition c : kConditionsDisplayOrder) fits.push_back(analysis::force_angle_regression(complete, c));
        write_text(dir / "force.csv", analysis::force_table(rows, fits), o);
    });
    attempt(Table::Learning, [&] {
        const auto pts = analysis::learning_curve(complete);
        write_text(dir / "learning.csv", analysis::learning_table(pts), o);
    });
    return o;
}

}  // namespace proprio::report
