// proprio: simulate cohorts, serve live sessions, analyze logs.
//
// Exit codes: 0 ok, 1 usage or config error, 2 runtime error,
// 3 analysis finished with some files or tables skipped.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "proprio/config.hpp"
#include "proprio/report.hpp"
#include "proprio/session.hpp"
#include "serve.hpp"

namespace fs = std::filesystem;
using namespace proprio;

namespace {

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2, kPartial = 3 };

void error_line(const std::string& where, const std::string& what) { std::cerr << "error: " << where << ": " << what << "\n"; }

std::optional<SessionConfig> resolve_config(const std::string& path) {
    try {
        return path.empty() ? SessionConfig{} : load_config(path);
    } catch (const std::exception& e) {
        error_line(path.empty() ? "config" : path, e.what());
        return std::nullopt;
    }
}

int cmd_validate(const std::string& path) {
    auto cfg = resolve_config(path);
    if (!cfg) return kUsage;
    try {
        cfg->validate();
    } catch (const std::exception& e) {
        error_line(path, e.what());
        return kUsage;
    }
    std::cout << to_json(*cfg).dump(2) << "\n";
    return kOk;
}

int cmd_simulate(const std::string& config, int n, std::uint64_t seed, const fs::path& out) {
    auto cfg = resolve_config(config);
    if (!cfg) return kUsage;
    try {
        cfg->validate();
    } catch (const std::exception& e) {
        error_line(config.empty() ? "config" : config, e.what());
        return kUsage;
    }
    try {
        fs::create_directories(out);
        std::vector<SessionLog> logs;
        for (int i = 0; i < n; ++i) {
            logs.push_back(simulate_participant(*cfg, seed, i));
            export_csv(logs.back(), out / log_file_name(logs.back()));
        }
        const auto outcome = report::write_tables(logs, out, {report::Table::Summary});
        for (const auto& e : outcome.errors) error_line("summary", e);
        std::cout << "wrote " << n << " session logs to " << out.string() << "\n";
        return outcome.errors.empty() ? kOk : kRuntime;
    } catch (const std::exception& e) {
        error_line("simulate", e.what());
        return kRuntime;
    }
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(in)) {
                const auto name = e.path().filename().string();
                if (e.is_regular_file() && name.rfind("session_", 0) == 0 && e.path().extension() == ".csv")
                    found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.emplace_back(in);
        }
    }
    return files;
}

int cmd_analyze(const std::vector<std::string>& inputs, const fs::path& out, const std::string& tables,
                const std::string& difficulty_path) {
    std::set<report::Table> selection;
    try {
        selection = report::parse_tables(tables);
    } catch (const std::exception& e) {
        error_line("--tables", e.what());
        return kUsage;
    }
    std::optional<analysis::DifficultyRatings> difficulty;
    if (!difficulty_path.empty()) {
        std::ifstream in(difficulty_path);
        if (!in) {
            error_line(difficulty_path, "cannot open file");
            return kUsage;
        }
        try {
            difficulty = analysis::parse_difficulty_csv(in, difficulty_path);
        } catch (const std::exception& e) {
            error_line(difficulty_path, e.what());
            return kUsage;
        }
    }

    const auto files = expand_inputs(inputs);
    if (files.empty()) {
        error_line("analyze", "no session logs found in the given inputs");
        return kRuntime;
    }
    bool partial = false;
    std::vector<SessionLog> logs;
    for (const auto& f : files) {
        try {
            logs.push_back(import_csv(f));
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            partial = true;
            continue;
        }
        if (!logs.back().complete()) {
            error_line(f.string(), "session status is " + std::string(to_string(logs.back().header().status)) +
                                       "; excluded from condition analyses");
            partial = true;
        }
    }
    if (logs.empty()) {
        error_line("analyze", "none of the inputs could be imported");
        return kRuntime;
    }
    try {
        const auto outcome = report::write_tables(logs, out, selection, difficulty ? &*difficulty : nullptr);
        for (const auto& e : outcome.errors) error_line("table", e);
        for (const auto& p : outcome.written) std::cout << p.string() << "\n";
        if (!outcome.errors.empty()) partial = true;
        if (outcome.written.empty()) return kRuntime;
    } catch (const std::exception& e) {
        error_line("analyze", e.what());
        return kRuntime;
    }
    return partial ? kPartial : kOk;
}

int cmd_serve(const std::string& config, int port, const fs::path& out, const std::string& static_dir, double speed,
              int max_sessions) {
    auto cfg = resolve_config(config);
    if (!cfg) return kUsage;
    serve::Options opts;
    opts.config = *cfg;
    opts.port = static_cast<unsigned short>(port);
    opts.out_dir = out;
    if (!static_dir.empty()) opts.static_dir = fs::path(static_dir);
    opts.speed = speed;
    opts.max_sessions = max_sessions;
    opts.on_listening = [](unsigned short p) { std::cout << "listening on 127.0.0.1:" << p << std::endl; };
    try {
        serve::run(opts);
    } catch (const ValidationError& e) {
        error_line(config.empty() ? "config" : config, e.what());
        return kUsage;
    } catch (const std::exception& e) {
        error_line("serve", e.what());
        return kRuntime;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale simulation and analysis of a deep-pressure proprioception experiment"};
    app.require_subcommand(1);

    std::string config;
    auto* validate = app.add_subcommand("validate", "Print the fully resolved configuration");
    validate->add_option("--config", config, "JSON config file")->required();

    int n = 14;
    std::uint64_t seed = 1;
    std::string out = "out";
    auto* simulate = app.add_subcommand("simulate", "Run a synthetic cohort and write session logs");
    simulate->add_option("--config", config, "JSON config file (defaults if omitted)");
    simulate->add_option("--n", n, "number of participants")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", seed, "master seed");
    simulate->add_option("--out", out, "output directory");

    int port = 8080;
    std::string static_dir;
    double speed = 1.0;
    int max_sessions = 0;
    auto* serve_cmd = app.add_subcommand("serve", "Serve live sessions to the browser UI over WebSocket");
    serve_cmd->add_option("--config", config, "JSON config file (defaults if omitted)");
    serve_cmd->add_option("--port", port, "TCP port on 127.0.0.1 (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--out", out, "directory for session logs");
    serve_cmd->add_option("--static", static_dir, "directory of UI assets served over HTTP");
    serve_cmd->add_option("--speed", speed, "control-loop speed-up over wall clock")->check(CLI::PositiveNumber);
    serve_cmd->add_option("--max-sessions", max_sessions, "exit after this many sessions (0: run until stopped)")
        ->check(CLI::NonNegativeNumber);

    std::vector<std::string> inputs;
    std::string tables = "all";
    std::string difficulty;
    auto* analyze = app.add_subcommand("analyze", "Compute result tables from session logs");
    analyze->add_option("--in", inputs, "log files or directories")->required();
    analyze->add_option("--out", out, "output directory");
    analyze->add_option("--tables", tables, "all or a comma list of calibration,summary,angle,force,learning");
    analyze->add_option("--difficulty", difficulty, "CSV of participant_id,condition,rating");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    if (*validate) return cmd_validate(config);
    if (*simulate) return cmd_simulate(config, n, seed, out);
    if (*serve_cmd) return cmd_serve(config, port, out, static_dir, speed, max_sessions);
    if (*analyze) return cmd_analyze(inputs, out, tables, difficulty);
    return kUsage;
}
