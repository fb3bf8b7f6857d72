#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "proprio/config.hpp"

namespace proprio::serve {

struct Options {
    SessionConfig config;
    unsigned short port = 8080;  // 0 picks a free port
    std::filesystem::path out_dir = ".";
    std::optional<std::filesystem::path> static_dir;
    double speed = 1.0;    // wall-clock speed-up of the control loop
    int max_sessions = 0;  // stop after this many sessions; 0 runs until stopped
    std::function<void(unsigned short)> on_listening;
    std::function<void(const std::filesystem::path&)> on_log_written;
};

/// Blocks until `max_sessions` sessions have finished. Returns the number
/// of sessions whose log was written.
int run(const Options& opts);

}  // namespace proprio::serve
