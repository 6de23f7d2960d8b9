#pragma once

#include <filesystem>
#include <string>

#include "critique_rl/env.hpp"
#include "critique_rl/metrics.hpp"
#include "critique_rl/pipeline.hpp"
#include "critique_rl/policy.hpp"

// Plain-text (JSON) persistence for task specs, checkpoints, metrics and
// training curves. Doubles are written in shortest round-trip form, so a
// write/read cycle reproduces every value bit for bit.

namespace crl {

std::string task_to_text(const TaskSpec& spec);
TaskSpec task_from_text(const std::string& text);

std::string checkpoint_to_text(const PolicySnapshot& snapshot);
PolicySnapshot checkpoint_from_text(const std::string& text);

/// Flat record: one key per metric plus the six counts and flags.
std::string metrics_to_text(const MetricsReport& report);

/// CSV header/row for a MetricsReport (same field order as metrics_to_text).
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& report);

std::string dynamics_to_text(const DynamicsLog& log);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

TaskSpec load_task(const std::filesystem::path& path);
PolicySnapshot load_checkpoint(const std::filesystem::path& path);

}  // namespace crl
