#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "critique_rl/config.hpp"
#include "critique_rl/metrics.hpp"

namespace crl {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumeric = 2;

/// Parses argv and dispatches to a subcommand (gen-env, train, eval, scaling,
/// iterate). Errors are reported on `err` and mapped to the exit codes above.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Writes the generated task to `path` and prints a one-line summary.
TaskSpec cmd_gen_env(const EnvParams& params, const std::filesystem::path& path, std::ostream& out);

/// SFT followed by every configured stage. Writes checkpoints, dynamics
/// CSV/JSON, a summary CSV and manifest.json into config.output_dir. On a
/// numeric abort the outputs so far are kept, the manifest is marked
/// incomplete and the TrainingAborted is rethrown.
void cmd_train(const ExperimentConfig& config, std::ostream& out);

/// Exact metrics, or compute_metrics over `episodes` rollouts when !exact.
MetricsReport cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& env,
                       bool exact, std::size_t episodes, std::uint64_t seed,
                       const std::filesystem::path& output, std::ostream& out);

/// Fixed CSV header of the scaling table.
extern const char* const kScalingCsvHeader;
std::string scaling_to_csv(const std::vector<ScalingRow>& rows);

std::vector<ScalingRow> cmd_scaling(const std::filesystem::path& checkpoint,
                                    const std::filesystem::path& env,
                                    const std::vector<std::size_t>& ks, std::size_t trials,
                                    std::uint64_t seed, const std::filesystem::path& output,
                                    std::ostream& out);

/// SFT, `iterations` rounds of Stage I + Stage II (first stage1/stage2 entries
/// of the config), then the multi-round refinement curve of the final critic.
void cmd_iterate(const ExperimentConfig& config, std::size_t iterations, std::size_t refine_rounds,
                 std::ostream& out);

std::string sha256_hex(const std::string& data);

}  // namespace crl
