#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "critique_rl/env.hpp"
#include "critique_rl/optim.hpp"
#include "critique_rl/pipeline.hpp"

namespace crl {

struct SftSettings {
  TeacherSpec teacher;
  /// Use this checkpoint as the teacher instead of `teacher`.
  std::optional<std::filesystem::path> teacher_checkpoint;
  std::size_t n = 20000;
  double smoothing = 1.0;
};

/// Where a stage starts from.
///   "previous": the latest SFT / Stage I / Stage II snapshot (default for
///               stage1/stage2; single and star stages do not advance it)
///   "sft":      the SFT snapshot (default for single/star)
///   otherwise:  path to a checkpoint file
struct StageEntry {
  std::string name;
  StageConfig config;
  std::string init;
  bool learning_rate_set = false;
  std::size_t star_rounds = 3;
  std::size_t star_samples = 20000;
};

struct EvalSettings {
  std::size_t episodes = 500000;
  bool exact = true;
};

struct ScalingSettings {
  std::vector<std::size_t> ks{1, 2, 4, 8};
  std::size_t trials = 10000;
};

struct ExperimentConfig {
  std::string preset;
  EnvParams env;
  std::optional<std::filesystem::path> env_path;
  SftSettings sft;
  std::vector<StageEntry> stages;
  EvalSettings eval;
  ScalingSettings scaling;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "run";

  /// Stage ordering and per-stage settings; throws ConfigError.
  void validate() const;

  /// Switch every RL stage to the exact or the RLOO estimator. Stages without
  /// an explicit learning rate take the mode's default.
  void set_exact(bool exact);

  /// Seeds derived from `seed` for the SFT draw and each stage.
  std::uint64_t sft_seed() const;
  std::uint64_t stage_seed(std::size_t index) const;
};

/// Names accepted by preset_config.
std::vector<std::string> preset_names();

/// paper-main:      beta = 0.01, beta1 = 0.2, beta2 = 0.01
/// paper-appendix:  beta = 0.01, beta1 = 0.9, beta2 = 0.95
/// failure-modes:   paper-main plus refine/delta/correction single-stage
///                  baselines and STaR, all from the same SFT critic
ExperimentConfig preset_config(const std::string& name);

/// Parse a config document. A "preset" key seeds the defaults; every other
/// key overrides it. Relative paths resolve against `base_dir`.
ExperimentConfig config_from_text(const std::string& text,
                                  const std::filesystem::path& base_dir = {});

ExperimentConfig load_config(const std::filesystem::path& path);

/// Materialize the task: from env_path when set, else generated from env.
TaskSpec resolve_task(const ExperimentConfig& config);

}  // namespace crl
