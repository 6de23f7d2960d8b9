#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "critique_rl/env.hpp"
#include "critique_rl/errors.hpp"
#include "critique_rl/metrics.hpp"
#include "critique_rl/optim.hpp"
#include "critique_rl/policy.hpp"
#include "critique_rl/rewards.hpp"

namespace crl {

enum class EstimatorKind { Exact, Rloo, Reinforce };

struct Estimator {
  EstimatorKind kind = EstimatorKind::Exact;
  std::size_t k = 4;           // critiques per prompt (sampled kinds)
  std::size_t batch = 64;      // prompts per step (sampled kinds)
};

std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(const std::string& name);

enum class StageKind { SftOnly, StageI, StageII, SingleStage, Star };

std::string to_string(StageKind kind);
StageKind parse_stage_kind(const std::string& name);

inline constexpr double kDefaultExactLearningRate = 1.5;
inline constexpr double kDefaultSampledLearningRate = 0.5;

struct StageConfig {
  StageKind stage = StageKind::StageI;
  std::size_t steps = 500;
  Estimator estimator;
  double learning_rate = kDefaultExactLearningRate;
  /// beta for Stage I and single-stage runs, beta2 for Stage II.
  double kl_coefficient = 0.01;
  KlDirection kl_direction = KlDirection::ReferenceFirst;
  /// Stage II weight of r_dis.
  double beta1 = 0.2;
  /// Stage II refinement term (refine, or delta/correction for ablations);
  /// the reward of a SingleStage run.
  RewardVariant reward = RewardVariant::Refine;
  std::size_t log_every = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DynamicsRecord {
  std::size_t step = 0;
  MetricsReport metrics;
  double mean_reward = 0.0;
  double kl = 0.0;
};

/// Training curve of one stage; steps strictly increasing.
struct DynamicsLog {
  std::vector<DynamicsRecord> records;
};

/// Fixed CSV header of DynamicsLog::to_csv.
extern const char* const kDynamicsCsvHeader;

std::string dynamics_to_csv(const DynamicsLog& log);

struct StageResult {
  PolicySnapshot final_snapshot;
  /// Logged step with the best headline metric (Acc@Dis for Stage I,
  /// Acc@Refine otherwise), reported alongside the final one.
  PolicySnapshot best_snapshot;
  std::size_t best_step = 0;
  DynamicsLog log;
};

/// Raised when an update is refused; carries the last good policy and the
/// curve so far.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, PolicySnapshot last_good, DynamicsLog log)
      : NumericError(what), last_good_(std::move(last_good)), log_(std::move(log)) {}

  const PolicySnapshot& last_good() const { return last_good_; }
  const DynamicsLog& log() const { return log_; }

 private:
  PolicySnapshot last_good_;
  DynamicsLog log_;
};

/// Teacher rollouts -> filter on refinement correctness -> smoothed MLE.
PolicySnapshot run_sft(const TaskSpec& spec, const CriticPolicy& teacher, std::size_t n,
                       double smoothing, std::uint64_t seed);

/// Maximizes E[r_dis] - beta KL(init || current).
StageResult run_stage1(const TaskSpec& spec, const PolicySnapshot& init, const StageConfig& config);

/// Maximizes E[r_refine + beta1 r_dis] - beta2 KL(init || current); `init` must be Stage I.
StageResult run_stage2(const TaskSpec& spec, const PolicySnapshot& init, const StageConfig& config);

/// One-stage training on refine, delta or correction with KL to `init`.
StageResult run_single_stage(const TaskSpec& spec, const PolicySnapshot& init,
                             RewardVariant reward, const StageConfig& config);

/// Iterated self-training: sample critiques, keep those whose refinement was
/// correct, refit. Rounds with no surviving data are skipped.
/// When `log` is given it receives the exact metrics after every round
/// (step = round number, step 0 = init).
PolicySnapshot run_star(const TaskSpec& spec, const PolicySnapshot& init, std::size_t rounds,
                        std::size_t n_per_round, double smoothing, std::uint64_t seed,
                        DynamicsLog* log = nullptr);

/// Multi-round critique/refine on one question. Round i > 1 critiques and
/// refines the previous round's refined answer.
std::vector<Episode> iterative_refine(const TaskSpec& spec, const CriticPolicy& critic,
                                      std::size_t question, std::size_t rounds, RngStream& rng);

/// Exact P(correct) after each round of iterative_refine, averaged over
/// questions; element 0 is the original accuracy.
std::vector<double> exact_iterative_accuracy(const TaskSpec& spec, const CriticPolicy& critic,
                                             std::size_t rounds);

/// Alternates Stage I (reference = previous snapshot) and Stage II.
/// Returns init followed by the Stage I / Stage II snapshot of every iteration;
/// `results`, when given, receives every stage's full result in order.
std::vector<PolicySnapshot> iterative_train(const TaskSpec& spec, const PolicySnapshot& init,
                                            std::size_t iterations,
                                            const StageConfig& stage1_config,
                                            const StageConfig& stage2_config,
                                            std::vector<StageResult>* results = nullptr);

}  // namespace crl
