#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "critique_rl/env.hpp"
#include "critique_rl/policy.hpp"
#include "critique_rl/rewards.hpp"

namespace crl {

/// Which way round the KL penalty is taken. ReferenceFirst is KL(ref || current).
enum class KlDirection { ReferenceFirst, PolicyFirst };

std::string to_string(KlDirection direction);
KlDirection parse_kl_direction(const std::string& name);

/// E[reward] - kl_coefficient * KL, with the KL measured against `reference`
/// under the rollout visitation weights.
struct Objective {
  RewardFn reward;
  double kl_coefficient = 0.0;
  PolicySnapshot reference;
  KlDirection kl_direction = KlDirection::ReferenceFirst;
};

struct GradEstimate {
  PolicyShape shape;
  std::vector<double> gradient;  // congruent with CriticPolicy::logits()
  std::size_t sample_count = 0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;

  double l2_norm() const;
};

// ---------------------------------------------------------------------------
// Supervised initialization

struct SftSample {
  std::size_t context = 0;
  std::size_t action = 0;
  bool refined_correct = false;
};

struct SftDataset {
  PolicyShape shape;
  std::vector<SftSample> samples;
  /// Rollouts drawn before filtering.
  std::size_t generated = 0;
};

/// A prompted base critic: says FLAW with a probability that depends on the
/// original answer's correctness, and names the helpful hint with
/// probability p_correct_hint (other hints share the rest evenly).
struct TeacherSpec {
  double p_flaw_given_correct = 0.8;
  double p_flaw_given_incorrect = 0.95;
  double p_correct_hint = 0.8;
};

CriticPolicy make_teacher(const TaskSpec& spec, const TeacherSpec& teacher);

/// Critic that says OK on correct answers and FLAW with the helpful hint otherwise.
CriticPolicy perfect_critic(const TaskSpec& spec, double gap = 50.0);

/// n teacher rollouts, keeping only pairs whose refinement came out correct.
SftDataset generate_sft_data(const TaskSpec& spec, const CriticPolicy& teacher, std::size_t n,
                             std::uint64_t seed);

/// Maximum likelihood with add-`smoothing` counts: logits = ln(count + smoothing).
CriticPolicy sft_fit(const SftDataset& dataset, double smoothing = 1.0);

// ---------------------------------------------------------------------------
// Exact expectations by enumeration

/// E[reward | context, action], enumerating refinement outcomes.
std::vector<double> expected_reward_table(const TaskSpec& spec, const RewardFn& reward);

double exact_expected_reward(const TaskSpec& spec, const CriticPolicy& policy,
                             const RewardFn& reward);

/// KL term of the objective in its configured direction.
double objective_kl(const TaskSpec& spec, const CriticPolicy& policy, const Objective& objective);

double exact_objective(const TaskSpec& spec, const CriticPolicy& policy,
                       const Objective& objective);

/// Gradient of the weighted KL penalty kl_coefficient * KL w.r.t. the logits
/// (the quantity to subtract from a reward gradient).
std::vector<double> kl_penalty_gradient(const TaskSpec& spec, const CriticPolicy& policy,
                                        const Objective& objective);

/// Analytic gradient of exact_objective w.r.t. every logit.
GradEstimate exact_gradient(const TaskSpec& spec, const CriticPolicy& policy,
                            const Objective& objective);

// ---------------------------------------------------------------------------
// Sampled estimators

struct Prompt {
  std::size_t question = 0;
  std::size_t original_answer = 0;
};

/// Questions uniform, original answers from the actor.
std::vector<Prompt> sample_prompts(const TaskSpec& spec, std::size_t count, RngStream& rng);

/// advantage_i = r_i - mean_{j != i} r_j.
std::vector<double> rloo_advantages(std::span<const double> rewards);

/// Leave-one-out policy gradient with k critiques per prompt, minus the
/// analytic KL penalty gradient.
GradEstimate rloo_gradient(const TaskSpec& spec, const CriticPolicy& policy,
                           const Objective& objective, std::span<const Prompt> prompts,
                           std::size_t k, RngStream& rng);

/// As rloo_gradient with advantage_i = r_i (no baseline).
GradEstimate reinforce_gradient(const TaskSpec& spec, const CriticPolicy& policy,
                                const Objective& objective, std::span<const Prompt> prompts,
                                std::size_t k, RngStream& rng);

/// logits += learning_rate * gradient. Refuses non-finite gradients.
CriticPolicy ascend(const CriticPolicy& policy, const GradEstimate& grad, double learning_rate);

}  // namespace crl
