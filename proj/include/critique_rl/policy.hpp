#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "critique_rl/rng.hpp"

namespace crl {

enum class Verdict : int { Flaw = 0, Ok = 1 };

/// A critique: the extracted judgment of the original answer plus a hint.
struct Critique {
  Verdict verdict = Verdict::Ok;
  std::size_t hint = 0;

  friend bool operator==(const Critique&, const Critique&) = default;
};

/// Dimensions of the critic's table. Contexts are (question, answer) pairs
/// laid out as question * num_answers + answer; actions are (verdict, hint)
/// pairs laid out as verdict * num_hints + hint.
struct PolicyShape {
  std::size_t num_questions = 0;
  std::size_t num_answers = 0;
  std::size_t num_hints = 0;

  std::size_t num_contexts() const { return num_questions * num_answers; }
  std::size_t num_actions() const { return 2 * num_hints; }

  std::size_t context(std::size_t question, std::size_t answer) const;
  std::size_t question_of(std::size_t context) const { return context / num_answers; }
  std::size_t answer_of(std::size_t context) const { return context % num_answers; }

  std::size_t action(const Critique& critique) const;
  Critique critique_of(std::size_t action) const;

  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

/// Tabular softmax critic: one row of logits per context.
class CriticPolicy {
 public:
  CriticPolicy() = default;
  /// All-zero logits (uniform critic).
  explicit CriticPolicy(PolicyShape shape);
  CriticPolicy(PolicyShape shape, std::vector<double> logits);

  const PolicyShape& shape() const { return shape_; }
  std::size_t num_contexts() const { return shape_.num_contexts(); }
  std::size_t num_actions() const { return shape_.num_actions(); }

  std::span<const double> row(std::size_t context) const;
  std::span<double> row(std::size_t context);
  const std::vector<double>& logits() const { return logits_; }
  std::vector<double>& logits() { return logits_; }

 private:
  PolicyShape shape_;
  std::vector<double> logits_;
};

/// Softmax of the context's logit row.
std::vector<double> action_distribution(const CriticPolicy& policy, std::size_t context);

double log_prob(const CriticPolicy& policy, std::size_t context, std::size_t action);

std::size_t sample_action(const CriticPolicy& policy, std::size_t context, RngStream& rng);

/// Categorical KL for a single pair of distributions, sum_a p ln(p/q).
double categorical_kl(std::span<const double> p, std::span<const double> q);

/// sum_s w(s) KL(p(.|s) || q(.|s)).
double kl_divergence(const CriticPolicy& p, const CriticPolicy& q,
                     std::span<const double> context_weights);

/// Policy that puts all but ~e^-gap of each row's mass on `actions[context]`.
CriticPolicy near_deterministic_policy(PolicyShape shape, std::span<const std::size_t> actions,
                                       double gap = 50.0);

/// Policy whose rows are ln of the given per-context distributions
/// (zero entries are floored to keep logits finite).
CriticPolicy policy_from_distributions(PolicyShape shape, std::span<const double> probabilities);

enum class Stage { Sft, StageI, StageII, SingleStage, Star };

std::string to_string(Stage stage);
Stage parse_stage(const std::string& name);

/// Frozen copy of a critic tagged with the training stage that produced it.
class PolicySnapshot {
 public:
  PolicySnapshot(Stage stage, CriticPolicy policy)
      : stage_(stage), policy_(std::make_shared<const CriticPolicy>(std::move(policy))) {}

  Stage stage() const { return stage_; }
  const CriticPolicy& policy() const { return *policy_; }

 private:
  Stage stage_;
  std::shared_ptr<const CriticPolicy> policy_;
};

}  // namespace crl
