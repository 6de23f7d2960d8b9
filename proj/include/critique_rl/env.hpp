#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "critique_rl/policy.hpp"
#include "critique_rl/rng.hpp"

namespace crl {

/// How the fixed actor revises its answer after reading a critique.
///
///   verdict OK:                 keep w.p. p_keep_ok, else resample from the
///                               actor's original distribution
///   verdict FLAW, answer right: switch to a uniform wrong answer w.p. p_break
///   verdict FLAW, answer wrong: switch to the correct answer w.p. p_fix_good
///                               (hint matches) or p_fix_bad (hint does not)
struct RefineParams {
  double p_keep_ok = 0.95;
  double p_break = 0.5;
  double p_fix_good = 0.9;
  double p_fix_bad = 0.2;

  void validate() const;

  friend bool operator==(const RefineParams&, const RefineParams&) = default;
};

/// Synthetic task family: questions with one correct answer each, the fixed
/// actor's answer distribution per question, and one helpful hint per question.
/// Immutable once constructed.
class TaskSpec {
 public:
  TaskSpec(std::vector<std::size_t> correct_answer, std::size_t num_answers,
           std::vector<double> actor_original, std::size_t num_hints,
           std::vector<std::size_t> correct_hint, RefineParams refine, std::uint64_t seed);

  std::size_t num_questions() const { return correct_answer_.size(); }
  std::size_t num_answers() const { return num_answers_; }
  std::size_t num_hints() const { return num_hints_; }
  PolicyShape shape() const { return {num_questions(), num_answers_, num_hints_}; }

  std::size_t correct_answer(std::size_t question) const;
  std::size_t correct_hint(std::size_t question) const;
  std::span<const double> actor_original(std::size_t question) const;
  const RefineParams& refine_params() const { return refine_; }
  std::uint64_t seed() const { return seed_; }

  const std::vector<std::size_t>& correct_answers() const { return correct_answer_; }
  const std::vector<std::size_t>& correct_hints() const { return correct_hint_; }
  const std::vector<double>& actor_original_table() const { return actor_original_; }

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;

 private:
  std::vector<std::size_t> correct_answer_;
  std::size_t num_answers_;
  std::vector<double> actor_original_;  // row-major [question][answer]
  std::size_t num_hints_;
  std::vector<std::size_t> correct_hint_;
  RefineParams refine_;
  std::uint64_t seed_;
};

/// Parameters for generating a task. The defaults are the reference environment.
struct EnvParams {
  std::size_t num_questions = 4;
  std::size_t num_answers = 3;
  std::size_t num_hints = 3;
  /// Actor mass on the correct answer; the rest is spread evenly over wrong answers.
  double p_correct = 0.6;
  RefineParams refine;
  std::uint64_t seed = 20250101;
};

/// Draws correct answers and correct hints from `params.seed`.
TaskSpec generate_task(const EnvParams& params);

inline TaskSpec reference_task() { return generate_task(EnvParams{}); }

struct Episode {
  std::size_t question = 0;
  std::size_t original_answer = 0;
  bool original_correct = false;
  Critique critique;
  std::size_t refined_answer = 0;
  bool refined_correct = false;

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct AnswerDraw {
  std::size_t answer = 0;
  bool correct = false;
};

/// 1 iff `answer` is the question's correct answer.
int oracle_reward(const TaskSpec& spec, std::size_t question, std::size_t answer);

AnswerDraw sample_original(const TaskSpec& spec, std::size_t question, RngStream& rng);

AnswerDraw refine(const TaskSpec& spec, std::size_t question, std::size_t original_answer,
                  const Critique& critique, RngStream& rng);

/// Exact distribution over refined answers implied by the refinement table.
std::vector<double> refine_distribution(const TaskSpec& spec, std::size_t question,
                                        std::size_t original_answer, const Critique& critique);

/// P(refined answer is correct | question, original answer, critique).
double refined_correct_probability(const TaskSpec& spec, std::size_t question,
                                   std::size_t original_answer, const Critique& critique);

/// Throws ConfigError unless the critic's table covers exactly the spec's contexts.
void check_compatible(const TaskSpec& spec, const CriticPolicy& critic);

/// Original answer -> critique -> refinement for one question.
Episode rollout(const TaskSpec& spec, const CriticPolicy& critic, std::size_t question,
                RngStream& rng);

/// Rollout on a uniformly drawn question.
Episode rollout(const TaskSpec& spec, const CriticPolicy& critic, RngStream& rng);

/// `count` rollouts; episode i draws from RngStream::derive(seed, i).
std::vector<Episode> rollout_many(const TaskSpec& spec, const CriticPolicy& critic,
                                  std::size_t count, std::uint64_t seed);

/// Probability that a rollout visits each (question, answer) context:
/// uniform over questions times the actor's original distribution.
std::vector<double> context_weights(const TaskSpec& spec);

}  // namespace crl
