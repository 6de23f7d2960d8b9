#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "critique_rl/env.hpp"
#include "critique_rl/policy.hpp"

namespace crl {

struct MetricsCounts {
  std::size_t n = 0;
  std::size_t n_orig_correct = 0;
  std::size_t n_c_to_i = 0;
  std::size_t n_i_to_c = 0;
  std::size_t n_verdict_match = 0;
  std::size_t n_refined_correct = 0;
};

/// Evaluation metrics of a critic on the actor's response -> critique ->
/// refinement loop.
///
/// Conditional rates (delta_c_to_i, delta_i_to_c and the two split Acc@Dis
/// values) are 0 when their denominator is empty; the matching degenerate
/// flag is then set and the delta identity does not apply.
struct MetricsReport {
  double acc_orig = 0.0;
  double acc_refine = 0.0;
  double delta = 0.0;
  double delta_c_to_i = 0.0;
  double delta_i_to_c = 0.0;
  double acc_dis = 0.0;
  /// Acc@Dis restricted to originally correct / originally incorrect answers.
  double acc_dis_orig_correct = 0.0;
  double acc_dis_orig_incorrect = 0.0;
  MetricsCounts counts;
  bool no_orig_correct = false;
  bool no_orig_incorrect = false;
  /// Expected values by enumeration rather than tallies over episodes.
  bool exact = false;
};

MetricsReport compute_metrics(std::span<const Episode> episodes);

/// Expected value of every metric under the actor, the critic and the
/// refinement table. Counts are left at zero.
MetricsReport exact_metrics(const TaskSpec& spec, const CriticPolicy& critic);

struct AnswerSample {
  std::size_t answer = 0;
  bool correct = false;
};

/// 1 iff the most frequent answer is `correct_answer`; ties go to the tied
/// answer that appears first.
bool majority_vote(std::span<const AnswerSample> samples, std::size_t correct_answer);

/// 1 iff any sample is correct.
bool pass_at_k(std::span<const AnswerSample> samples);

struct ScalingRow {
  std::size_t k = 0;
  std::size_t trials = 0;
  double mv_critique = 0.0;  // MV@K over K response -> critique -> refinement runs
  double mv_plain = 0.0;     // MV@K over K parallel original responses
  double mv_plain_2k = 0.0;
  double mv_plain_3k = 0.0;
  double pass_critique = 0.0;  // Pass@K over the K refinements
};

/// Monte-Carlo MV@K curves. Trial t for budget K draws from
/// RngStream::derive(seed, K, t).
std::vector<ScalingRow> mv_curve(const TaskSpec& spec, const CriticPolicy& critic,
                                 std::span<const std::size_t> ks, std::size_t trials,
                                 std::uint64_t seed);

}  // namespace crl
