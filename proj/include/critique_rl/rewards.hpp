#pragma once

#include <string>

#include "critique_rl/env.hpp"

namespace crl {

// Reward functions for the critic. All are pure functions of an Episode.

/// Correctness of the refinement.
double r_refine(const Episode& episode);

/// Change in correctness from the original answer to the refinement.
double r_delta(const Episode& episode);

/// 1.0 for a fixed answer, 0.2 for a preserved correct answer, 0.0 otherwise.
double r_correction(const Episode& episode);

/// 1 iff the critique's verdict matches the original answer's correctness.
double r_dis(const Episode& episode);

/// r_refine + beta1 * r_dis.
double r_stage2(const Episode& episode, double beta1);

/// max(0, 1 - |judged - oracle| / delta_range), for graded (non-binary) oracles.
double r_dis_continuous(double judged_score, double oracle_score, double delta_range);

enum class RewardVariant { Refine, Delta, Correction, Dis, Stage2Composite, ContinuousDis };

/// Canonical names: refine, delta, correction, dis, stage2, continuous-dis.
std::string to_string(RewardVariant variant);
RewardVariant parse_reward_variant(const std::string& name);

struct RewardFn {
  RewardVariant variant = RewardVariant::Refine;
  /// Weight of r_dis inside Stage2Composite.
  double beta1 = 0.0;
  /// Refinement term inside Stage2Composite: Refine normally, Delta or
  /// Correction for the reward-swap ablations.
  RewardVariant stage2_base = RewardVariant::Refine;
  /// Tolerance of ContinuousDis. On binary episodes the judged score is the
  /// verdict (OK = 1) and the oracle score is the original correctness bit.
  double delta_range = 1.0;

  void validate() const;
  double operator()(const Episode& episode) const;
};

}  // namespace crl
