#include "critique_rl/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "critique_rl/errors.hpp"

namespace crl {

double r_refine(const Episode& episode) { return episode.refined_correct ? 1.0 : 0.0; }

double r_delta(const Episode& episode) {
  return (episode.refined_correct ? 1.0 : 0.0) - (episode.original_correct ? 1.0 : 0.0);
}

double r_correction(const Episode& episode) {
  if (!episode.refined_correct) {
    return 0.0;
  }
  return episode.original_correct ? 0.2 : 1.0;
}

double r_dis(const Episode& episode) {
  const bool judged_correct = episode.critique.verdict == Verdict::Ok;
  return judged_correct == episode.original_correct ? 1.0 : 0.0;
}

double r_stage2(const Episode& episode, double beta1) {
  return r_refine(episode) + beta1 * r_dis(episode);
}

double r_dis_continuous(double judged_score, double oracle_score, double delta_range) {
  if (!(delta_range > 0.0)) {
    throw InputError("r_dis_continuous: delta_range must be positive");
  }
  return std::max(0.0, 1.0 - std::abs(judged_score - oracle_score) / delta_range);
}

std::string to_string(RewardVariant variant) {
  switch (variant) {
    case RewardVariant::Refine: return "refine";
    case RewardVariant::Delta: return "delta";
    case RewardVariant::Correction: return "correction";
    case RewardVariant::Dis: return "dis";
    case RewardVariant::Stage2Composite: return "stage2";
    case RewardVariant::ContinuousDis: return "continuous-dis";
  }
  return "?";
}

RewardVariant parse_reward_variant(const std::string& name) {
  for (auto v : {RewardVariant::Refine, RewardVariant::Delta, RewardVariant::Correction,
                 RewardVariant::Dis, RewardVariant::Stage2Composite,
                 RewardVariant::ContinuousDis}) {
    if (to_string(v) == name) {
      return v;
    }
  }
  throw ConfigError("unknown reward variant: " + name);
}

void RewardFn::validate() const {
  if (!(beta1 >= 0.0)) {
    throw ConfigError("RewardFn: beta1 must be nonnegative");
  }
  if (!(delta_range > 0.0)) {
    throw ConfigError("RewardFn: delta_range must be positive");
  }
  if (variant == RewardVariant::Stage2Composite &&
      stage2_base != RewardVariant::Refine && stage2_base != RewardVariant::Delta &&
      stage2_base != RewardVariant::Correction) {
    throw ConfigError("RewardFn: stage2 base must be refine, delta or correction");
  }
}

namespace {

double base_reward(RewardVariant variant, const Episode& episode) {
  switch (variant) {
    case RewardVariant::Delta: return r_delta(episode);
    case RewardVariant::Correction: return r_correction(episode);
    default: return r_refine(episode);
  }
}

}  // namespace

double RewardFn::operator()(const Episode& episode) const {
  switch (variant) {
    case RewardVariant::Refine: return r_refine(episode);
    case RewardVariant::Delta: return r_delta(episode);
    case RewardVariant::Correction: return r_correction(episode);
    case RewardVariant::Dis: return r_dis(episode);
    case RewardVariant::Stage2Composite:
      return base_reward(stage2_base, episode) + beta1 * r_dis(episode);
    case RewardVariant::ContinuousDis:
      return r_dis_continuous(episode.critique.verdict == Verdict::Ok ? 1.0 : 0.0,
                              episode.original_correct ? 1.0 : 0.0, delta_range);
  }
  return 0.0;
}

}  // namespace crl
