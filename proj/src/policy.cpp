#include "critique_rl/policy.hpp"

#include <algorithm>
#include <cmath>

#include "critique_rl/errors.hpp"

namespace crl {

std::size_t PolicyShape::context(std::size_t question, std::size_t answer) const {
  if (question >= num_questions || answer >= num_answers) {
    throw InputError("context: question/answer index out of range");
  }
  return question * num_answers + answer;
}

std::size_t PolicyShape::action(const Critique& critique) const {
  if (critique.hint >= num_hints) {
    throw InputError("action: hint index out of range");
  }
  return static_cast<std::size_t>(critique.verdict) * num_hints + critique.hint;
}

Critique PolicyShape::critique_of(std::size_t action) const {
  if (action >= num_actions()) {
    throw InputError("critique_of: action index out of range");
  }
  return Critique{action >= num_hints ? Verdict::Ok : Verdict::Flaw, action % num_hints};
}

CriticPolicy::CriticPolicy(PolicyShape shape)
    : CriticPolicy(shape, std::vector<double>(shape.num_contexts() * shape.num_actions(), 0.0)) {}

CriticPolicy::CriticPolicy(PolicyShape shape, std::vector<double> logits)
    : shape_(shape), logits_(std::move(logits)) {
  if (shape_.num_contexts() == 0 || shape_.num_hints == 0) {
    throw ConfigError("CriticPolicy: empty shape");
  }
  if (logits_.size() != shape_.num_contexts() * shape_.num_actions()) {
    throw ConfigError("CriticPolicy: logits size does not match shape");
  }
  if (!std::all_of(logits_.begin(), logits_.end(), [](double x) { return std::isfinite(x); })) {
    throw NumericError("CriticPolicy: non-finite logit");
  }
}

std::span<const double> CriticPolicy::row(std::size_t context) const {
  if (context >= num_contexts()) {
    throw InputError("CriticPolicy::row: context out of range");
  }
  return {logits_.data() + context * num_actions(), num_actions()};
}

std::span<double> CriticPolicy::row(std::size_t context) {
  if (context >= num_contexts()) {
    throw InputError("CriticPolicy::row: context out of range");
  }
  return {logits_.data() + context * num_actions(), num_actions()};
}

std::vector<double> action_distribution(const CriticPolicy& policy, std::size_t context) {
  auto row = policy.row(context);
  const double top = *std::max_element(row.begin(), row.end());
  std::vector<double> p(row.size());
  double total = 0.0;
  for (std::size_t a = 0; a < row.size(); ++a) {
    p[a] = std::exp(row[a] - top);
    total += p[a];
  }
  for (double& x : p) {
    x /= total;
  }
  return p;
}

double log_prob(const CriticPolicy& policy, std::size_t context, std::size_t action) {
  auto row = policy.row(context);
  if (action >= row.size()) {
    throw InputError("log_prob: action out of range");
  }
  const double top = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (double z : row) {
    total += std::exp(z - top);
  }
  return row[action] - top - std::log(total);
}

std::size_t sample_action(const CriticPolicy& policy, std::size_t context, RngStream& rng) {
  const auto p = action_distribution(policy, context);
  return rng.categorical(p);
}

double categorical_kl(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] > 0.0) {
      kl += p[a] * std::log(p[a] / q[a]);
    }
  }
  return std::max(kl, 0.0);
}

double kl_divergence(const CriticPolicy& p, const CriticPolicy& q,
                     std::span<const double> context_weights) {
  if (!(p.shape() == q.shape())) {
    throw ConfigError("kl_divergence: policy shapes differ");
  }
  if (context_weights.size() != p.num_contexts()) {
    throw ConfigError("kl_divergence: context weight count does not match policy");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < p.num_contexts(); ++s) {
    if (context_weights[s] == 0.0) {
      continue;
    }
    total += context_weights[s] *
             categorical_kl(action_distribution(p, s), action_distribution(q, s));
  }
  return total;
}

CriticPolicy near_deterministic_policy(PolicyShape shape, std::span<const std::size_t> actions,
                                       double gap) {
  if (actions.size() != shape.num_contexts()) {
    throw ConfigError("near_deterministic_policy: one action per context required");
  }
  CriticPolicy policy(shape);
  for (std::size_t s = 0; s < shape.num_contexts(); ++s) {
    auto row = policy.row(s);
    std::fill(row.begin(), row.end(), -gap);
    row[actions[s]] = 0.0;
  }
  return policy;
}

CriticPolicy policy_from_distributions(PolicyShape shape, std::span<const double> probabilities) {
  if (probabilities.size() != shape.num_contexts() * shape.num_actions()) {
    throw ConfigError("policy_from_distributions: size does not match shape");
  }
  std::vector<double> logits(probabilities.size());
  std::transform(probabilities.begin(), probabilities.end(), logits.begin(), [](double p) {
    if (p < 0.0) {
      throw InputError("policy_from_distributions: negative probability");
    }
    return std::log(std::max(p, 1e-22));
  });
  return CriticPolicy(shape, std::move(logits));
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::Sft: return "SFT";
    case Stage::StageI: return "StageI";
    case Stage::StageII: return "StageII";
    case Stage::SingleStage: return "SingleStage";
    case Stage::Star: return "STaR";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : {Stage::Sft, Stage::StageI, Stage::StageII, Stage::SingleStage, Stage::Star}) {
    if (to_string(s) == name) {
      return s;
    }
  }
  throw ConfigError("unknown stage label: " + name);
}

}  // namespace crl
