#include "critique_rl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "critique_rl/errors.hpp"

namespace crl {

std::string to_string(KlDirection direction) {
  return direction == KlDirection::ReferenceFirst ? "reference-first" : "policy-first";
}

KlDirection parse_kl_direction(const std::string& name) {
  if (name == "reference-first") {
    return KlDirection::ReferenceFirst;
  }
  if (name == "policy-first") {
    return KlDirection::PolicyFirst;
  }
  throw ConfigError("unknown KL direction: " + name);
}

double GradEstimate::l2_norm() const {
  return std::sqrt(std::inner_product(gradient.begin(), gradient.end(), gradient.begin(), 0.0));
}

namespace {

void check_objective(const TaskSpec& spec, const CriticPolicy& policy, const Objective& objective) {
  check_compatible(spec, policy);
  if (!(objective.reference.policy().shape() == policy.shape())) {
    throw ConfigError("objective reference has a different shape from the policy");
  }
  if (!(objective.kl_coefficient >= 0.0)) {
    throw ConfigError("objective: KL coefficient must be nonnegative");
  }
  objective.reward.validate();
}

bool is_correct_context(const TaskSpec& spec, std::size_t context) {
  const auto shape = spec.shape();
  return spec.correct_answer(shape.question_of(context)) == shape.answer_of(context);
}

}  // namespace

// ---------------------------------------------------------------------------

CriticPolicy make_teacher(const TaskSpec& spec, const TeacherSpec& teacher) {
  for (double p : {teacher.p_flaw_given_correct, teacher.p_flaw_given_incorrect,
                   teacher.p_correct_hint}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("TeacherSpec: probabilities must lie in [0, 1]");
    }
  }
  const auto shape = spec.shape();
  const std::size_t h = shape.num_hints;
  std::vector<double> probs(shape.num_contexts() * shape.num_actions());
  for (std::size_t s = 0; s < shape.num_contexts(); ++s) {
    const std::size_t q = shape.question_of(s);
    const double p_flaw =
        is_correct_context(spec, s) ? teacher.p_flaw_given_correct : teacher.p_flaw_given_incorrect;
    for (std::size_t hint = 0; hint < h; ++hint) {
      double p_hint = 1.0;
      if (h > 1) {
        p_hint = hint == spec.correct_hint(q) ? teacher.p_correct_hint
                                              : (1.0 - teacher.p_correct_hint) / double(h - 1);
      }
      probs[s * shape.num_actions() + shape.action({Verdict::Flaw, hint})] = p_flaw * p_hint;
      probs[s * shape.num_actions() + shape.action({Verdict::Ok, hint})] = (1.0 - p_flaw) * p_hint;
    }
  }
  return policy_from_distributions(shape, probs);
}

CriticPolicy perfect_critic(const TaskSpec& spec, double gap) {
  const auto shape = spec.shape();
  std::vector<std::size_t> actions(shape.num_contexts());
  for (std::size_t s = 0; s < shape.num_contexts(); ++s) {
    const std::size_t q = shape.question_of(s);
    actions[s] = is_correct_context(spec, s) ? shape.action({Verdict::Ok, 0})
                                             : shape.action({Verdict::Flaw, spec.correct_hint(q)});
  }
  return near_deterministic_policy(shape, actions, gap);
}

SftDataset generate_sft_data(const TaskSpec& spec, const CriticPolicy& teacher, std::size_t n,
                             std::uint64_t seed) {
  check_compatible(spec, teacher);
  if (n == 0) {
    throw InputError("generate_sft_data: n must be positive");
  }
  const auto shape = spec.shape();
  SftDataset data{shape, {}, n};
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = RngStream::derive(seed, i);
    const Episode ep = rollout(spec, teacher, rng);
    if (ep.refined_correct) {
      data.samples.push_back({shape.context(ep.question, ep.original_answer),
                              shape.action(ep.critique), ep.refined_correct});
    }
  }
  if (data.samples.empty()) {
    log_warning("SFT filtering removed every teacher critique; dataset is empty");
  }
  return data;
}

CriticPolicy sft_fit(const SftDataset& dataset, double smoothing) {
  if (!(smoothing > 0.0)) {
    throw InputError("sft_fit: smoothing must be positive");
  }
  const auto& shape = dataset.shape;
  if (dataset.samples.empty()) {
    log_warning("sft_fit: empty dataset, returning the uniform critic");
    return CriticPolicy(shape);
  }
  std::vector<double> counts(shape.num_contexts() * shape.num_actions(), 0.0);
  for (const auto& sample : dataset.samples) {
    if (sample.context >= shape.num_contexts() || sample.action >= shape.num_actions()) {
      throw InputError("sft_fit: sample index out of range");
    }
    counts[sample.context * shape.num_actions() + sample.action] += 1.0;
  }
  for (double& c : counts) {
    c = std::log(c + smoothing);
  }
  return CriticPolicy(shape, std::move(counts));
}

// ---------------------------------------------------------------------------

std::vector<double> expected_reward_table(const TaskSpec& spec, const RewardFn& reward) {
  reward.validate();
  const auto shape = spec.shape();
  std::vector<double> table(shape.num_contexts() * shape.num_actions());
  for (std::size_t s = 0; s < shape.num_contexts(); ++s) {
    const std::size_t q = shape.question_of(s);
    const std::size_t answer = shape.answer_of(s);
    const std::size_t correct = spec.correct_answer(q);
    const std::size_t some_wrong = correct == 0 ? 1 : 0;
    for (std::size_t c = 0; c < shape.num_actions(); ++c) {
      const Critique critique = shape.critique_of(c);
      const double p_right = refined_correct_probability(spec, q, answer, critique);
      const Episode right{q, answer, answer == correct, critique, correct, true};
      const Episode wrong{q, answer, answer == correct, critique, some_wrong, false};
      table[s * shape.num_actions() + c] = p_right * reward(right) + (1.0 - p_right) * reward(wrong);
    }
  }
  return table;
}

double exact_expected_reward(const TaskSpec& spec, const CriticPolicy& policy,
                             const RewardFn& reward) {
  check_compatible(spec, policy);
  const auto table = expected_reward_table(spec, reward);
  const auto w = context_weights(spec);
  const std::size_t na = policy.num_actions();
  double total = 0.0;
  for (std::size_t s = 0; s < policy.num_contexts(); ++s) {
    const auto p = action_distribution(policy, s);
    double row = 0.0;
    for (std::size_t c = 0; c < na; ++c) {
      row += p[c] * table[s * na + c];
    }
    total += w[s] * row;
  }
  return total;
}

double objective_kl(const TaskSpec& spec, const CriticPolicy& policy, const Objective& objective) {
  const auto w = context_weights(spec);
  const auto& ref = objective.reference.policy();
  return objective.kl_direction == KlDirection::ReferenceFirst ? kl_divergence(ref, policy, w)
                                                               : kl_divergence(policy, ref, w);
}

double exact_objective(const TaskSpec& spec, const CriticPolicy& policy,
                       const Objective& objective) {
  check_objective(spec, policy, objective);
  const double reward = exact_expected_reward(spec, policy, objective.reward);
  if (objective.kl_coefficient == 0.0) {
    return reward;
  }
  return reward - objective.kl_coefficient * objective_kl(spec, policy, objective);
}

std::vector<double> kl_penalty_gradient(const TaskSpec& spec, const CriticPolicy& policy,
                                        const Objective& objective) {
  check_objective(spec, policy, objective);
  const std::size_t na = policy.num_actions();
  std::vector<double> grad(policy.logits().size(), 0.0);
  const double beta = objective.kl_coefficient;
  if (beta == 0.0) {
    return grad;
  }
  const auto w = context_weights(spec);
  const auto& ref = objective.reference.policy();
  for (std::size_t s = 0; s < policy.num_contexts(); ++s) {
    if (w[s] == 0.0) {
      continue;
    }
    const auto p = action_distribution(policy, s);
    const auto r = action_distribution(ref, s);
    double* g = grad.data() + s * na;
    if (objective.kl_direction == KlDirection::ReferenceFirst) {
      // d/dz_c KL(r || p) = p_c - r_c
      for (std::size_t c = 0; c < na; ++c) {
        g[c] = beta * w[s] * (p[c] - r[c]);
      }
    } else {
      // d/dz_c KL(p || r) = p_c (ln(p_c / r_c) - KL)
      std::vector<double> log_ratio(na);
      double kl = 0.0;
      for (std::size_t c = 0; c < na; ++c) {
        log_ratio[c] = std::log(p[c]) - std::log(r[c]);
        kl += p[c] * log_ratio[c];
      }
      for (std::size_t c = 0; c < na; ++c) {
        g[c] = beta * w[s] * p[c] * (log_ratio[c] - kl);
      }
    }
  }
  return grad;
}

GradEstimate exact_gradient(const TaskSpec& spec, const CriticPolicy& policy,
                            const Objective& objective) {
  check_objective(spec, policy, objective);
  const auto table = expected_reward_table(spec, objective.reward);
  const auto w = context_weights(spec);
  const std::size_t na = policy.num_actions();
  GradEstimate out{policy.shape(), std::vector<double>(policy.logits().size(), 0.0), 0, 0.0, 0.0};
  for (std::size_t s = 0; s < policy.num_contexts(); ++s) {
    const auto p = action_distribution(policy, s);
    const double* r = table.data() + s * na;
    double mean = 0.0;
    for (std::size_t c = 0; c < na; ++c) {
      mean += p[c] * r[c];
    }
    out.mean_reward += w[s] * mean;
    if (w[s] == 0.0) {
      continue;
    }
    for (std::size_t c = 0; c < na; ++c) {
      out.gradient[s * na + c] = w[s] * p[c] * (r[c] - mean);
    }
  }
  const auto penalty = kl_penalty_gradient(spec, policy, objective);
  for (std::size_t i = 0; i < out.gradient.size(); ++i) {
    out.gradient[i] -= penalty[i];
  }
  out.mean_kl = objective_kl(spec, policy, objective);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Prompt> sample_prompts(const TaskSpec& spec, std::size_t count, RngStream& rng) {
  std::vector<Prompt> prompts;
  prompts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t q = rng.uniform_index(spec.num_questions());
    prompts.push_back({q, sample_original(spec, q, rng).answer});
  }
  return prompts;
}

std::vector<double> rloo_advantages(std::span<const double> rewards) {
  const std::size_t k = rewards.size();
  if (k < 2) {
    throw InputError("rloo_advantages: need at least two samples");
  }
  // Summing pairwise differences keeps tied rewards at exactly zero advantage.
  std::vector<double> adv(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      adv[i] += rewards[i] - rewards[j];
    }
    adv[i] /= static_cast<double>(k - 1);
  }
  return adv;
}

namespace {

enum class Baseline { LeaveOneOut, None };

GradEstimate sampled_gradient(const TaskSpec& spec, const CriticPolicy& policy,
                              const Objective& objective, std::span<const Prompt> prompts,
                              std::size_t k, RngStream& rng, Baseline baseline) {
  check_objective(spec, policy, objective);
  if (prompts.empty()) {
    throw InputError("policy gradient: empty prompt batch");
  }
  const auto shape = policy.shape();
  const std::size_t na = shape.num_actions();
  GradEstimate out{shape, std::vector<double>(policy.logits().size(), 0.0), 0, 0.0, 0.0};
  std::vector<std::size_t> actions(k);
  std::vector<double> rewards(k);
  std::vector<double> adv(k);
  double reward_sum = 0.0;

  for (const Prompt& prompt : prompts) {
    const std::size_t s = shape.context(prompt.question, prompt.original_answer);
    const bool original_correct =
        spec.correct_answer(prompt.question) == prompt.original_answer;
    const auto p = action_distribution(policy, s);
    for (std::size_t i = 0; i < k; ++i) {
      actions[i] = rng.categorical(p);
      const Critique critique = shape.critique_of(actions[i]);
      const auto refined = refine(spec, prompt.question, prompt.original_answer, critique, rng);
      const Episode ep{prompt.question, prompt.original_answer, original_correct,
                       critique,        refined.answer,         refined.correct};
      rewards[i] = objective.reward(ep);
      reward_sum += rewards[i];
    }
    if (baseline == Baseline::LeaveOneOut) {
      adv = rloo_advantages(rewards);
    } else {
      adv = rewards;
    }
    double* g = out.gradient.data() + s * na;
    for (std::size_t i = 0; i < k; ++i) {
      if (adv[i] == 0.0) {
        continue;
      }
      // grad_z log softmax(z)[a] = e_a - p
      for (std::size_t c = 0; c < na; ++c) {
        g[c] -= adv[i] * p[c];
      }
      g[actions[i]] += adv[i];
    }
  }

  const double n = static_cast<double>(prompts.size() * k);
  for (double& x : out.gradient) {
    x /= n;
  }
  const auto penalty = kl_penalty_gradient(spec, policy, objective);
  for (std::size_t i = 0; i < out.gradient.size(); ++i) {
    out.gradient[i] -= penalty[i];
  }
  out.sample_count = prompts.size() * k;
  out.mean_reward = reward_sum / n;
  out.mean_kl = objective_kl(spec, policy, objective);
  return out;
}

}  // namespace

GradEstimate rloo_gradient(const TaskSpec& spec, const CriticPolicy& policy,
                           const Objective& objective, std::span<const Prompt> prompts,
                           std::size_t k, RngStream& rng) {
  if (k < 2) {
    throw InputError("rloo_gradient: k must be at least 2");
  }
  return sampled_gradient(spec, policy, objective, prompts, k, rng, Baseline::LeaveOneOut);
}

GradEstimate reinforce_gradient(const TaskSpec& spec, const CriticPolicy& policy,
                                const Objective& objective, std::span<const Prompt> prompts,
                                std::size_t k, RngStream& rng) {
  if (k < 1) {
    throw InputError("reinforce_gradient: k must be at least 1");
  }
  return sampled_gradient(spec, policy, objective, prompts, k, rng, Baseline::None);
}

CriticPolicy ascend(const CriticPolicy& policy, const GradEstimate& grad, double learning_rate) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InputError("ascend: learning rate must be positive and finite");
  }
  if (!(grad.shape == policy.shape()) || grad.gradient.size() != policy.logits().size()) {
    throw ConfigError("ascend: gradient shape does not match the policy");
  }
  if (!std::all_of(grad.gradient.begin(), grad.gradient.end(),
                   [](double g) { return std::isfinite(g); })) {
    throw NumericError("ascend: non-finite gradient entry, update refused");
  }
  std::vector<double> logits = policy.logits();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logits[i] += learning_rate * grad.gradient[i];
  }
  return CriticPolicy(policy.shape(), std::move(logits));
}

}  // namespace crl
