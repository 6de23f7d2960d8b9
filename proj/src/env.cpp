#include "critique_rl/env.hpp"

#include <cmath>
#include <string>

#include "critique_rl/errors.hpp"

namespace crl {

namespace {

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

void RefineParams::validate() const {
  if (!is_probability(p_keep_ok) || !is_probability(p_break) || !is_probability(p_fix_good) ||
      !is_probability(p_fix_bad)) {
    throw ConfigError("RefineParams: every probability must lie in [0, 1]");
  }
  if (p_fix_good < p_fix_bad) {
    throw ConfigError("RefineParams: p_fix_good must be >= p_fix_bad");
  }
}

TaskSpec::TaskSpec(std::vector<std::size_t> correct_answer, std::size_t num_answers,
                   std::vector<double> actor_original, std::size_t num_hints,
                   std::vector<std::size_t> correct_hint, RefineParams refine, std::uint64_t seed)
    : correct_answer_(std::move(correct_answer)),
      num_answers_(num_answers),
      actor_original_(std::move(actor_original)),
      num_hints_(num_hints),
      correct_hint_(std::move(correct_hint)),
      refine_(refine),
      seed_(seed) {
  const std::size_t q = correct_answer_.size();
  if (q == 0) {
    throw ConfigError("TaskSpec: need at least one question");
  }
  if (num_answers_ < 2) {
    throw ConfigError("TaskSpec: need at least two answers");
  }
  if (num_hints_ < 1) {
    throw ConfigError("TaskSpec: need at least one hint");
  }
  if (correct_hint_.size() != q || actor_original_.size() != q * num_answers_) {
    throw ConfigError("TaskSpec: per-question tables disagree on the number of questions");
  }
  for (std::size_t i = 0; i < q; ++i) {
    if (correct_answer_[i] >= num_answers_) {
      throw ConfigError("TaskSpec: correct answer out of range for question " + std::to_string(i));
    }
    if (correct_hint_[i] >= num_hints_) {
      throw ConfigError("TaskSpec: correct hint out of range for question " + std::to_string(i));
    }
    double total = 0.0;
    for (std::size_t a = 0; a < num_answers_; ++a) {
      const double p = actor_original_[i * num_answers_ + a];
      if (!std::isfinite(p) || p < 0.0) {
        throw ConfigError("TaskSpec: actor distribution has a negative entry");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw ConfigError("TaskSpec: actor distribution for question " + std::to_string(i) +
                        " does not sum to 1");
    }
  }
  refine_.validate();
}

std::size_t TaskSpec::correct_answer(std::size_t question) const {
  if (question >= num_questions()) {
    throw InputError("question index out of range");
  }
  return correct_answer_[question];
}

std::size_t TaskSpec::correct_hint(std::size_t question) const {
  if (question >= num_questions()) {
    throw InputError("question index out of range");
  }
  return correct_hint_[question];
}

std::span<const double> TaskSpec::actor_original(std::size_t question) const {
  if (question >= num_questions()) {
    throw InputError("question index out of range");
  }
  return {actor_original_.data() + question * num_answers_, num_answers_};
}

TaskSpec generate_task(const EnvParams& params) {
  if (params.num_questions == 0 || params.num_answers < 2 || params.num_hints == 0) {
    throw ConfigError("generate_task: need Q >= 1, m >= 2, h >= 1");
  }
  if (!is_probability(params.p_correct)) {
    throw ConfigError("generate_task: p_correct must lie in [0, 1]");
  }
  params.refine.validate();

  RngStream rng(mix64(params.seed));
  const std::size_t q = params.num_questions;
  const std::size_t m = params.num_answers;
  std::vector<std::size_t> correct(q);
  std::vector<std::size_t> hints(q);
  std::vector<double> actor(q * m);
  const double wrong_mass = (1.0 - params.p_correct) / static_cast<double>(m - 1);
  for (std::size_t i = 0; i < q; ++i) {
    correct[i] = rng.uniform_index(m);
    hints[i] = rng.uniform_index(params.num_hints);
    for (std::size_t a = 0; a < m; ++a) {
      actor[i * m + a] = a == correct[i] ? params.p_correct : wrong_mass;
    }
  }
  return TaskSpec(std::move(correct), m, std::move(actor), params.num_hints, std::move(hints),
                  params.refine, params.seed);
}

int oracle_reward(const TaskSpec& spec, std::size_t question, std::size_t answer) {
  if (answer >= spec.num_answers()) {
    throw InputError("oracle_reward: answer index out of range");
  }
  return spec.correct_answer(question) == answer ? 1 : 0;
}

AnswerDraw sample_original(const TaskSpec& spec, std::size_t question, RngStream& rng) {
  const std::size_t answer = rng.categorical(spec.actor_original(question));
  return {answer, oracle_reward(spec, question, answer) == 1};
}

namespace {

void check_refine_inputs(const TaskSpec& spec, std::size_t question, std::size_t original,
                         const Critique& critique) {
  if (question >= spec.num_questions() || original >= spec.num_answers() ||
      critique.hint >= spec.num_hints()) {
    throw InputError("refine: index out of range");
  }
}

double fix_probability(const TaskSpec& spec, std::size_t question, const Critique& critique) {
  const auto& rp = spec.refine_params();
  return critique.hint == spec.correct_hint(question) ? rp.p_fix_good : rp.p_fix_bad;
}

std::size_t uniform_wrong_answer(const TaskSpec& spec, std::size_t question, RngStream& rng) {
  const std::size_t correct = spec.correct_answer(question);
  const std::size_t k = rng.uniform_index(spec.num_answers() - 1);
  return k < correct ? k : k + 1;
}

}  // namespace

AnswerDraw refine(const TaskSpec& spec, std::size_t question, std::size_t original_answer,
                  const Critique& critique, RngStream& rng) {
  check_refine_inputs(spec, question, original_answer, critique);
  const auto& rp = spec.refine_params();
  const std::size_t correct = spec.correct_answer(question);
  std::size_t answer = original_answer;
  if (critique.verdict == Verdict::Ok) {
    if (!rng.bernoulli(rp.p_keep_ok)) {
      answer = rng.categorical(spec.actor_original(question));
    }
  } else if (original_answer == correct) {
    if (rng.bernoulli(rp.p_break)) {
      answer = uniform_wrong_answer(spec, question, rng);
    }
  } else if (rng.bernoulli(fix_probability(spec, question, critique))) {
    answer = correct;
  }
  return {answer, answer == correct};
}

std::vector<double> refine_distribution(const TaskSpec& spec, std::size_t question,
                                        std::size_t original_answer, const Critique& critique) {
  check_refine_inputs(spec, question, original_answer, critique);
  const auto& rp = spec.refine_params();
  const std::size_t m = spec.num_answers();
  const std::size_t correct = spec.correct_answer(question);
  std::vector<double> dist(m, 0.0);
  if (critique.verdict == Verdict::Ok) {
    const auto actor = spec.actor_original(question);
    for (std::size_t a = 0; a < m; ++a) {
      dist[a] = (1.0 - rp.p_keep_ok) * actor[a];
    }
    dist[original_answer] += rp.p_keep_ok;
  } else if (original_answer == correct) {
    const double each = rp.p_break / static_cast<double>(m - 1);
    for (std::size_t a = 0; a < m; ++a) {
      dist[a] = a == correct ? 1.0 - rp.p_break : each;
    }
  } else {
    const double fix = fix_probability(spec, question, critique);
    dist[correct] = fix;
    dist[original_answer] = 1.0 - fix;
  }
  return dist;
}

double refined_correct_probability(const TaskSpec& spec, std::size_t question,
                                   std::size_t original_answer, const Critique& critique) {
  return refine_distribution(spec, question, original_answer,
                             critique)[spec.correct_answer(question)];
}

void check_compatible(const TaskSpec& spec, const CriticPolicy& critic) {
  if (!(critic.shape() == spec.shape())) {
    throw ConfigError("critic shape does not match the task's (question, answer, hint) shape");
  }
}

Episode rollout(const TaskSpec& spec, const CriticPolicy& critic, std::size_t question,
                RngStream& rng) {
  check_compatible(spec, critic);
  const auto original = sample_original(spec, question, rng);
  const auto shape = spec.shape();
  const std::size_t action = sample_action(critic, shape.context(question, original.answer), rng);
  const Critique critique = shape.critique_of(action);
  const auto refined = refine(spec, question, original.answer, critique, rng);
  return {question, original.answer, original.correct, critique, refined.answer, refined.correct};
}

Episode rollout(const TaskSpec& spec, const CriticPolicy& critic, RngStream& rng) {
  const std::size_t question = rng.uniform_index(spec.num_questions());
  return rollout(spec, critic, question, rng);
}

std::vector<Episode> rollout_many(const TaskSpec& spec, const CriticPolicy& critic,
                                  std::size_t count, std::uint64_t seed) {
  check_compatible(spec, critic);
  std::vector<Episode> episodes;
  episodes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = RngStream::derive(seed, i);
    episodes.push_back(rollout(spec, critic, rng));
  }
  return episodes;
}

std::vector<double> context_weights(const TaskSpec& spec) {
  const auto shape = spec.shape();
  std::vector<double> w(shape.num_contexts());
  const double per_question = 1.0 / static_cast<double>(spec.num_questions());
  for (std::size_t q = 0; q < spec.num_questions(); ++q) {
    const auto actor = spec.actor_original(q);
    for (std::size_t a = 0; a < spec.num_answers(); ++a) {
      w[shape.context(q, a)] = per_question * actor[a];
    }
  }
  return w;
}

}  // namespace crl
