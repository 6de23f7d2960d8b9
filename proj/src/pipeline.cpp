#include "critique_rl/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace crl {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Exact: return "exact";
    case EstimatorKind::Rloo: return "rloo";
    case EstimatorKind::Reinforce: return "reinforce";
  }
  return "?";
}

EstimatorKind parse_estimator_kind(const std::string& name) {
  for (auto k : {EstimatorKind::Exact, EstimatorKind::Rloo, EstimatorKind::Reinforce}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw ConfigError("unknown estimator: " + name);
}

std::string to_string(StageKind kind) {
  switch (kind) {
    case StageKind::SftOnly: return "sft";
    case StageKind::StageI: return "stage1";
    case StageKind::StageII: return "stage2";
    case StageKind::SingleStage: return "single";
    case StageKind::Star: return "star";
  }
  return "?";
}

StageKind parse_stage_kind(const std::string& name) {
  for (auto k : {StageKind::SftOnly, StageKind::StageI, StageKind::StageII,
                 StageKind::SingleStage, StageKind::Star}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw ConfigError("unknown stage: " + name);
}

void StageConfig::validate() const {
  if (steps == 0) {
    throw ConfigError("stage config: steps must be positive");
  }
  if (log_every == 0 || log_every > steps) {
    throw ConfigError("stage config: log_every must lie in [1, steps]");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("stage config: learning rate must be positive");
  }
  if (!(kl_coefficient >= 0.0) || !(beta1 >= 0.0)) {
    throw ConfigError("stage config: KL coefficient and beta1 must be nonnegative");
  }
  if (estimator.kind == EstimatorKind::Rloo && estimator.k < 2) {
    throw ConfigError("stage config: RLOO needs k >= 2");
  }
  if (estimator.kind != EstimatorKind::Exact && (estimator.k == 0 || estimator.batch == 0)) {
    throw ConfigError("stage config: sampled estimators need k >= 1 and batch >= 1");
  }
  if ((stage == StageKind::SingleStage || stage == StageKind::StageII) &&
      reward != RewardVariant::Refine && reward != RewardVariant::Delta &&
      reward != RewardVariant::Correction) {
    throw ConfigError("stage config: reward must be refine, delta or correction");
  }
}

const char* const kDynamicsCsvHeader =
    "step,acc_orig,acc_refine,delta,delta_c_to_i,delta_i_to_c,acc_dis,"
    "acc_dis_orig_correct,acc_dis_orig_incorrect,mean_reward,kl";

std::string dynamics_to_csv(const DynamicsLog& log) {
  std::ostringstream out;
  out << kDynamicsCsvHeader << '\n';
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out << ',' << buf;
  };
  for (const auto& r : log.records) {
    out << r.step;
    const auto& m = r.metrics;
    for (double x : {m.acc_orig, m.acc_refine, m.delta, m.delta_c_to_i, m.delta_i_to_c, m.acc_dis,
                     m.acc_dis_orig_correct, m.acc_dis_orig_incorrect, r.mean_reward, r.kl}) {
      num(x);
    }
    out << '\n';
  }
  return out.str();
}

PolicySnapshot run_sft(const TaskSpec& spec, const CriticPolicy& teacher, std::size_t n,
                       double smoothing, std::uint64_t seed) {
  if (n == 0) {
    throw InputError("run_sft: n must be positive");
  }
  const auto data = generate_sft_data(spec, teacher, n, seed);
  return PolicySnapshot(Stage::Sft, sft_fit(data, smoothing));
}

namespace {

enum class Headline { AccDis, AccRefine };

DynamicsRecord record_for(const TaskSpec& spec, const CriticPolicy& policy,
                          const Objective& objective, std::size_t step) {
  return {step, exact_metrics(spec, policy),
          exact_expected_reward(spec, policy, objective.reward),
          objective_kl(spec, policy, objective)};
}

double headline_value(const DynamicsRecord& r, Headline h) {
  return h == Headline::AccDis ? r.metrics.acc_dis : r.metrics.acc_refine;
}

StageResult train(const TaskSpec& spec, const PolicySnapshot& init, const Objective& objective,
                  const StageConfig& config, Stage label, Headline headline) {
  config.validate();
  check_compatible(spec, init.policy());

  CriticPolicy policy = init.policy();
  DynamicsLog log;
  log.records.push_back(record_for(spec, policy, objective, 0));
  CriticPolicy best = policy;
  std::size_t best_step = 0;
  double best_value = headline_value(log.records.back(), headline);

  for (std::size_t step = 1; step <= config.steps; ++step) {
    try {
      GradEstimate grad;
      if (config.estimator.kind == EstimatorKind::Exact) {
        grad = exact_gradient(spec, policy, objective);
      } else {
        auto rng = RngStream::derive(config.seed, step);
        const auto prompts = sample_prompts(spec, config.estimator.batch, rng);
        grad = config.estimator.kind == EstimatorKind::Rloo
                   ? rloo_gradient(spec, policy, objective, prompts, config.estimator.k, rng)
                   : reinforce_gradient(spec, policy, objective, prompts, config.estimator.k, rng);
      }
      policy = ascend(policy, grad, config.learning_rate);
    } catch (const NumericError& e) {
      throw TrainingAborted(std::string(e.what()) + " at step " + std::to_string(step),
                            PolicySnapshot(label, policy), log);
    }
    if (step % config.log_every == 0 || step == config.steps) {
      log.records.push_back(record_for(spec, policy, objective, step));
      const double value = headline_value(log.records.back(), headline);
      if (value > best_value) {
        best_value = value;
        best = policy;
        best_step = step;
      }
    }
  }
  return {PolicySnapshot(label, std::move(policy)), PolicySnapshot(label, std::move(best)),
          best_step, std::move(log)};
}

}  // namespace

StageResult run_stage1(const TaskSpec& spec, const PolicySnapshot& init, const StageConfig& config) {
  if (config.stage != StageKind::StageI) {
    throw ConfigError("run_stage1: config is not a Stage I config");
  }
  Objective objective{RewardFn{RewardVariant::Dis}, config.kl_coefficient, init,
                      config.kl_direction};
  return train(spec, init, objective, config, Stage::StageI, Headline::AccDis);
}

StageResult run_stage2(const TaskSpec& spec, const PolicySnapshot& init, const StageConfig& config) {
  if (config.stage != StageKind::StageII) {
    throw ConfigError("run_stage2: config is not a Stage II config");
  }
  if (init.stage() != Stage::StageI) {
    throw ConfigError("run_stage2: initialization must be a Stage I snapshot");
  }
  RewardFn reward{RewardVariant::Stage2Composite, config.beta1, config.reward};
  Objective objective{reward, config.kl_coefficient, init, config.kl_direction};
  return train(spec, init, objective, config, Stage::StageII, Headline::AccRefine);
}

StageResult run_single_stage(const TaskSpec& spec, const PolicySnapshot& init,
                             RewardVariant reward, const StageConfig& config) {
  if (reward != RewardVariant::Refine && reward != RewardVariant::Delta &&
      reward != RewardVariant::Correction) {
    throw ConfigError("run_single_stage: reward must be refine, delta or correction");
  }
  Objective objective{RewardFn{reward}, config.kl_coefficient, init, config.kl_direction};
  return train(spec, init, objective, config, Stage::SingleStage, Headline::AccRefine);
}

PolicySnapshot run_star(const TaskSpec& spec, const PolicySnapshot& init, std::size_t rounds,
                        std::size_t n_per_round, double smoothing, std::uint64_t seed,
                        DynamicsLog* log) {
  if (rounds == 0) {
    throw InputError("run_star: rounds must be at least 1");
  }
  if (n_per_round == 0) {
    throw InputError("run_star: n_per_round must be positive");
  }
  CriticPolicy current = init.policy();
  const Objective refine_only{RewardFn{RewardVariant::Refine}, 0.0, init};
  if (log != nullptr) {
    log->records.push_back(record_for(spec, current, refine_only, 0));
  }
  for (std::size_t round = 0; round < rounds; ++round) {
    const auto data = generate_sft_data(spec, current, n_per_round, mix64(seed) ^ round);
    if (data.samples.empty()) {
      log_warning("STaR round " + std::to_string(round + 1) + " kept no data; skipped");
      continue;
    }
    current = sft_fit(data, smoothing);
    if (log != nullptr) {
      log->records.push_back(record_for(spec, current, refine_only, round + 1));
    }
  }
  return PolicySnapshot(Stage::Star, std::move(current));
}

std::vector<Episode> iterative_refine(const TaskSpec& spec, const CriticPolicy& critic,
                                      std::size_t question, std::size_t rounds, RngStream& rng) {
  if (rounds == 0) {
    throw InputError("iterative_refine: rounds must be at least 1");
  }
  std::vector<Episode> episodes;
  episodes.push_back(rollout(spec, critic, question, rng));
  const auto shape = spec.shape();
  for (std::size_t i = 1; i < rounds; ++i) {
    const std::size_t current = episodes.back().refined_answer;
    const std::size_t action = sample_action(critic, shape.context(question, current), rng);
    const Critique critique = shape.critique_of(action);
    const auto refined = refine(spec, question, current, critique, rng);
    episodes.push_back({question, current, oracle_reward(spec, question, current) == 1, critique,
                        refined.answer, refined.correct});
  }
  return episodes;
}

std::vector<double> exact_iterative_accuracy(const TaskSpec& spec, const CriticPolicy& critic,
                                             std::size_t rounds) {
  check_compatible(spec, critic);
  const auto shape = spec.shape();
  const std::size_t m = spec.num_answers();
  std::vector<double> accuracy(rounds + 1, 0.0);
  const double per_question = 1.0 / static_cast<double>(spec.num_questions());
  for (std::size_t q = 0; q < spec.num_questions(); ++q) {
    const auto actor = spec.actor_original(q);
    std::vector<double> dist(actor.begin(), actor.end());
    const std::size_t correct = spec.correct_answer(q);
    accuracy[0] += per_question * dist[correct];
    for (std::size_t round = 1; round <= rounds; ++round) {
      std::vector<double> next(m, 0.0);
      for (std::size_t a = 0; a < m; ++a) {
        if (dist[a] == 0.0) {
          continue;
        }
        const auto p = action_distribution(critic, shape.context(q, a));
        for (std::size_t c = 0; c < shape.num_actions(); ++c) {
          const auto to = refine_distribution(spec, q, a, shape.critique_of(c));
          for (std::size_t b = 0; b < m; ++b) {
            next[b] += dist[a] * p[c] * to[b];
          }
        }
      }
      dist = std::move(next);
      accuracy[round] += per_question * dist[correct];
    }
  }
  return accuracy;
}

std::vector<PolicySnapshot> iterative_train(const TaskSpec& spec, const PolicySnapshot& init,
                                            std::size_t iterations,
                                            const StageConfig& stage1_config,
                                            const StageConfig& stage2_config,
                                            std::vector<StageResult>* results) {
  if (iterations == 0) {
    throw InputError("iterative_train: iterations must be at least 1");
  }
  std::vector<PolicySnapshot> snapshots{init};
  for (std::size_t it = 0; it < iterations; ++it) {
    StageConfig s1 = stage1_config;
    StageConfig s2 = stage2_config;
    if (it > 0) {
      s1.seed = mix64(stage1_config.seed) ^ it;
      s2.seed = mix64(stage2_config.seed) ^ it;
    }
    auto stage1 = run_stage1(spec, snapshots.back(), s1);
    snapshots.push_back(stage1.final_snapshot);
    auto stage2 = run_stage2(spec, stage1.final_snapshot, s2);
    snapshots.push_back(stage2.final_snapshot);
    if (results != nullptr) {
      results->push_back(std::move(stage1));
      results->push_back(std::move(stage2));
    }
  }
  return snapshots;
}

}  // namespace crl
