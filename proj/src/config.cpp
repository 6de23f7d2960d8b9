#include "critique_rl/config.hpp"

#include <json.hpp>

#include "critique_rl/errors.hpp"
#include "critique_rl/serialize.hpp"

namespace crl {

using nlohmann::json;

namespace {

StageEntry stage1_entry(double beta) {
  StageEntry e;
  e.name = "stage1";
  e.config.stage = StageKind::StageI;
  e.config.kl_coefficient = beta;
  e.config.reward = RewardVariant::Dis;
  e.init = "previous";
  return e;
}

StageEntry stage2_entry(double beta1, double beta2) {
  StageEntry e;
  e.name = "stage2";
  e.config.stage = StageKind::StageII;
  e.config.kl_coefficient = beta2;
  e.config.beta1 = beta1;
  e.config.reward = RewardVariant::Refine;
  e.init = "previous";
  return e;
}

StageEntry single_entry(RewardVariant reward, double beta) {
  StageEntry e;
  e.name = "single_" + to_string(reward);
  e.config.stage = StageKind::SingleStage;
  e.config.kl_coefficient = beta;
  e.config.reward = reward;
  e.init = "sft";
  return e;
}

StageEntry star_entry() {
  StageEntry e;
  e.name = "star";
  e.config.stage = StageKind::Star;
  e.init = "sft";
  return e;
}

std::string default_init(StageKind kind) {
  return kind == StageKind::SingleStage || kind == StageKind::Star ? "sft" : "previous";
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

StageEntry stage_from_json(const json& j, const std::filesystem::path& base) {
  if (!j.is_object() || !j.contains("stage")) {
    throw ConfigError("each stage needs a \"stage\" key");
  }
  StageEntry e;
  e.config.stage = parse_stage_kind(j.at("stage").get<std::string>());
  switch (e.config.stage) {
    case StageKind::StageI: e = stage1_entry(0.01); break;
    case StageKind::StageII: e = stage2_entry(0.2, 0.01); break;
    case StageKind::SingleStage: e = single_entry(RewardVariant::Refine, 0.01); break;
    case StageKind::Star: e = star_entry(); break;
    case StageKind::SftOnly: throw ConfigError("the SFT step is configured under \"sft\"");
  }
  auto& c = e.config;
  std::string text;
  if (j.contains("reward")) {
    read_if(j, "reward", text);
    c.reward = parse_reward_variant(text);
    if (c.stage == StageKind::SingleStage) {
      e.name = "single_" + text;
    }
  }
  read_if(j, "name", e.name);
  read_if(j, "steps", c.steps);
  if (j.contains("estimator")) {
    read_if(j, "estimator", text);
    c.estimator.kind = parse_estimator_kind(text);
    if (c.estimator.kind != EstimatorKind::Exact) {
      c.learning_rate = kDefaultSampledLearningRate;
    }
  }
  read_if(j, "k", c.estimator.k);
  read_if(j, "batch", c.estimator.batch);
  if (j.contains("learning_rate")) {
    read_if(j, "learning_rate", c.learning_rate);
    e.learning_rate_set = true;
  }
  read_if(j, "kl_coefficient", c.kl_coefficient);
  read_if(j, "beta1", c.beta1);
  if (j.contains("kl_direction")) {
    read_if(j, "kl_direction", text);
    c.kl_direction = parse_kl_direction(text);
  }
  read_if(j, "log_every", c.log_every);
  read_if(j, "rounds", e.star_rounds);
  read_if(j, "samples", e.star_samples);
  e.init = default_init(c.stage);
  if (j.contains("init")) {
    read_if(j, "init", text);
    e.init = text == "previous" || text == "sft" ? text : resolve(base, text).string();
  }
  return e;
}

}  // namespace

std::vector<std::string> preset_names() { return {"paper-main", "paper-appendix", "failure-modes"}; }

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  c.seed = 2025;
  if (name == "paper-main") {
    c.stages = {stage1_entry(0.01), stage2_entry(0.2, 0.01)};
  } else if (name == "paper-appendix") {
    c.stages = {stage1_entry(0.01), stage2_entry(0.9, 0.95)};
  } else if (name == "failure-modes") {
    c.stages = {stage1_entry(0.01), stage2_entry(0.2, 0.01),
                single_entry(RewardVariant::Refine, 0.01),
                single_entry(RewardVariant::Delta, 0.01),
                single_entry(RewardVariant::Correction, 0.01), star_entry()};
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  c.output_dir = "runs/" + name;
  return c;
}

ExperimentConfig config_from_text(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  ExperimentConfig c = preset_config(j.value("preset", std::string("paper-main")));
  read_if(j, "seed", c.seed);
  if (j.contains("output_dir")) {
    c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
  }
  if (j.contains("env")) {
    const json& env = j.at("env");
    if (env.contains("path")) {
      c.env_path = resolve(base_dir, env.at("path").get<std::string>());
    }
    read_if(env, "num_questions", c.env.num_questions);
    read_if(env, "num_answers", c.env.num_answers);
    read_if(env, "num_hints", c.env.num_hints);
    read_if(env, "p_correct", c.env.p_correct);
    read_if(env, "p_keep_ok", c.env.refine.p_keep_ok);
    read_if(env, "p_break", c.env.refine.p_break);
    read_if(env, "p_fix_good", c.env.refine.p_fix_good);
    read_if(env, "p_fix_bad", c.env.refine.p_fix_bad);
    read_if(env, "seed", c.env.seed);
  }
  if (j.contains("sft")) {
    const json& sft = j.at("sft");
    if (sft.contains("teacher")) {
      const json& t = sft.at("teacher");
      read_if(t, "p_flaw_given_correct", c.sft.teacher.p_flaw_given_correct);
      read_if(t, "p_flaw_given_incorrect", c.sft.teacher.p_flaw_given_incorrect);
      read_if(t, "p_correct_hint", c.sft.teacher.p_correct_hint);
    }
    if (sft.contains("teacher_checkpoint")) {
      c.sft.teacher_checkpoint = resolve(base_dir, sft.at("teacher_checkpoint").get<std::string>());
    }
    read_if(sft, "n", c.sft.n);
    read_if(sft, "smoothing", c.sft.smoothing);
  }
  if (j.contains("stages")) {
    if (!j.at("stages").is_array()) {
      throw ConfigError("\"stages\" must be an array");
    }
    c.stages.clear();
    for (const json& s : j.at("stages")) {
      c.stages.push_back(stage_from_json(s, base_dir));
    }
  }
  if (j.contains("eval")) {
    read_if(j.at("eval"), "episodes", c.eval.episodes);
    read_if(j.at("eval"), "exact", c.eval.exact);
  }
  if (j.contains("scaling")) {
    read_if(j.at("scaling"), "ks", c.scaling.ks);
    read_if(j.at("scaling"), "trials", c.scaling.trials);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_text(read_file(path), path.parent_path());
}

void ExperimentConfig::validate() const {
  if (env_path && !std::filesystem::exists(*env_path)) {
    throw ConfigError("env path does not exist: " + env_path->string());
  }
  if (sft.teacher_checkpoint && !std::filesystem::exists(*sft.teacher_checkpoint)) {
    throw ConfigError("teacher checkpoint does not exist: " + sft.teacher_checkpoint->string());
  }
  if (sft.n == 0 || !(sft.smoothing > 0.0)) {
    throw ConfigError("sft: n and smoothing must be positive");
  }
  if (eval.episodes == 0) {
    throw ConfigError("eval: episodes must be positive");
  }
  if (scaling.ks.empty() || scaling.trials == 0) {
    throw ConfigError("scaling: need at least one K and one trial");
  }
  // track what "previous" resolves to, to check Stage II ordering
  StageKind previous = StageKind::SftOnly;
  for (const auto& e : stages) {
    if (e.config.stage == StageKind::Star) {
      if (e.star_rounds == 0 || e.star_samples == 0) {
        throw ConfigError("stage " + e.name + ": STaR needs rounds and samples >= 1");
      }
    } else {
      e.config.validate();
    }
    const bool from_file = e.init != "previous" && e.init != "sft";
    if (from_file && !std::filesystem::exists(e.init)) {
      throw ConfigError("stage " + e.name + ": init checkpoint does not exist: " + e.init);
    }
    if (e.config.stage == StageKind::StageII && !from_file) {
      const StageKind source = e.init == "sft" ? StageKind::SftOnly : previous;
      if (source != StageKind::StageI) {
        throw ConfigError("stage " + e.name +
                          ": Stage II must follow a Stage I stage or name a checkpoint");
      }
    }
    if (e.config.stage == StageKind::StageI || e.config.stage == StageKind::StageII) {
      previous = e.config.stage;
    }
  }
}

void ExperimentConfig::set_exact(bool exact) {
  for (auto& e : stages) {
    if (e.config.stage == StageKind::Star) {
      continue;
    }
    e.config.estimator.kind = exact ? EstimatorKind::Exact : EstimatorKind::Rloo;
    if (!e.learning_rate_set) {
      e.config.learning_rate = exact ? kDefaultExactLearningRate : kDefaultSampledLearningRate;
    }
  }
  eval.exact = exact;
}

std::uint64_t ExperimentConfig::sft_seed() const { return mix64(seed); }

std::uint64_t ExperimentConfig::stage_seed(std::size_t index) const {
  return mix64(mix64(seed) ^ (index + 1));
}

TaskSpec resolve_task(const ExperimentConfig& config) {
  return config.env_path ? load_task(*config.env_path) : generate_task(config.env);
}

}  // namespace crl
