#include "critique_rl/commands.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "critique_rl/errors.hpp"
#include "critique_rl/pipeline.hpp"
#include "critique_rl/serialize.hpp"

namespace crl {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

namespace {

/// Files written by one command, with their content hashes.
class Manifest {
 public:
  explicit Manifest(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& contents) {
    write_file(dir_ / name, contents);
    files_.push_back({{"path", name}, {"sha256", sha256_hex(contents)}});
  }

  void finish(bool complete, const std::string& error = {}) {
    nlohmann::ordered_json doc;
    doc["format"] = "critique-rl/manifest";
    doc["complete"] = complete;
    doc["error"] = error;
    doc["files"] = files_;
    write_file(dir_ / "manifest.json", doc.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  nlohmann::ordered_json files_ = nlohmann::ordered_json::array();
};

std::string two_digits(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return buf;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

void print_metrics(std::ostream& out, const std::string& label, const MetricsReport& m) {
  out << label << ": Acc@Orig=" << fmt(m.acc_orig) << " Acc@Refine=" << fmt(m.acc_refine)
      << " Delta=" << fmt(m.delta) << " c->i=" << fmt(m.delta_c_to_i)
      << " i->c=" << fmt(m.delta_i_to_c) << " Acc@Dis=" << fmt(m.acc_dis) << '\n';
}

CriticPolicy resolve_teacher(const ExperimentConfig& config, const TaskSpec& spec) {
  if (config.sft.teacher_checkpoint) {
    auto teacher = load_checkpoint(*config.sft.teacher_checkpoint).policy();
    check_compatible(spec, teacher);
    return teacher;
  }
  return make_teacher(spec, config.sft.teacher);
}

std::string summary_header() { return "name,stage,best_step," + metrics_csv_header(); }

std::string summary_row(const std::string& name, const PolicySnapshot& snap, std::size_t best_step,
                        const TaskSpec& spec) {
  return name + "," + to_string(snap.stage()) + "," + std::to_string(best_step) + "," +
         metrics_csv_row(exact_metrics(spec, snap.policy()));
}

}  // namespace

TaskSpec cmd_gen_env(const EnvParams& params, const fs::path& path, std::ostream& out) {
  TaskSpec spec = generate_task(params);
  write_file(path, task_to_text(spec));
  const auto w = context_weights(spec);
  double acc = 0.0;
  for (std::size_t q = 0; q < spec.num_questions(); ++q) {
    acc += w[spec.shape().context(q, spec.correct_answer(q))];
  }
  out << "wrote " << path.string() << ": Q=" << spec.num_questions()
      << " m=" << spec.num_answers() << " h=" << spec.num_hints() << " Acc@Orig=" << fmt(acc)
      << '\n';
  return spec;
}

void cmd_train(const ExperimentConfig& config, std::ostream& out) {
  config.validate();
  const TaskSpec spec = resolve_task(config);
  Manifest manifest(config.output_dir);
  manifest.write("task.json", task_to_text(spec));

  const CriticPolicy teacher = resolve_teacher(config, spec);
  const PolicySnapshot sft =
      run_sft(spec, teacher, config.sft.n, config.sft.smoothing, config.sft_seed());
  manifest.write("00_sft.ckpt.json", checkpoint_to_text(sft));
  print_metrics(out, "sft", exact_metrics(spec, sft.policy()));

  std::string summary = summary_header() + "\n" + summary_row("sft", sft, 0, spec) + "\n";
  PolicySnapshot previous = sft;
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const StageEntry& entry = config.stages[i];
    const std::string prefix = two_digits(i + 1) + "_" + entry.name;
    const PolicySnapshot init = entry.init == "previous" ? previous
                                : entry.init == "sft"    ? sft
                                                         : load_checkpoint(entry.init);
    StageConfig cfg = entry.config;
    cfg.seed = config.stage_seed(i);
    std::optional<StageResult> result;
    try {
      switch (cfg.stage) {
        case StageKind::StageI: result = run_stage1(spec, init, cfg); break;
        case StageKind::StageII: result = run_stage2(spec, init, cfg); break;
        case StageKind::SingleStage:
          result = run_single_stage(spec, init, cfg.reward, cfg);
          break;
        case StageKind::Star: {
          DynamicsLog log;
          auto snap = run_star(spec, init, entry.star_rounds, entry.star_samples,
                               config.sft.smoothing, cfg.seed, &log);
          result = StageResult{snap, snap, log.records.back().step, std::move(log)};
          break;
        }
        case StageKind::SftOnly: throw ConfigError("sft is not a trainable stage");
      }
    } catch (const TrainingAborted& e) {
      manifest.write(prefix + ".aborted.ckpt.json", checkpoint_to_text(e.last_good()));
      manifest.write(prefix + ".dynamics.csv", dynamics_to_csv(e.log()));
      manifest.write("summary.csv", summary);
      manifest.finish(false, e.what());
      throw;
    }
    manifest.write(prefix + ".ckpt.json", checkpoint_to_text(result->final_snapshot));
    manifest.write(prefix + ".best.ckpt.json", checkpoint_to_text(result->best_snapshot));
    manifest.write(prefix + ".dynamics.csv", dynamics_to_csv(result->log));
    manifest.write(prefix + ".dynamics.json", dynamics_to_text(result->log));
    summary += summary_row(entry.name, result->final_snapshot, result->best_step, spec) + "\n";
    print_metrics(out, entry.name, result->log.records.back().metrics);
    if (cfg.stage == StageKind::StageI || cfg.stage == StageKind::StageII) {
      previous = result->final_snapshot;
    }
  }
  manifest.write("summary.csv", summary);
  manifest.finish(true);
  out << "outputs in " << config.output_dir.string() << '\n';
}

MetricsReport cmd_eval(const fs::path& checkpoint, const fs::path& env, bool exact,
                       std::size_t episodes, std::uint64_t seed, const fs::path& output,
                       std::ostream& out) {
  const TaskSpec spec = load_task(env);
  const PolicySnapshot snap = load_checkpoint(checkpoint);
  check_compatible(spec, snap.policy());
  MetricsReport report;
  if (exact) {
    report = exact_metrics(spec, snap.policy());
  } else {
    if (episodes == 0) {
      throw InputError("eval: episodes must be positive");
    }
    report = compute_metrics(rollout_many(spec, snap.policy(), episodes, seed));
  }
  const std::string text = metrics_to_text(report);
  out << text;
  if (!output.empty()) {
    write_file(output, text);
  }
  return report;
}

const char* const kScalingCsvHeader =
    "k,mv_at_k_critique,mv_at_k,mv_at_2k,mv_at_3k,pass_at_k_critique";

std::string scaling_to_csv(const std::vector<ScalingRow>& rows) {
  std::ostringstream csv;
  csv << kScalingCsvHeader << '\n';
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.k, r.mv_critique,
                  r.mv_plain, r.mv_plain_2k, r.mv_plain_3k, r.pass_critique);
    csv << buf;
  }
  return csv.str();
}

std::vector<ScalingRow> cmd_scaling(const fs::path& checkpoint, const fs::path& env,
                                    const std::vector<std::size_t>& ks, std::size_t trials,
                                    std::uint64_t seed, const fs::path& output, std::ostream& out) {
  if (ks.empty()) {
    throw InputError("scaling: --ks must name at least one K");
  }
  const TaskSpec spec = load_task(env);
  const PolicySnapshot snap = load_checkpoint(checkpoint);
  const auto rows = mv_curve(spec, snap.policy(), ks, trials, seed);
  const std::string csv = scaling_to_csv(rows);
  out << csv;
  if (!output.empty()) {
    write_file(output, csv);
  }
  return rows;
}

void cmd_iterate(const ExperimentConfig& config, std::size_t iterations, std::size_t refine_rounds,
                 std::ostream& out) {
  config.validate();
  const StageEntry* s1 = nullptr;
  const StageEntry* s2 = nullptr;
  for (const auto& e : config.stages) {
    if (e.config.stage == StageKind::StageI && s1 == nullptr) {
      s1 = &e;
    }
    if (e.config.stage == StageKind::StageII && s2 == nullptr) {
      s2 = &e;
    }
  }
  if (s1 == nullptr || s2 == nullptr) {
    throw ConfigError("iterate: config needs a stage1 and a stage2 entry");
  }
  if (refine_rounds == 0) {
    throw InputError("iterate: refine rounds must be at least 1");
  }
  const TaskSpec spec = resolve_task(config);
  Manifest manifest(config.output_dir);
  manifest.write("task.json", task_to_text(spec));
  const PolicySnapshot sft = run_sft(spec, resolve_teacher(config, spec), config.sft.n,
                                     config.sft.smoothing, config.sft_seed());

  StageConfig c1 = s1->config;
  StageConfig c2 = s2->config;
  c1.seed = config.stage_seed(0);
  c2.seed = config.stage_seed(1);
  std::vector<StageResult> results;
  std::vector<PolicySnapshot> snapshots;
  try {
    snapshots = iterative_train(spec, sft, iterations, c1, c2, &results);
  } catch (const TrainingAborted& e) {
    manifest.write("aborted.ckpt.json", checkpoint_to_text(e.last_good()));
    manifest.finish(false, e.what());
    throw;
  }

  std::string summary = summary_header() + "\n";
  manifest.write("00_sft.ckpt.json", checkpoint_to_text(snapshots.front()));
  summary += summary_row("sft", snapshots.front(), 0, spec) + "\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::string name = "iter" + std::to_string(i / 2 + 1) + (i % 2 == 0 ? "_stage1" : "_stage2");
    const std::string prefix = two_digits(i + 1) + "_" + name;
    manifest.write(prefix + ".ckpt.json", checkpoint_to_text(results[i].final_snapshot));
    manifest.write(prefix + ".dynamics.csv", dynamics_to_csv(results[i].log));
    summary += summary_row(name, results[i].final_snapshot, results[i].best_step, spec) + "\n";
    print_metrics(out, name, results[i].log.records.back().metrics);
  }
  manifest.write("iterations.csv", summary);

  const CriticPolicy& final_critic = snapshots.back().policy();
  const auto exact = exact_iterative_accuracy(spec, final_critic, refine_rounds);
  std::vector<std::size_t> correct(refine_rounds + 1, 0);
  const std::size_t trials = config.eval.episodes;
  for (std::size_t t = 0; t < trials; ++t) {
    auto rng = RngStream::derive(config.seed, t);
    const std::size_t q = rng.uniform_index(spec.num_questions());
    const auto eps = iterative_refine(spec, final_critic, q, refine_rounds, rng);
    correct[0] += eps.front().original_correct ? 1 : 0;
    for (std::size_t r = 0; r < eps.size(); ++r) {
      correct[r + 1] += eps[r].refined_correct ? 1 : 0;
    }
  }
  std::ostringstream rounds_csv;
  rounds_csv << "round,exact_accuracy,sampled_accuracy\n";
  char buf[128];
  for (std::size_t r = 0; r <= refine_rounds; ++r) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r, exact[r],
                  static_cast<double>(correct[r]) / static_cast<double>(trials));
    rounds_csv << buf;
  }
  manifest.write("refine_rounds.csv", rounds_csv.str());
  out << rounds_csv.str();
  manifest.finish(true);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) {
        throw std::invalid_argument(item);
      }
      ks.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw InputError("bad K value '" + item + "' in --ks");
    }
  }
  return ks;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage critic training lab on an enumerable critique/refine task"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string preset;
  std::uint64_t seed = 0;
  std::string output_dir;
  bool exact_flag = false;
  bool sampled_flag = false;
  app.add_option("--config", config_path, "Experiment config file (JSON)");
  app.add_option("--preset", preset, "Named preset: paper-main, paper-appendix, failure-modes");
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");
  app.add_option("--output-dir", output_dir, "Directory for outputs");
  auto* exact_opt = app.add_flag("--exact", exact_flag, "Exact gradients / exact evaluation");
  auto* sampled_opt = app.add_flag("--sampled", sampled_flag, "RLOO gradients / sampled evaluation");
  exact_opt->excludes(sampled_opt);

  auto* gen = app.add_subcommand("gen-env", "Generate a task file");
  EnvParams env;
  std::string env_out;
  gen->add_option("--questions", env.num_questions, "Number of questions")->capture_default_str();
  gen->add_option("--answers", env.num_answers, "Answers per question")->capture_default_str();
  gen->add_option("--hints", env.num_hints, "Hint vocabulary size")->capture_default_str();
  gen->add_option("--p-correct", env.p_correct, "Actor mass on the correct answer")->capture_default_str();
  gen->add_option("--p-keep-ok", env.refine.p_keep_ok)->capture_default_str();
  gen->add_option("--p-break", env.refine.p_break)->capture_default_str();
  gen->add_option("--p-fix-good", env.refine.p_fix_good)->capture_default_str();
  gen->add_option("--p-fix-bad", env.refine.p_fix_bad)->capture_default_str();
  gen->add_option("--out", env_out, "Output file (default <output-dir>/task.json)");

  auto* train = app.add_subcommand("train", "SFT then every configured stage");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ckpt, env_path, out_path;
  std::size_t episodes = 500000;
  eval->add_option("--checkpoint", ckpt)->required();
  eval->add_option("--env", env_path)->required();
  eval->add_option("--episodes", episodes, "Rollouts in sampled mode")->capture_default_str();
  eval->add_option("--out", out_path, "Also write the report here");

  auto* scaling = app.add_subcommand("scaling", "MV@K / Pass@K curves");
  std::string ks_text = "1,2,4,8";
  std::size_t trials = 10000;
  scaling->add_option("--checkpoint", ckpt)->required();
  scaling->add_option("--env", env_path)->required();
  scaling->add_option("--ks", ks_text, "Comma-separated budgets")->capture_default_str();
  scaling->add_option("--trials", trials, "Vote groups per K")->capture_default_str();
  scaling->add_option("--out", out_path, "CSV output file");

  auto* iterate = app.add_subcommand("iterate", "Iterative two-stage training and refinement");
  std::size_t iterations = 2;
  std::size_t refine_rounds = 3;
  iterate->add_option("--iterations", iterations)->capture_default_str();
  iterate->add_option("--refine-rounds", refine_rounds)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto experiment = [&]() {
    ExperimentConfig config = !config_path.empty() ? load_config(config_path)
                              : !preset.empty()    ? preset_config(preset)
                                                   : preset_config("paper-main");
    if (!config_path.empty() && !preset.empty()) {
      // explicit preset flag replaces the file's stages
      config.stages = preset_config(preset).stages;
    }
    if (seed_opt->count() > 0) {
      config.seed = seed;
    }
    if (!output_dir.empty()) {
      config.output_dir = output_dir;
    }
    if (exact_opt->count() > 0 || sampled_opt->count() > 0) {
      config.set_exact(exact_opt->count() > 0);
    }
    config.validate();
    return config;
  };

  try {
    if (gen->parsed()) {
      if (seed_opt->count() > 0) {
        env.seed = seed;
      }
      fs::path path = !env_out.empty()      ? fs::path(env_out)
                      : !output_dir.empty() ? fs::path(output_dir) / "task.json"
                                            : fs::path("task.json");
      cmd_gen_env(env, path, out);
    } else if (train->parsed()) {
      cmd_train(experiment(), out);
    } else if (eval->parsed()) {
      cmd_eval(ckpt, env_path, !sampled_flag, episodes, seed, out_path, out);
    } else if (scaling->parsed()) {
      cmd_scaling(ckpt, env_path, parse_ks(ks_text), trials, seed, out_path, out);
    } else if (iterate->parsed()) {
      cmd_iterate(experiment(), iterations, refine_rounds, out);
    }
  } catch (const NumericError& e) {
    err << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace crl
