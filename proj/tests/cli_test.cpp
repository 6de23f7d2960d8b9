#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "critique_rl/commands.hpp"
#include "critique_rl/config.hpp"
#include "critique_rl/errors.hpp"
#include "critique_rl/metrics.hpp"
#include "critique_rl/optim.hpp"
#include "critique_rl/serialize.hpp"

namespace crl {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "critique_rl_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "critique-rl");
  std::vector<const char*> argv;
  for (const auto& a : args) {
    argv.push_back(a.c_str());
  }
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

int shell(const std::string& args) {
  const std::string cmd = std::string(CRL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

// ---------------------------------------------------------------------------
// Persistence

TEST(Serialize, TaskRoundTrip) {
  const auto spec = reference_task();
  EXPECT_EQ(task_from_text(task_to_text(spec)), spec);
  EXPECT_THROW(task_from_text("{\"format\": \"something-else\"}"), ConfigError);
  EXPECT_THROW(task_from_text("not json"), ConfigError);
}

TEST(Serialize, CheckpointRoundTripIsBitExact) {
  const auto spec = reference_task();
  auto rng = RngStream::derive(3, 3);
  std::vector<double> logits(spec.shape().num_contexts() * spec.shape().num_actions());
  for (auto& x : logits) {
    x = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.uniform_index(80)) - 40);
  }
  logits[0] = 0.1;
  logits[1] = -1e-300;
  logits[2] = 1.0 / 3;
  const PolicySnapshot snap(Stage::StageII, CriticPolicy(spec.shape(), logits));
  const auto text = checkpoint_to_text(snap);
  const auto back = checkpoint_from_text(text);
  EXPECT_EQ(back.stage(), Stage::StageII);
  EXPECT_EQ(back.policy().shape(), spec.shape());
  EXPECT_EQ(back.policy().logits(), logits);
  EXPECT_EQ(checkpoint_to_text(back), text);
}

TEST(Serialize, MetricsRecordIsFlat) {
  const auto spec = reference_task();
  const auto m = exact_metrics(spec, make_teacher(spec, TeacherSpec{}));
  const auto j = nlohmann::json::parse(metrics_to_text(m));
  for (const auto& [key, value] : j.items()) {
    EXPECT_FALSE(value.is_object() || value.is_array()) << key;
  }
  EXPECT_EQ(j.at("acc_dis").get<double>(), m.acc_dis);
  EXPECT_EQ(j.at("exact").get<bool>(), true);
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, PresetsCarryTheirCoefficients) {
  const auto main = preset_config("paper-main");
  ASSERT_EQ(main.stages.size(), 2u);
  EXPECT_EQ(main.stages[0].config.kl_coefficient, 0.01);
  EXPECT_EQ(main.stages[1].config.beta1, 0.2);
  const auto app = preset_config("paper-appendix");
  EXPECT_EQ(app.stages[0].config.kl_coefficient, 0.01);
  EXPECT_EQ(app.stages[1].config.beta1, 0.9);
  EXPECT_EQ(app.stages[1].config.kl_coefficient, 0.95);
  EXPECT_EQ(app.stages[1].config.steps, 500u);
  EXPECT_THROW(preset_config("nope"), ConfigError);
}

TEST(Config, FileOverridesPreset) {
  const auto c = config_from_text(R"({"preset": "paper-appendix", "seed": 9,
      "stages": [{"stage": "stage1", "steps": 30, "log_every": 5},
                 {"stage": "stage2", "steps": 20, "beta1": 0.5, "kl_coefficient": 0.1}]})");
  EXPECT_EQ(c.seed, 9u);
  ASSERT_EQ(c.stages.size(), 2u);
  EXPECT_EQ(c.stages[0].config.steps, 30u);
  EXPECT_EQ(c.stages[1].config.beta1, 0.5);
}

TEST(Config, RejectsBadDocuments) {
  EXPECT_THROW(config_from_text("{"), ConfigError);
  EXPECT_THROW(config_from_text(R"({"stages": [{"stage": "stage2"}]})"), ConfigError);
  EXPECT_THROW(config_from_text(R"({"stages": [{"stage": "stage1", "steps": 0}]})"), ConfigError);
  EXPECT_THROW(config_from_text(R"({"stages": [{"stage": "single", "reward": "dis"}]})"),
               ConfigError);
  EXPECT_THROW(config_from_text(R"({"env": {"path": "/does/not/exist.json"}})"), ConfigError);
}

// ---------------------------------------------------------------------------
// gen-env

TEST(GenEnv, DefaultsAreTheReferenceEnvironment) {
  const auto dir = scratch("genenv");
  const auto r = cli({"gen-env", "--out", (dir / "a.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(load_task(dir / "a.json"), reference_task());
  EXPECT_NE(r.out.find("Acc@Orig=0.6000"), std::string::npos);
  EXPECT_EQ(cli({"gen-env", "--out", (dir / "b.json").string()}).code, kExitOk);
  EXPECT_EQ(read_file(dir / "a.json"), read_file(dir / "b.json"));
}

TEST(GenEnv, RejectsEmptyTask) {
  const auto dir = scratch("genenv_bad");
  EXPECT_EQ(cli({"gen-env", "--questions", "0", "--out", (dir / "x.json").string()}).code,
            kExitUsage);
  EXPECT_EQ(cli({"gen-env", "--p-break", "2", "--out", (dir / "x.json").string()}).code,
            kExitUsage);
  EXPECT_FALSE(fs::exists(dir / "x.json"));
}

// ---------------------------------------------------------------------------
// train / eval / scaling

class TrainedRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(scratch("train_main"));
    const auto r = cli({"--preset", "paper-main", "--output-dir", dir_->string(), "train"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  static void TearDownTestSuite() { delete dir_; }
  static fs::path* dir_;
};

fs::path* TrainedRun::dir_ = nullptr;

TEST_F(TrainedRun, WritesEveryStageAndACompleteManifest) {
  for (const char* f : {"task.json", "00_sft.ckpt.json", "01_stage1.ckpt.json",
                        "01_stage1.best.ckpt.json", "01_stage1.dynamics.csv",
                        "02_stage2.ckpt.json", "02_stage2.dynamics.csv", "summary.csv"}) {
    EXPECT_TRUE(fs::exists(*dir_ / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(read_file(*dir_ / "manifest.json"));
  EXPECT_TRUE(manifest.at("complete").get<bool>());
  for (const auto& f : manifest.at("files")) {
    EXPECT_EQ(sha256_hex(read_file(*dir_ / f.at("path").get<std::string>())),
              f.at("sha256").get<std::string>());
  }
}

TEST_F(TrainedRun, RerunIsByteIdentical) {
  const auto again = scratch("train_main_again");
  ASSERT_EQ(cli({"--preset", "paper-main", "--output-dir", again.string(), "train"}).code,
            kExitOk);
  for (const auto& entry : fs::directory_iterator(*dir_)) {
    const auto name = entry.path().filename();
    EXPECT_EQ(read_file(entry.path()), read_file(again / name)) << name;
  }
}

TEST_F(TrainedRun, StageTwoBeatsSftOnRefinement) {
  const auto task = (*dir_ / "task.json").string();
  const auto sft = cmd_eval(*dir_ / "00_sft.ckpt.json", task, true, 0, 0, {}, std::cout);
  const auto s2 = cmd_eval(*dir_ / "02_stage2.ckpt.json", task, true, 0, 0, {}, std::cout);
  EXPECT_GT(s2.acc_refine, sft.acc_refine);
}

TEST_F(TrainedRun, ExactAndSampledEvalAgree) {
  const auto ckpt = (*dir_ / "01_stage1.ckpt.json").string();
  const auto task = (*dir_ / "task.json").string();
  const auto out = *dir_ / "eval" / "sampled.json";
  const auto r = cli({"--sampled", "--seed", "5", "eval", "--checkpoint", ckpt, "--env", task,
                      "--episodes", "500000", "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto s = nlohmann::json::parse(read_file(out));
  const auto e = nlohmann::json::parse(cli({"eval", "--checkpoint", ckpt, "--env", task}).out);
  EXPECT_EQ(s.at("n").get<std::size_t>(), 500000u);
  EXPECT_FALSE(s.at("exact").get<bool>());
  for (const char* key : {"acc_orig", "acc_refine", "delta", "delta_c_to_i", "delta_i_to_c",
                          "acc_dis"}) {
    EXPECT_NEAR(s.at(key).get<double>(), e.at(key).get<double>(), 0.005) << key;
  }
}

TEST_F(TrainedRun, EvalErrorsExitNonzero) {
  const auto task = (*dir_ / "task.json").string();
  EXPECT_EQ(shell("eval --checkpoint /nonexistent.json --env " + task), kExitUsage);
  const auto other = scratch("other_env") / "task.json";
  ASSERT_EQ(cli({"gen-env", "--hints", "4", "--out", other.string()}).code, kExitOk);
  const auto r = cli({"eval", "--checkpoint", (*dir_ / "00_sft.ckpt.json").string(), "--env",
                      other.string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("shape"), std::string::npos);
}

TEST_F(TrainedRun, ScalingCsv) {
  const auto ckpt = (*dir_ / "02_stage2.ckpt.json").string();
  const auto task = (*dir_ / "task.json").string();
  const auto csv_path = *dir_ / "scaling.csv";
  const std::size_t trials = 10000;
  const auto r = cli({"--seed", "3", "scaling", "--checkpoint", ckpt, "--env", task, "--ks",
                      "1,2,4,8", "--trials", std::to_string(trials), "--out", csv_path.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream csv(read_file(csv_path));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "k,mv_at_k_critique,mv_at_k,mv_at_2k,mv_at_3k,pass_at_k_critique");
  std::vector<std::vector<double>> rows;
  while (std::getline(csv, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      row.push_back(std::stod(cell));
    }
    ASSERT_EQ(row.size(), 6u);
    rows.push_back(row);
  }
  ASSERT_EQ(rows.size(), 4u);
  const auto exact = exact_metrics(load_task(task), load_checkpoint(ckpt).policy());
  auto sigma = [&](double p) { return std::sqrt(p * (1 - p) / trials); };
  EXPECT_LE(std::abs(rows[0][1] - exact.acc_refine), 3 * sigma(exact.acc_refine));
  EXPECT_LE(std::abs(rows[0][2] - exact.acc_orig), 3 * sigma(exact.acc_orig));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GE(rows[i][5], rows[i - 1][5]);
  }
  EXPECT_EQ(cli({"scaling", "--checkpoint", ckpt, "--env", task, "--ks", "0"}).code, kExitUsage);
}

TEST(Train, AppendixPresetCompletes) {
  const auto dir = scratch("train_appendix");
  const auto r = cli({"--preset", "paper-appendix", "--output-dir", dir.string(), "train"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(nlohmann::json::parse(read_file(dir / "manifest.json")).at("complete").get<bool>());
}

TEST(Train, FailureModesPresetCompletes) {
  const auto dir = scratch("train_failure");
  const auto r = cli({"--preset", "failure-modes", "--output-dir", dir.string(), "train"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"03_single_refine.dynamics.csv", "04_single_delta.dynamics.csv",
                        "05_single_correction.dynamics.csv", "06_star.ckpt.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
}

TEST(Train, SampledModeIsSeedDeterministic) {
  const auto a = scratch("sampled_a");
  const auto b = scratch("sampled_b");
  const auto cfg = scratch("sampled_cfg") / "config.json";
  write_file(cfg, R"({"preset": "paper-main", "sft": {"n": 5000},
      "stages": [{"stage": "stage1", "steps": 40}, {"stage": "stage2", "steps": 40}]})");
  for (const auto& d : {a, b}) {
    ASSERT_EQ(cli({"--config", cfg.string(), "--sampled", "--seed", "11", "--output-dir",
                   d.string(), "train"})
                  .code,
              kExitOk);
  }
  EXPECT_EQ(read_file(a / "02_stage2.dynamics.csv"), read_file(b / "02_stage2.dynamics.csv"));
  EXPECT_EQ(read_file(a / "manifest.json"), read_file(b / "manifest.json"));
}

TEST(Train, NumericAbortKeepsPartialOutputs) {
  const auto dir = scratch("abort");
  const auto cfg = dir / "config.json";
  write_file(cfg, R"({"stages": [{"stage": "stage1", "steps": 10, "log_every": 1,
      "learning_rate": 1e300, "kl_coefficient": 1e300}]})");
  const auto out = dir / "out";
  EXPECT_EQ(shell("--config " + cfg.string() + " --output-dir " + out.string() + " train"),
            kExitNumeric);
  const auto manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
  EXPECT_FALSE(manifest.at("complete").get<bool>());
  EXPECT_TRUE(fs::exists(out / "01_stage1.aborted.ckpt.json"));
  EXPECT_TRUE(fs::exists(out / "00_sft.ckpt.json"));
}

TEST(Train, ConfigErrorsExitOne) {
  const auto dir = scratch("bad_config");
  write_file(dir / "c.json", "{\"stages\": 3}");
  EXPECT_EQ(shell("--config " + (dir / "c.json").string() + " train"), kExitUsage);
  EXPECT_EQ(shell("--config " + (dir / "missing.json").string() + " train"), kExitUsage);
  EXPECT_EQ(shell("--exact --sampled train"), kExitUsage);
  EXPECT_EQ(shell("frobnicate"), kExitUsage);
  EXPECT_EQ(shell("--help"), kExitOk);
}

TEST(Iterate, WritesRoundsAndIterations) {
  const auto dir = scratch("iterate");
  const auto cfg = dir / "config.json";
  write_file(cfg, R"({"eval": {"episodes": 20000},
      "stages": [{"stage": "stage1", "steps": 100}, {"stage": "stage2", "steps": 100}]})");
  const auto out = dir / "out";
  const auto r = cli({"--config", cfg.string(), "--output-dir", out.string(), "iterate",
                      "--iterations", "2", "--refine-rounds", "3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(out / "04_iter2_stage2.ckpt.json"));
  std::istringstream csv(read_file(out / "refine_rounds.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "round,exact_accuracy,sampled_accuracy");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const double exact = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    const double sampled = std::stod(line.substr(c2 + 1));
    EXPECT_NEAR(sampled, exact, 0.02);
  }
  EXPECT_EQ(rows, 4u);
}

}  // namespace
}  // namespace crl
