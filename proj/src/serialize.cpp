#include "critique_rl/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "critique_rl/errors.hpp"

namespace crl {

using nlohmann::json;

namespace {

constexpr const char* kTaskFormat = "critique-rl/task";
constexpr const char* kCheckpointFormat = "critique-rl/checkpoint";
constexpr int kFormatVersion = 1;

void expect_format(const json& doc, const char* format) {
  if (!doc.is_object() || doc.value("format", std::string{}) != format) {
    throw ConfigError(std::string("document is not a ") + format + " file");
  }
  if (doc.value("version", 0) != kFormatVersion) {
    throw ConfigError(std::string("unsupported ") + format + " version");
  }
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed document: ") + e.what());
  }
}

template <typename T>
T field(const json& doc, const char* key) {
  if (!doc.contains(key)) {
    throw ConfigError(std::string("missing field '") + key + "'");
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string task_to_text(const TaskSpec& spec) {
  json actor = json::array();
  for (std::size_t q = 0; q < spec.num_questions(); ++q) {
    const auto row = spec.actor_original(q);
    actor.push_back(std::vector<double>(row.begin(), row.end()));
  }
  const auto& rp = spec.refine_params();
  json doc = {
      {"format", kTaskFormat},
      {"version", kFormatVersion},
      {"num_questions", spec.num_questions()},
      {"num_answers", spec.num_answers()},
      {"num_hints", spec.num_hints()},
      {"correct_answer", spec.correct_answers()},
      {"correct_hint", spec.correct_hints()},
      {"actor_original", actor},
      {"refine_params",
       {{"p_keep_ok", rp.p_keep_ok},
        {"p_break", rp.p_break},
        {"p_fix_good", rp.p_fix_good},
        {"p_fix_bad", rp.p_fix_bad}}},
      {"seed", spec.seed()},
  };
  return doc.dump(2) + "\n";
}

TaskSpec task_from_text(const std::string& text) {
  const json doc = parse(text);
  expect_format(doc, kTaskFormat);
  const auto q = field<std::size_t>(doc, "num_questions");
  const auto m = field<std::size_t>(doc, "num_answers");
  const auto rows = field<std::vector<std::vector<double>>>(doc, "actor_original");
  if (rows.size() != q) {
    throw ConfigError("actor_original must have one row per question");
  }
  std::vector<double> actor;
  for (const auto& row : rows) {
    if (row.size() != m) {
      throw ConfigError("actor_original rows must have num_answers entries");
    }
    actor.insert(actor.end(), row.begin(), row.end());
  }
  auto correct = field<std::vector<std::size_t>>(doc, "correct_answer");
  if (correct.size() != q) {
    throw ConfigError("correct_answer must have num_questions entries");
  }
  const json& rpj = doc.at("refine_params");
  RefineParams rp{field<double>(rpj, "p_keep_ok"), field<double>(rpj, "p_break"),
                  field<double>(rpj, "p_fix_good"), field<double>(rpj, "p_fix_bad")};
  return TaskSpec(std::move(correct), m, std::move(actor), field<std::size_t>(doc, "num_hints"),
                  field<std::vector<std::size_t>>(doc, "correct_hint"), rp,
                  field<std::uint64_t>(doc, "seed"));
}

std::string checkpoint_to_text(const PolicySnapshot& snapshot) {
  const auto& policy = snapshot.policy();
  const auto& shape = policy.shape();
  json rows = json::array();
  for (std::size_t s = 0; s < policy.num_contexts(); ++s) {
    const auto row = policy.row(s);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  json doc = {
      {"format", kCheckpointFormat},
      {"version", kFormatVersion},
      {"stage", to_string(snapshot.stage())},
      {"num_questions", shape.num_questions},
      {"num_answers", shape.num_answers},
      {"num_hints", shape.num_hints},
      {"num_contexts", shape.num_contexts()},
      {"num_actions", shape.num_actions()},
      {"context_layout", "question * num_answers + answer"},
      {"action_layout", "verdict * num_hints + hint, verdict FLAW=0 OK=1"},
      {"logits", rows},
  };
  return doc.dump(2) + "\n";
}

PolicySnapshot checkpoint_from_text(const std::string& text) {
  const json doc = parse(text);
  expect_format(doc, kCheckpointFormat);
  PolicyShape shape{field<std::size_t>(doc, "num_questions"), field<std::size_t>(doc, "num_answers"),
                    field<std::size_t>(doc, "num_hints")};
  if (field<std::size_t>(doc, "num_contexts") != shape.num_contexts() ||
      field<std::size_t>(doc, "num_actions") != shape.num_actions()) {
    throw ConfigError("checkpoint shape metadata is inconsistent");
  }
  const auto rows = field<std::vector<std::vector<double>>>(doc, "logits");
  if (rows.size() != shape.num_contexts()) {
    throw ConfigError("checkpoint must have one logit row per context");
  }
  std::vector<double> logits;
  logits.reserve(shape.num_contexts() * shape.num_actions());
  for (const auto& row : rows) {
    if (row.size() != shape.num_actions()) {
      throw ConfigError("checkpoint logit rows must have num_actions entries");
    }
    logits.insert(logits.end(), row.begin(), row.end());
  }
  return PolicySnapshot(parse_stage(field<std::string>(doc, "stage")),
                        CriticPolicy(shape, std::move(logits)));
}

namespace {

json metrics_json(const MetricsReport& r) {
  return {
      {"acc_orig", r.acc_orig},
      {"acc_refine", r.acc_refine},
      {"delta", r.delta},
      {"delta_c_to_i", r.delta_c_to_i},
      {"delta_i_to_c", r.delta_i_to_c},
      {"acc_dis", r.acc_dis},
      {"acc_dis_orig_correct", r.acc_dis_orig_correct},
      {"acc_dis_orig_incorrect", r.acc_dis_orig_incorrect},
      {"n", r.counts.n},
      {"n_orig_correct", r.counts.n_orig_correct},
      {"n_c_to_i", r.counts.n_c_to_i},
      {"n_i_to_c", r.counts.n_i_to_c},
      {"n_verdict_match", r.counts.n_verdict_match},
      {"n_refined_correct", r.counts.n_refined_correct},
      {"no_orig_correct", r.no_orig_correct},
      {"no_orig_incorrect", r.no_orig_incorrect},
      {"exact", r.exact},
  };
}

const char* const kMetricFields[] = {
    "acc_orig",        "acc_refine",       "delta",          "delta_c_to_i",
    "delta_i_to_c",    "acc_dis",          "acc_dis_orig_correct", "acc_dis_orig_incorrect",
    "n",               "n_orig_correct",   "n_c_to_i",       "n_i_to_c",
    "n_verdict_match", "n_refined_correct", "no_orig_correct", "no_orig_incorrect",
    "exact"};

}  // namespace

std::string metrics_to_text(const MetricsReport& report) {
  // ordered_json keeps the documented field order
  nlohmann::ordered_json doc;
  const json flat = metrics_json(report);
  for (const char* key : kMetricFields) {
    doc[key] = flat.at(key);
  }
  return doc.dump(2) + "\n";
}

std::string metrics_csv_header() {
  std::string out;
  for (const char* key : kMetricFields) {
    if (!out.empty()) {
      out += ',';
    }
    out += key;
  }
  return out;
}

std::string metrics_csv_row(const MetricsReport& report) {
  const json flat = metrics_json(report);
  std::string out;
  char buf[64];
  for (const char* key : kMetricFields) {
    if (!out.empty()) {
      out += ',';
    }
    const json& v = flat.at(key);
    if (v.is_number_float()) {
      std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
      out += buf;
    } else if (v.is_boolean()) {
      out += v.get<bool>() ? "1" : "0";
    } else {
      out += v.dump();
    }
  }
  return out;
}

std::string dynamics_to_text(const DynamicsLog& log) {
  json records = json::array();
  for (const auto& r : log.records) {
    json rec = metrics_json(r.metrics);
    rec["step"] = r.step;
    rec["mean_reward"] = r.mean_reward;
    rec["kl"] = r.kl;
    records.push_back(std::move(rec));
  }
  return json{{"format", "critique-rl/dynamics"}, {"version", kFormatVersion}, {"records", records}}
             .dump(2) +
         "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ConfigError("cannot write " + path.string());
  }
  out << contents;
  if (!out) {
    throw ConfigError("write failed for " + path.string());
  }
}

TaskSpec load_task(const std::filesystem::path& path) { return task_from_text(read_file(path)); }

PolicySnapshot load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_text(read_file(path));
}

}  // namespace crl
