#include "critique_rl/metrics.hpp"

#include <algorithm>

#include "critique_rl/errors.hpp"

namespace crl {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport compute_metrics(std::span<const Episode> episodes) {
  if (episodes.empty()) {
    throw InputError("compute_metrics: no episodes");
  }
  MetricsCounts c;
  std::size_t match_correct = 0;
  std::size_t match_incorrect = 0;
  for (const Episode& ep : episodes) {
    ++c.n;
    const bool match = (ep.critique.verdict == Verdict::Ok) == ep.original_correct;
    if (ep.original_correct) {
      ++c.n_orig_correct;
      if (!ep.refined_correct) {
        ++c.n_c_to_i;
      }
      match_correct += match ? 1 : 0;
    } else {
      if (ep.refined_correct) {
        ++c.n_i_to_c;
      }
      match_incorrect += match ? 1 : 0;
    }
    c.n_verdict_match += match ? 1 : 0;
    c.n_refined_correct += ep.refined_correct ? 1 : 0;
  }
  const std::size_t n_orig_incorrect = c.n - c.n_orig_correct;
  MetricsReport r;
  r.counts = c;
  r.acc_orig = ratio(c.n_orig_correct, c.n);
  r.acc_refine = ratio(c.n_refined_correct, c.n);
  r.delta = r.acc_refine - r.acc_orig;
  r.delta_c_to_i = ratio(c.n_c_to_i, c.n_orig_correct);
  r.delta_i_to_c = ratio(c.n_i_to_c, n_orig_incorrect);
  r.acc_dis = ratio(c.n_verdict_match, c.n);
  r.acc_dis_orig_correct = ratio(match_correct, c.n_orig_correct);
  r.acc_dis_orig_incorrect = ratio(match_incorrect, n_orig_incorrect);
  r.no_orig_correct = c.n_orig_correct == 0;
  r.no_orig_incorrect = n_orig_incorrect == 0;
  return r;
}

MetricsReport exact_metrics(const TaskSpec& spec, const CriticPolicy& critic) {
  check_compatible(spec, critic);
  const auto shape = spec.shape();
  const auto w = context_weights(spec);
  double p_orig = 0.0;      // P(original correct)
  double p_refined = 0.0;   // P(refined correct)
  double p_c_to_i = 0.0;    // P(original correct, refined wrong)
  double p_i_to_c = 0.0;    // P(original wrong, refined correct)
  double p_match_c = 0.0;   // P(original correct, verdict OK)
  double p_match_i = 0.0;   // P(original wrong, verdict FLAW)
  for (std::size_t s = 0; s < shape.num_contexts(); ++s) {
    if (w[s] == 0.0) {
      continue;
    }
    const std::size_t q = shape.question_of(s);
    const std::size_t a = shape.answer_of(s);
    const bool correct = spec.correct_answer(q) == a;
    const auto p = action_distribution(critic, s);
    double refined = 0.0;
    double ok = 0.0;
    for (std::size_t c = 0; c < shape.num_actions(); ++c) {
      const Critique critique = shape.critique_of(c);
      refined += p[c] * refined_correct_probability(spec, q, a, critique);
      ok += critique.verdict == Verdict::Ok ? p[c] : 0.0;
    }
    p_refined += w[s] * refined;
    if (correct) {
      p_orig += w[s];
      p_c_to_i += w[s] * (1.0 - refined);
      p_match_c += w[s] * ok;
    } else {
      p_i_to_c += w[s] * refined;
      p_match_i += w[s] * (1.0 - ok);
    }
  }
  MetricsReport r;
  r.exact = true;
  r.acc_orig = p_orig;
  r.acc_refine = p_refined;
  r.delta = p_refined - p_orig;
  r.no_orig_correct = p_orig <= 0.0;
  r.no_orig_incorrect = p_orig >= 1.0;
  r.delta_c_to_i = r.no_orig_correct ? 0.0 : p_c_to_i / p_orig;
  r.delta_i_to_c = r.no_orig_incorrect ? 0.0 : p_i_to_c / (1.0 - p_orig);
  r.acc_dis = p_match_c + p_match_i;
  r.acc_dis_orig_correct = r.no_orig_correct ? 0.0 : p_match_c / p_orig;
  r.acc_dis_orig_incorrect = r.no_orig_incorrect ? 0.0 : p_match_i / (1.0 - p_orig);
  return r;
}

bool majority_vote(std::span<const AnswerSample> samples, std::size_t correct_answer) {
  if (samples.empty()) {
    throw InputError("majority_vote: no samples");
  }
  // first-occurrence order of distinct answers with their tallies
  std::vector<std::pair<std::size_t, std::size_t>> tally;
  for (const auto& s : samples) {
    auto it = std::find_if(tally.begin(), tally.end(),
                           [&](const auto& entry) { return entry.first == s.answer; });
    if (it == tally.end()) {
      tally.emplace_back(s.answer, 1);
    } else {
      ++it->second;
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < tally.size(); ++i) {
    if (tally[i].second > tally[best].second) {
      best = i;
    }
  }
  return tally[best].first == correct_answer;
}

bool pass_at_k(std::span<const AnswerSample> samples) {
  if (samples.empty()) {
    throw InputError("pass_at_k: no samples");
  }
  return std::any_of(samples.begin(), samples.end(), [](const auto& s) { return s.correct; });
}

std::vector<ScalingRow> mv_curve(const TaskSpec& spec, const CriticPolicy& critic,
                                 std::span<const std::size_t> ks, std::size_t trials,
                                 std::uint64_t seed) {
  check_compatible(spec, critic);
  if (ks.empty() || trials == 0) {
    throw InputError("mv_curve: need at least one K and one trial");
  }
  std::vector<ScalingRow> rows;
  std::vector<AnswerSample> refined;
  std::vector<AnswerSample> plain;
  for (std::size_t k : ks) {
    if (k == 0) {
      throw InputError("mv_curve: K must be positive");
    }
    ScalingRow row{k, trials, 0.0, 0.0, 0.0, 0.0, 0.0};
    std::size_t mv_c = 0, mv_1 = 0, mv_2 = 0, mv_3 = 0, pass = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      auto rng = RngStream::derive(seed, k, t);
      const std::size_t q = rng.uniform_index(spec.num_questions());
      const std::size_t correct = spec.correct_answer(q);
      refined.clear();
      plain.clear();
      for (std::size_t i = 0; i < k; ++i) {
        const Episode ep = rollout(spec, critic, q, rng);
        refined.push_back({ep.refined_answer, ep.refined_correct});
      }
      for (std::size_t i = 0; i < 3 * k; ++i) {
        const auto draw = sample_original(spec, q, rng);
        plain.push_back({draw.answer, draw.correct});
      }
      std::span<const AnswerSample> all(plain);
      mv_c += majority_vote(refined, correct) ? 1 : 0;
      mv_1 += majority_vote(all.first(k), correct) ? 1 : 0;
      mv_2 += majority_vote(all.first(2 * k), correct) ? 1 : 0;
      mv_3 += majority_vote(all, correct) ? 1 : 0;
      pass += pass_at_k(refined) ? 1 : 0;
    }
    const double n = static_cast<double>(trials);
    row.mv_critique = mv_c / n;
    row.mv_plain = mv_1 / n;
    row.mv_plain_2k = mv_2 / n;
    row.mv_plain_3k = mv_3 / n;
    row.pass_critique = pass / n;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace crl
