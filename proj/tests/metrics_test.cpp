#include <gtest/gtest.h>

#include <cmath>

#include "critique_rl/env.hpp"
#include "critique_rl/errors.hpp"
#include "critique_rl/metrics.hpp"
#include "critique_rl/optim.hpp"
#include "critique_rl/rng.hpp"

namespace crl {
namespace {

Episode make(bool orig, bool refined, bool ok) {
  Episode ep;
  ep.original_answer = orig ? 0 : 1;
  ep.original_correct = orig;
  ep.critique = {ok ? Verdict::Ok : Verdict::Flaw, 0};
  ep.refined_answer = refined ? 0 : 1;
  ep.refined_correct = refined;
  return ep;
}

TEST(ComputeMetrics, WorkedExample) {
  const std::vector<Episode> eps{make(1, 1, 1), make(1, 0, 1), make(0, 1, 0), make(0, 1, 1)};
  const auto m = compute_metrics(eps);
  EXPECT_DOUBLE_EQ(m.acc_orig, 0.5);
  EXPECT_DOUBLE_EQ(m.acc_refine, 0.75);
  EXPECT_DOUBLE_EQ(m.delta, 0.25);
  EXPECT_DOUBLE_EQ(m.delta_c_to_i, 0.5);
  EXPECT_DOUBLE_EQ(m.delta_i_to_c, 1.0);
  EXPECT_DOUBLE_EQ(m.acc_dis, 0.75);
  EXPECT_EQ(m.counts.n, 4u);
  EXPECT_EQ(m.counts.n_orig_correct, 2u);
  EXPECT_EQ(m.counts.n_c_to_i, 1u);
  EXPECT_EQ(m.counts.n_i_to_c, 2u);
  EXPECT_EQ(m.counts.n_verdict_match, 3u);
  EXPECT_EQ(m.counts.n_refined_correct, 3u);
  EXPECT_FALSE(m.exact);
}

TEST(ComputeMetrics, UnchangedCorrect) {
  const std::vector<Episode> eps(10, make(1, 1, 1));
  const auto m = compute_metrics(eps);
  EXPECT_EQ(m.delta, 0.0);
  EXPECT_EQ(m.delta_c_to_i, 0.0);
  EXPECT_EQ(m.acc_refine, m.acc_orig);
  EXPECT_TRUE(m.no_orig_incorrect);
  EXPECT_FALSE(m.no_orig_correct);
  EXPECT_EQ(m.delta_i_to_c, 0.0);
}

TEST(ComputeMetrics, EmptyIsInputError) {
  EXPECT_THROW(compute_metrics(std::vector<Episode>{}), InputError);
}

TEST(ComputeMetrics, IdentitiesOnRandomSets) {
  auto rng = RngStream::derive(17, 0);
  for (int set = 0; set < 1000; ++set) {
    const std::size_t n = 1 + rng.uniform_index(200);
    std::vector<Episode> eps;
    for (std::size_t i = 0; i < n; ++i) {
      eps.push_back(make(rng.bernoulli(0.5), rng.bernoulli(0.5), rng.bernoulli(0.5)));
    }
    const auto m = compute_metrics(eps);
    EXPECT_NEAR(m.acc_refine, m.acc_orig + m.delta, 1e-12);
    if (!m.no_orig_correct && !m.no_orig_incorrect) {
      EXPECT_NEAR(m.delta, m.delta_i_to_c * (1 - m.acc_orig) - m.delta_c_to_i * m.acc_orig,
                  1e-12);
    }
    for (double r : {m.acc_orig, m.acc_refine, m.delta_c_to_i, m.delta_i_to_c, m.acc_dis}) {
      EXPECT_GE(r, 0.0);
      EXPECT_LE(r, 1.0);
    }
  }
}

TEST(ExactMetrics, FrozenRefinement) {
  EnvParams params;
  params.refine.p_keep_ok = 1.0;
  const auto spec = generate_task(params);
  const std::vector<std::size_t> ok_actions(12, spec.shape().action({Verdict::Ok, 0}));
  const auto critic = near_deterministic_policy(spec.shape(), ok_actions, 800.0);
  const auto m = exact_metrics(spec, critic);
  EXPECT_EQ(m.acc_refine, m.acc_orig);
  EXPECT_EQ(m.delta, 0.0);
  EXPECT_TRUE(m.exact);
}

TEST(ExactMetrics, PerfectVerdicts) {
  const auto spec = reference_task();
  const auto m = exact_metrics(spec, perfect_critic(spec, 800.0));
  EXPECT_DOUBLE_EQ(m.acc_dis, 1.0);
  EXPECT_NEAR(m.acc_orig, 0.6, 1e-12);
  EXPECT_NEAR(m.acc_refine, m.acc_orig + m.delta, 1e-12);
}

TEST(ExactMetrics, AgreesWithMonteCarlo) {
  const auto spec = reference_task();
  const auto critic = make_teacher(spec, TeacherSpec{});
  const auto exact = exact_metrics(spec, critic);
  const auto mc = compute_metrics(rollout_many(spec, critic, 500000, 99));
  EXPECT_NEAR(mc.acc_orig, exact.acc_orig, 0.005);
  EXPECT_NEAR(mc.acc_refine, exact.acc_refine, 0.005);
  EXPECT_NEAR(mc.delta, exact.delta, 0.005);
  EXPECT_NEAR(mc.delta_c_to_i, exact.delta_c_to_i, 0.005);
  EXPECT_NEAR(mc.delta_i_to_c, exact.delta_i_to_c, 0.005);
  EXPECT_NEAR(mc.acc_dis, exact.acc_dis, 0.005);
  EXPECT_NEAR(mc.acc_dis_orig_correct, exact.acc_dis_orig_correct, 0.005);
  EXPECT_NEAR(mc.acc_dis_orig_incorrect, exact.acc_dis_orig_incorrect, 0.005);
}

TEST(ExactMetrics, ShapeMismatch) {
  const auto spec = reference_task();
  EXPECT_THROW(exact_metrics(spec, CriticPolicy(PolicyShape{4, 3, 4})), ConfigError);
}

TEST(MajorityVote, Cases) {
  const std::vector<AnswerSample> strict{{0, true}, {0, true}, {1, false}};
  EXPECT_TRUE(majority_vote(strict, 0));
  const std::vector<AnswerSample> single{{2, false}};
  EXPECT_FALSE(majority_vote(single, 0));
  EXPECT_TRUE(majority_vote(single, 2));
  const std::vector<AnswerSample> tie{{0, true}, {1, false}};
  EXPECT_TRUE(majority_vote(tie, 0));
  EXPECT_FALSE(majority_vote(tie, 1));
  const std::vector<AnswerSample> tie2{{1, false}, {0, true}, {0, true}, {1, false}};
  EXPECT_FALSE(majority_vote(tie2, 0));
}

TEST(PassAtK, Cases) {
  const std::vector<AnswerSample> some{{0, false}, {0, false}, {1, true}};
  EXPECT_TRUE(pass_at_k(some));
  const std::vector<AnswerSample> none{{0, false}, {2, false}};
  EXPECT_FALSE(pass_at_k(none));
  auto rng = RngStream::derive(4, 0);
  std::vector<AnswerSample> list;
  for (int i = 0; i < 20; ++i) {
    list.push_back({0, rng.bernoulli(0.1)});
  }
  bool prev = false;
  for (std::size_t k = 1; k <= list.size(); ++k) {
    const bool now = pass_at_k(std::span(list).first(k));
    EXPECT_GE(now, prev);
    prev = now;
  }
}

TEST(MvCurve, KOneMatchesExactAccuracies) {
  const auto spec = reference_task();
  const auto critic = make_teacher(spec, TeacherSpec{});
  const auto exact = exact_metrics(spec, critic);
  const std::vector<std::size_t> ks{1};
  const std::size_t trials = 20000;
  const auto rows = mv_curve(spec, critic, ks, trials, 5);
  ASSERT_EQ(rows.size(), 1u);
  const auto sigma = [&](double p) { return std::sqrt(p * (1 - p) / trials); };
  EXPECT_LE(std::abs(rows[0].mv_plain - exact.acc_orig), 3 * sigma(exact.acc_orig));
  EXPECT_LE(std::abs(rows[0].mv_critique - exact.acc_refine), 3 * sigma(exact.acc_refine));
  EXPECT_EQ(rows[0].pass_critique, rows[0].mv_critique);
}

TEST(MvCurve, DeterministicCorrectActor) {
  EnvParams params;
  params.p_correct = 1.0;
  params.refine.p_keep_ok = 1.0;
  const auto spec = generate_task(params);
  const auto critic = perfect_critic(spec, 800.0);
  const std::vector<std::size_t> ks{1, 2, 4};
  for (const auto& r : mv_curve(spec, critic, ks, 500, 1)) {
    EXPECT_EQ(r.mv_critique, 1.0);
    EXPECT_EQ(r.mv_plain, 1.0);
    EXPECT_EQ(r.mv_plain_2k, 1.0);
    EXPECT_EQ(r.mv_plain_3k, 1.0);
    EXPECT_EQ(r.pass_critique, 1.0);
  }
}

TEST(MvCurve, PassAtKNondecreasing) {
  const auto spec = reference_task();
  const auto critic = make_teacher(spec, TeacherSpec{});
  const std::vector<std::size_t> ks{1, 2, 4, 8};
  const auto rows = mv_curve(spec, critic, ks, 5000, 3);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GE(rows[i].pass_critique, rows[i - 1].pass_critique);
  }
}

}  // namespace
}  // namespace crl
