#include <gtest/gtest.h>

#include "critique_rl/errors.hpp"
#include "critique_rl/rewards.hpp"

namespace crl {
namespace {

Episode make(bool orig, bool refined, Verdict verdict) {
  Episode ep;
  ep.question = 0;
  ep.original_answer = orig ? 0 : 1;
  ep.original_correct = orig;
  ep.critique = {verdict, 0};
  ep.refined_answer = refined ? 0 : 1;
  ep.refined_correct = refined;
  return ep;
}

TEST(Rewards, RefineUsesOnlyRefinement) {
  EXPECT_EQ(r_refine(make(false, true, Verdict::Ok)), 1.0);
  EXPECT_EQ(r_refine(make(true, false, Verdict::Ok)), 0.0);
  EXPECT_EQ(r_refine(make(false, true, Verdict::Flaw)), r_refine(make(true, true, Verdict::Flaw)));
}

TEST(Rewards, DeltaCases) {
  EXPECT_EQ(r_delta(make(false, true, Verdict::Ok)), 1.0);
  EXPECT_EQ(r_delta(make(true, false, Verdict::Ok)), -1.0);
  EXPECT_EQ(r_delta(make(true, true, Verdict::Ok)), 0.0);
}

TEST(Rewards, CorrectionCases) {
  EXPECT_EQ(r_correction(make(false, true, Verdict::Ok)), 1.0);
  EXPECT_EQ(r_correction(make(true, true, Verdict::Ok)), 0.2);
  EXPECT_EQ(r_correction(make(true, false, Verdict::Ok)), 0.0);
  EXPECT_EQ(r_correction(make(false, false, Verdict::Ok)), 0.0);
}

TEST(Rewards, DisCases) {
  EXPECT_EQ(r_dis(make(true, true, Verdict::Ok)), 1.0);
  EXPECT_EQ(r_dis(make(false, true, Verdict::Ok)), 0.0);
  EXPECT_EQ(r_dis(make(true, true, Verdict::Flaw)), r_dis(make(true, false, Verdict::Flaw)));
}

TEST(Rewards, Stage2Composite) {
  EXPECT_DOUBLE_EQ(r_stage2(make(false, true, Verdict::Flaw), 0.2), 1.2);
  EXPECT_DOUBLE_EQ(r_stage2(make(true, false, Verdict::Ok), 0.9), 0.9);
}

TEST(Rewards, ContinuousDis) {
  EXPECT_EQ(r_dis_continuous(3.0, 3.0, 2.0), 1.0);
  EXPECT_EQ(r_dis_continuous(9.0, 5.0, 4.0), 0.0);
  EXPECT_EQ(r_dis_continuous(0.0, 5.0, 4.0), 0.0);
  EXPECT_DOUBLE_EQ(r_dis_continuous(7.0, 5.0, 4.0), 0.5);
  EXPECT_THROW(r_dis_continuous(1.0, 1.0, 0.0), InputError);
}

// Every (orig, refined, verdict) combination.
class Exhaustive : public ::testing::TestWithParam<int> {};

TEST_P(Exhaustive, RangesAndIdentities) {
  const int bits = GetParam();
  const bool orig = bits & 1;
  const bool refined = bits & 2;
  const Verdict verdict = (bits & 4) ? Verdict::Ok : Verdict::Flaw;
  const auto ep = make(orig, refined, verdict);

  const double rr = r_refine(ep);
  const double rd = r_delta(ep);
  const double rc = r_correction(ep);
  const double rs = r_dis(ep);
  EXPECT_TRUE(rr == 0.0 || rr == 1.0);
  EXPECT_TRUE(rs == 0.0 || rs == 1.0);
  EXPECT_TRUE(rd == -1.0 || rd == 0.0 || rd == 1.0);
  EXPECT_TRUE(rc == 0.0 || rc == 0.2 || rc == 1.0);
  EXPECT_EQ(rd, rr - (orig ? 1.0 : 0.0));
  EXPECT_EQ(rs, (verdict == Verdict::Ok) == orig ? 1.0 : 0.0);
  for (double b : {0.0, 0.2, 0.9, 3.0}) {
    EXPECT_DOUBLE_EQ(r_stage2(ep, b), rr + b * rs);
  }
  EXPECT_EQ(r_stage2(ep, 0.0), rr);
  const double c = r_dis_continuous(verdict == Verdict::Ok ? 1.0 : 0.0, orig ? 1.0 : 0.0, 0.5);
  EXPECT_GE(c, 0.0);
  EXPECT_LE(c, 1.0);
}

INSTANTIATE_TEST_SUITE_P(AllEpisodes, Exhaustive, ::testing::Range(0, 8));

TEST(RewardFnTest, DispatchesEveryVariant) {
  const auto ep = make(false, true, Verdict::Flaw);
  EXPECT_EQ((RewardFn{RewardVariant::Refine})(ep), 1.0);
  EXPECT_EQ((RewardFn{RewardVariant::Delta})(ep), 1.0);
  EXPECT_EQ((RewardFn{RewardVariant::Correction})(ep), 1.0);
  EXPECT_EQ((RewardFn{RewardVariant::Dis})(ep), 1.0);
  EXPECT_DOUBLE_EQ((RewardFn{RewardVariant::Stage2Composite, 0.2})(ep), 1.2);
  RewardFn swapped{RewardVariant::Stage2Composite, 0.5, RewardVariant::Correction};
  EXPECT_DOUBLE_EQ(swapped(make(true, true, Verdict::Ok)), 0.7);
  RewardFn cont{RewardVariant::ContinuousDis};
  cont.delta_range = 2.0;
  EXPECT_DOUBLE_EQ(cont(make(true, true, Verdict::Flaw)), 0.5);
}

TEST(RewardFnTest, Validation) {
  RewardFn bad{RewardVariant::Stage2Composite, -0.1};
  EXPECT_ANY_THROW(bad.validate());
  RewardFn cont{RewardVariant::ContinuousDis};
  cont.delta_range = 0.0;
  EXPECT_ANY_THROW(cont.validate());
}

TEST(RewardFnTest, NamesRoundTrip) {
  for (auto v : {RewardVariant::Refine, RewardVariant::Delta, RewardVariant::Correction,
                 RewardVariant::Dis, RewardVariant::Stage2Composite,
                 RewardVariant::ContinuousDis}) {
    EXPECT_EQ(parse_reward_variant(to_string(v)), v);
  }
  EXPECT_EQ(to_string(RewardVariant::ContinuousDis), "continuous-dis");
  EXPECT_EQ(to_string(RewardVariant::Stage2Composite), "stage2");
  EXPECT_ANY_THROW(parse_reward_variant("bogus"));
}

}  // namespace
}  // namespace crl
