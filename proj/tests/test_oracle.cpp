#include <gtest/gtest.h>

#include "painloop/agent.hpp"
#include "painloop/oracle.hpp"

using namespace painloop;

TEST(Oracle, DefaultPreferenceCoversTargets) {
  const OracleConfig o;
  const ActionSpace s;
  for (double t : s.force_targets) EXPECT_TRUE(o.preference.count(t)) << t;
  EXPECT_NO_THROW(o.validate());
}

TEST(Oracle, AgreeRatesMatchConfig) {
  const OracleConfig o;
  Rng rng(12);
  const TrialContext ctx{1, 10.0, Persona::male};
  const Action liked = o.preference.at(10.0);
  const Action other{0, 0};
  int hit = 0, miss = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    hit += feedback(liked, ctx, o, rng) == Feedback::agree;
    miss += feedback(other, ctx, o, rng) == Feedback::agree;
  }
  EXPECT_NEAR(hit / double(n), 0.9, 0.01);
  EXPECT_NEAR(miss / double(n), 0.05, 0.005);
}

TEST(Oracle, RandomPlayAgreeRate) {
  // uniform play: 0.9/16 + 15 * 0.05/16
  const OracleConfig o;
  const ActionSpace s;
  Rng rng(21);
  int agree = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto ctx = sample_context(s, Persona::female, rng);
    agree += feedback(decode(initial_action(rng)), ctx, o, rng) == Feedback::agree;
  }
  EXPECT_NEAR(agree / double(n), 0.103125, 0.003);
}

TEST(Oracle, TimeoutAndNeighborCredit) {
  OracleConfig o;
  o.p_timeout = 1.0;
  Rng rng(1);
  EXPECT_EQ(feedback({0, 0}, {1, 5.0, Persona::male}, o, rng), Feedback::timeout);
  o = {};
  o.neighbor_credit = 1.0;
  o.p_miss = 0.0;
  const Action liked = o.preference.at(5.0);
  EXPECT_EQ(feedback({liked.amp_idx, liked.pitch_idx - 1}, {1, 5.0, Persona::male}, o, rng), Feedback::agree);
  EXPECT_EQ(feedback({0, 0}, {1, 5.0, Persona::male}, o, rng), Feedback::disagree);
}

TEST(Oracle, FixedDrawCount) {
  // Two uniforms per call whatever the outcome, so streams stay aligned.
  const OracleConfig o;
  Rng a(5), b(5);
  feedback({0, 0}, {1, 5.0, Persona::male}, o, a);
  std::uniform_real_distribution<double> u(0, 1);
  u(b);
  u(b);
  EXPECT_EQ(a(), b());
}

TEST(Oracle, UnknownTargetIsConfigError) {
  const OracleConfig o;
  Rng rng(1);
  try {
    feedback({0, 0}, {1, 7.0, Persona::male}, o, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
  }
}

TEST(Oracle, ValidateRejectsBadProbabilities) {
  OracleConfig o;
  o.p_hit = 1.2;
  EXPECT_THROW(o.validate(), Error);
  o = {};
  o.p_hit = 0.04;
  EXPECT_THROW(o.validate(), Error);
}

TEST(Palpator, ProfileShape) {
  const PalpatorConfig c;
  EXPECT_EQ(palpation_profile(0.1, 30, c), 0.0);
  EXPECT_NEAR(palpation_profile(0.7, 30, c), 15.0, 1e-9);
  EXPECT_EQ(palpation_profile(2.0, 30, c), 30.0);
  EXPECT_NEAR(palpation_profile(4.8, 30, c), 0.0, 1e-9);
}

TEST(Palpator, TracesAlwaysCross) {
  const PalpatorConfig c;
  Rng rng(77);
  for (double target : {5.0, 10.0, 15.0, 20.0})
    for (int i = 0; i < 25; ++i) {
      const auto tr = gen_palpation_trace(target, c, rng);
      ASSERT_EQ(tr.samples.size(), 5000u);
      ASSERT_TRUE(tr.crossing_t);
      EXPECT_GT(*tr.crossing_t, 0.2);
      EXPECT_LT(*tr.crossing_t, 1.3);
      EXPECT_GE(tr.peak, target);
      for (const auto& s : tr.samples)
        for (double f : s.f) ASSERT_GE(f, 0.0);
    }
}

TEST(Palpator, Deterministic) {
  const PalpatorConfig c;
  Rng a(3), b(3);
  const auto x = gen_palpation_trace(15.0, c, a);
  const auto y = gen_palpation_trace(15.0, c, b);
  EXPECT_EQ(x.filtered, y.filtered);
}
