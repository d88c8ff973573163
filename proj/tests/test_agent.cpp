#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "painloop/agent.hpp"

using namespace painloop;
using fixtures::near_policy_batch;
using fixtures::random_net;

TEST(State, Normalization) {
  auto s = make_state(50.0, 10.0);
  EXPECT_DOUBLE_EQ(s.norm_force, 0.5);
  EXPECT_DOUBLE_EQ(s.norm_target, 0.5);
  s = make_state(250.0, 40.0);
  EXPECT_EQ(s.norm_force, 1.0);
  EXPECT_EQ(s.norm_target, 1.0);
}

TEST(Mlp, ShapesAndInit) {
  Rng rng(1);
  auto p = make_policy();
  EXPECT_EQ(p.sizes(), (std::vector<std::size_t>{2, 32, 32, 16}));
  EXPECT_EQ(p.num_params(), 2u * 32 + 32 + 32 * 32 + 32 + 32 * 16 + 16);
  p.init(rng, 1.0);
  for (double b : p.bias(0)) EXPECT_EQ(b, 0.0);
  for (double w : p.weights(2)) EXPECT_EQ(w, 0.0);
  bool nonzero = false;
  for (double w : p.weights(0)) nonzero |= w != 0.0;
  EXPECT_TRUE(nonzero);
  EXPECT_EQ(p.tensor_name(0), "layer0.weight");
  EXPECT_EQ(p.tensor_name(64), "layer0.bias");
}

TEST(Policy, ZeroOutputLayerGivesUniform) {
  Rng rng(2);
  auto p = make_policy();
  p.init(rng, 1.0);
  const auto d = policy_forward(p, {0.3, 0.7});
  for (double x : d) EXPECT_NEAR(x, 1.0 / 16, 1e-15);
}

TEST(Policy, NonFiniteParamsNamed) {
  auto p = make_policy();
  p.bias(1)[3] = std::nan("");
  try {
    policy_forward(p, {0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::numeric);
    EXPECT_NE(std::string(e.what()).find("policy.layer1.bias"), std::string::npos);
  }
}

TEST(SelectAction, SamplesFromDistribution) {
  Distribution d{};
  d[3] = 0.25;
  d[9] = 0.75;
  Rng rng(4);
  std::map<int, int> counts;
  for (int i = 0; i < 20000; ++i) {
    auto s = select_action(d, rng);
    ++counts[s.action_id];
    EXPECT_DOUBLE_EQ(s.log_prob, std::log(d[s.action_id]));
  }
  EXPECT_EQ(counts.size(), 2u);
  EXPECT_NEAR(counts[9] / 20000.0, 0.75, 0.015);
}

TEST(SelectAction, RejectsBadDistributions) {
  Rng rng(1);
  Distribution d{};
  EXPECT_THROW(select_action(d, rng), Error);
  d.fill(1.0 / 16);
  d[0] = -0.1;
  EXPECT_THROW(select_action(d, rng), Error);
  d.fill(1.0 / 16);
  d[2] = std::nan("");
  EXPECT_THROW(select_action(d, rng), Error);
}

TEST(SelectAction, InitialIsUniform) {
  Rng rng(8);
  std::vector<int> counts(16, 0);
  for (int i = 0; i < 32000; ++i) ++counts[initial_action(rng)];
  for (int c : counts) EXPECT_NEAR(c, 2000, 200);
}

TEST(Advantages, Standardized) {
  Rng rng(3);
  auto v = random_net({2, 8, 8, 1}, rng);
  std::vector<Transition> b(10);
  for (std::size_t i = 0; i < b.size(); ++i) {
    b[i].state = {i / 10.0, 1 - i / 10.0};
    b[i].reward = (i % 3) * 0.5;
  }
  const auto a = compute_advantages(b, v);
  double mean = 0, var = 0;
  for (double x : a) mean += x / a.size();
  for (double x : a) var += (x - mean) * (x - mean) / a.size();
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var, 1.0, 1e-12);
}

TEST(Advantages, ConstantUsesFloor) {
  auto v = make_value();
  std::vector<Transition> b(4);
  for (auto& t : b) t.reward = 1.0;
  for (double x : compute_advantages(b, v)) EXPECT_EQ(x, 0.0);
  EXPECT_THROW(compute_advantages(std::vector<Transition>{}, v), Error);
}

TEST(Clip, TermAndActivity) {
  EXPECT_DOUBLE_EQ(clipped_term(1.5, 1.0, 0.2), 1.2);
  EXPECT_DOUBLE_EQ(clipped_term(0.5, 1.0, 0.2), 0.5);
  EXPECT_DOUBLE_EQ(clipped_term(0.5, -1.0, 0.2), -0.8);
  EXPECT_DOUBLE_EQ(clipped_term(1.5, -1.0, 0.2), -1.5);
  EXPECT_TRUE(clip_active(1.3, 1.0, 0.2));
  EXPECT_FALSE(clip_active(1.3, -1.0, 0.2));
  EXPECT_TRUE(clip_active(0.7, -1.0, 0.2));
  EXPECT_FALSE(clip_active(0.7, 1.0, 0.2));
  EXPECT_FALSE(clip_active(1.1, 1.0, 0.2));
}

TEST(Gradient, MatchesFiniteDifferencesOnRandomNets) {
  Rng rng(20240);
  PpoConfig cfg;
  for (int k = 0; k < 20; ++k) {
    auto policy = random_net({2, 32, 32, 16}, rng);
    auto value = random_net({2, 32, 32, 1}, rng);
    const auto batch = near_policy_batch(policy, 16, rng);
    const double err = gradient_check(policy, value, batch, cfg);
    EXPECT_LT(err, 1e-4) << "net " << k;
  }
}

TEST(Gradient, SmallNetsWithEntropyAndValueWeights) {
  Rng rng(77);
  PpoConfig cfg;
  cfg.entropy_coef = 0.3;
  cfg.value_coef = 2.0;
  cfg.hidden = 4;
  for (int k = 0; k < 10; ++k) {
    auto policy = random_net({2, 4, 4, 16}, rng, 1.5);
    auto value = random_net({2, 4, 4, 1}, rng, 1.5);
    EXPECT_LT(gradient_check(policy, value, near_policy_batch(policy, 8, rng), cfg), 1e-4);
  }
}

TEST(Gradient, ZeroInClipRegion) {
  Rng rng(5);
  PpoConfig cfg;
  cfg.entropy_coef = 0.0;
  auto policy = random_net({2, 32, 32, 16}, rng);
  auto value = random_net({2, 32, 32, 1}, rng);
  auto batch = near_policy_batch(policy, 8, rng);
  // Positive advantages with ratio 1.5 and negative ones with ratio 0.5: all clipped.
  std::vector<double> adv(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double logp = std::log(policy_forward(policy, batch[i].state)[batch[i].action_id]);
    const bool pos = i % 2 == 0;
    adv[i] = pos ? 1.0 : -1.0;
    batch[i].log_prob = logp - std::log(pos ? 1.5 : 0.5);
  }
  std::vector<double> pg(policy.num_params(), 0.0), vg(value.num_params(), 0.0);
  const auto st = ppo_objective(policy, value, batch, adv, cfg, pg, vg);
  EXPECT_DOUBLE_EQ(st.clip_fraction, 1.0);
  for (double g : pg) ASSERT_EQ(g, 0.0);
}

TEST(Update, FiniteAndDeterministic) {
  PpoConfig cfg;
  Rng r1(9), r2(9), data(10);
  auto p1 = random_net({2, 32, 32, 16}, data);
  auto v1 = random_net({2, 32, 32, 1}, data);
  const auto batch = near_policy_batch(p1, cfg.batch_size, data);
  auto p2 = p1;
  auto v2 = v1;
  ppo_update(p1, v1, batch, cfg, r1);
  ppo_update(p2, v2, batch, cfg, r2);
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(v1, v2);
  for (double x : p1.params()) ASSERT_TRUE(std::isfinite(x));
}

TEST(Update, WrongBatchSize) {
  PpoConfig cfg;
  Rng rng(1);
  auto p = make_policy();
  auto v = make_value();
  std::vector<Transition> b(cfg.batch_size - 1);
  EXPECT_THROW(ppo_update(p, v, b, cfg, rng), Error);
}

TEST(Update, RaisesProbabilityOfRewardedAction) {
  PpoConfig cfg;
  Rng rng(3);
  PpoAgent agent(cfg);
  const AgentState s{0.1, 0.5};
  const double before = policy_forward(agent.policy(), s)[7];
  for (int round = 0; round < 4; ++round)
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      auto d = agent.act(s);
      agent.record({s, d.action_id, d.log_prob, d.value, d.action_id == 7 ? 1.0 : 0.0, s});
    }
  EXPECT_EQ(agent.updates(), 4u);
  EXPECT_GT(policy_forward(agent.policy(), s)[7], before);
}

TEST(Update, DivergenceIsReported) {
  PpoConfig cfg;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 1e300;
  Rng rng(1);
  auto p = random_net({2, 32, 32, 16}, rng);
  auto v = random_net({2, 32, 32, 1}, rng);
  const auto batch = near_policy_batch(p, cfg.batch_size, rng);
  try {
    ppo_update(p, v, batch, cfg, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::numeric);
    const std::string what = e.what();
    EXPECT_TRUE(what.find("policy.layer") != std::string::npos || what.find("value.layer") != std::string::npos)
        << what;
  }
}

TEST(Agent, RecordValidatesReward) {
  PpoAgent agent(PpoConfig{});
  EXPECT_THROW(agent.record({{}, 0, 0.0, 0.0, 0.7, {}}), Error);
  EXPECT_NO_THROW(agent.record({{}, 0, std::log(1.0 / 16), 0.0, 0.5, {}}));
  EXPECT_EQ(agent.buffer().size(), 1u);
}

TEST(Agent, SameSeedSameTrajectory) {
  PpoConfig cfg;
  cfg.seed = 42;
  PpoAgent a(cfg), b(cfg);
  for (int i = 0; i < 40; ++i) {
    const AgentState s{0.05 * (i % 4 + 1), 0.25 * (i % 4 + 1)};
    auto da = a.act(s), db = b.act(s);
    ASSERT_EQ(da.action_id, db.action_id);
    ASSERT_EQ(da.log_prob, db.log_prob);
    a.record({s, da.action_id, da.log_prob, da.value, da.action_id % 2 ? 1.0 : 0.0, s});
    b.record({s, db.action_id, db.log_prob, db.value, db.action_id % 2 ? 1.0 : 0.0, s});
  }
  EXPECT_EQ(a.policy(), b.policy());
}

TEST(Config, Validation) {
  PpoConfig c;
  c.gamma = 0.9;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.minibatch = 32;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.clip_eps = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Checkpoint, RoundTripIsFloat32Exact) {
  Rng rng(6);
  auto p = random_net({2, 32, 32, 16}, rng);
  auto v = random_net({2, 32, 32, 1}, rng);
  std::stringstream ss;
  save_checkpoint(ss, p, v);
  auto p2 = make_policy();
  auto v2 = make_value();
  load_checkpoint(ss, p2, v2);
  for (std::size_t i = 0; i < p.num_params(); ++i)
    ASSERT_EQ(p2.params()[i], static_cast<double>(static_cast<float>(p.params()[i])));
  for (std::size_t i = 0; i < v.num_params(); ++i)
    ASSERT_EQ(v2.params()[i], static_cast<double>(static_cast<float>(v.params()[i])));
  // a second trip through float is lossless
  std::stringstream again;
  save_checkpoint(again, p2, v2);
  auto p3 = make_policy();
  auto v3 = make_value();
  load_checkpoint(again, p3, v3);
  EXPECT_EQ(p2, p3);
  EXPECT_EQ(v2, v3);
}

TEST(Checkpoint, LayoutAndErrors) {
  auto p = make_policy();
  auto v = make_value();
  std::stringstream ss;
  save_checkpoint(ss, p, v);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 4), "PLCK");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 12);  // 6 tensors per net
  EXPECT_NE(bytes.find("policy.layer0.weight"), std::string::npos);
  EXPECT_NE(bytes.find("value.layer2.bias"), std::string::npos);

  std::string bumped = bytes;
  bumped[4] = 2;
  std::stringstream b1(bumped);
  try {
    load_checkpoint(b1, p, v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::migration);
  }
  std::stringstream b2(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_checkpoint(b2, p, v), Error);
  std::stringstream b3("NOPE");
  EXPECT_THROW(load_checkpoint(b3, p, v), Error);
}
