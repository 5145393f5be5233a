#include <gtest/gtest.h>

#include <cmath>

#include "scenarios.hpp"
#include "tccdse/sac.hpp"

using namespace tccdse;
using nn::Mat;
using nn::Vec;

TEST(SumTree, TotalsAndFind) {
  SumTree t(5);
  const double p[5] = {1, 0, 3, 2, 4};
  for (std::size_t i = 0; i < 5; ++i) t.set(i, p[i]);
  EXPECT_DOUBLE_EQ(t.total(), 10);
  EXPECT_EQ(t.find(0.0), 0u);
  EXPECT_EQ(t.find(0.99), 0u);
  EXPECT_EQ(t.find(1.0), 2u);
  EXPECT_EQ(t.find(3.99), 2u);
  EXPECT_EQ(t.find(4.0), 3u);
  EXPECT_EQ(t.find(9.99), 4u);
  t.set(4, 0);
  EXPECT_DOUBLE_EQ(t.total(), 6);
  EXPECT_EQ(t.find(5.999999), 3u);
  EXPECT_THROW(SumTree(0), std::invalid_argument);
}

namespace {

Transition dummy(double r) { return {Vec::Zero(2), Vec::Zero(1), {}, r, Vec::Zero(2), false}; }

}  // namespace

TEST(Per, NewEntriesGetMaxPriorityAndRingOverwrites) {
  PrioritizedReplay buf(4);
  buf.store(dummy(0));
  EXPECT_DOUBLE_EQ(buf.priority(0), 1.0);
  buf.update_priorities({0}, {3.0});
  buf.store(dummy(1));
  EXPECT_DOUBLE_EQ(buf.priority(1), std::pow(3.0 + 1e-6, 0.6));
  for (int i = 2; i < 6; ++i) buf.store(dummy(i));
  EXPECT_EQ(buf.size(), 4u);
  EXPECT_DOUBLE_EQ(buf.at(0).r, 4);
  EXPECT_DOUBLE_EQ(buf.at(1).r, 5);
}

TEST(Per, SamplingFrequenciesWithinThreeSigma) {
  PrioritizedReplay buf(6, 0.6, 0.4, 0.0);
  for (int i = 0; i < 6; ++i) buf.store(dummy(i));
  const std::vector<double> td = {0.1, 2.0, 0.5, 1.0, 3.0, 0.0};
  buf.update_priorities({0, 1, 2, 3, 4, 5}, td);
  double total = 0;
  for (std::size_t i = 0; i < 6; ++i) total += buf.priority(i);
  Rng rng(23);
  const int n = 100000;
  std::vector<int> count(6);
  for (int k = 0; k < n / 100; ++k) {
    const auto b = buf.sample(100, rng);
    for (std::size_t j = 0; j < b.idx.size(); ++j) {
      ++count[b.idx[j]];
      ASSERT_LE(b.weights[j], 1.0);
      ASSERT_GT(b.weights[j], 0.0);
    }
  }
  for (std::size_t i = 0; i < 6; ++i) {
    const double p = buf.priority(i) / total;
    const double mean = n * p, sd = std::sqrt(n * p * (1 - p));
    EXPECT_LE(std::abs(count[i] - mean), 3 * sd + 1e-9) << i;
  }
}

TEST(Per, ImportanceWeightsAndBetaAnneal) {
  PrioritizedReplay buf(3, 1.0, 0.5, 0.25);
  for (int i = 0; i < 3; ++i) buf.store(dummy(i));
  buf.update_priorities({0, 1, 2}, {1.0, 2.0, 4.0});
  Rng rng(1);
  const auto b = buf.sample(64, rng);
  double total = 0;
  for (std::size_t i = 0; i < 3; ++i) total += buf.priority(i);
  double wmax = 0;
  for (auto i : b.idx) wmax = std::max(wmax, std::pow(3 * buf.priority(i) / total, -0.5));
  for (std::size_t j = 0; j < b.idx.size(); ++j)
    EXPECT_NEAR(b.weights[j], std::pow(3 * buf.priority(b.idx[j]) / total, -0.5) / wmax, 1e-12);
  EXPECT_DOUBLE_EQ(buf.beta(), 0.75);
  buf.sample(1, rng);
  buf.sample(1, rng);
  EXPECT_DOUBLE_EQ(buf.beta(), 1.0);
}

TEST(Epsilon, DecaysOnlyAfterFeasibleAndSlowerWhenStuck) {
  EpsilonSchedule e(0.5, 0.1, 100);
  e.step(false, false);
  EXPECT_DOUBLE_EQ(e.eps, 0.5);
  for (int i = 0; i < 100; ++i) e.step(true, false);
  EXPECT_NEAR(e.eps, 0.1, 1e-12);
  e.step(true, false);
  EXPECT_DOUBLE_EQ(e.eps, 0.1);
  EpsilonSchedule a(0.5, 0.1, 100), b(0.5, 0.1, 100);
  a.step(true, false);
  b.step(true, true);
  EXPECT_LT(a.eps, b.eps);
  EXPECT_LT(b.eps, 0.5);
}

TEST(Sac, AlphaGradientAndClamp) {
  EXPECT_DOUBLE_EQ(SacAgent::alpha_grad({-1.0, -3.0}, -2.0), 4.0);
  // Entropy far below target: alpha must rise.
  SacAgent low(scenario::small_sac(), 1);
  const double la = low.log_alpha();
  low.alpha_update(std::vector<double>(4, 50.0));
  EXPECT_GT(low.log_alpha(), la);
  SacAgent high(scenario::small_sac(), 1);
  high.set_log_alpha(10.0);
  for (int i = 0; i < 5; ++i) high.alpha_update(std::vector<double>(4, 50.0));
  EXPECT_EQ(high.log_alpha(), 10.0);
}

TEST(Sac, ActorGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) EXPECT_LT(scenario::actor_gradcheck(seed), 1e-4) << seed;
}

TEST(Sac, CriticGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) EXPECT_LT(scenario::critic_gradcheck(seed), 1e-4) << seed;
}

TEST(Sac, TargetsOnTerminalTransitionsAreRewards) {
  SacAgent agent(scenario::small_sac(), 3);
  Rng rng(3);
  Transition t{Vec::Zero(6), Vec::Zero(3), {0, 0}, 1.25, Vec::Ones(6), true};
  Transition u = t;
  u.done = false;
  const auto y = agent.targets({&t, &u}, rng);
  EXPECT_DOUBLE_EQ(y[0], 1.25);
  EXPECT_NE(y[1], 1.25);
}

TEST(Sac, ActionsAreBoundedAndDeterministicModeRepeats) {
  SacAgent agent(scenario::small_sac(), 4);
  Rng rng(9);
  const Vec s = Vec::Constant(6, 0.5);
  for (int i = 0; i < 50; ++i) {
    const auto a = agent.act(s, rng);
    ASSERT_EQ(a.cont.size(), 3);
    ASSERT_EQ(a.disc.size(), 2u);
    EXPECT_LE(a.cont.cwiseAbs().maxCoeff(), 1.0);
    for (int d : a.disc) {
      EXPECT_GE(d, 0);
      EXPECT_LT(d, 5);
    }
  }
  Rng r1(1), r2(2);
  EXPECT_EQ(agent.act(s, r1, true).cont, agent.act(s, r2, true).cont);
}

TEST(Sac, WarmupIsUniform) {
  auto cfg = scenario::small_sac();
  cfg.warmup = 10;
  cfg.eps0 = cfg.eps_min = 0.0001;
  SacAgent a(cfg, 1), b(cfg, 1);
  Rng r1(5), r2(5);
  const Vec s = Vec::Zero(6);
  // During warmup the action does not depend on the network weights.
  b.actor().set_params(std::vector<double>(b.actor().n_params(), 0.3));
  for (long t = 0; t < 10; ++t) EXPECT_EQ(a.select_action(s, r1, t).cont, b.select_action(s, r2, t).cont);
}

TEST(Sac, UpdateRunsAndCheckpointRoundTrips) {
  auto cfg = scenario::small_sac();
  SacAgent agent(cfg, 6);
  Rng rng(6);
  for (int i = 0; i < 32; ++i) {
    const Vec s = scenario::random_mat(6, 1, rng, 0, 1).col(0);
    const auto a = agent.uniform_action(rng);
    agent.store({s, a.cont, a.disc, uniform(rng, -1, 1), s, false});
  }
  ASSERT_TRUE(agent.ready());
  for (int i = 0; i < 5; ++i) {
    const auto st = agent.update(rng);
    EXPECT_TRUE(std::isfinite(st.critic_loss));
    EXPECT_TRUE(std::isfinite(st.actor_loss));
    EXPECT_GT(st.alpha, 0);
  }
  SacAgent copy(cfg, 99);
  copy.load_checkpoint(agent.checkpoint_json());
  EXPECT_EQ(copy.actor().params(), agent.actor().params());
  EXPECT_EQ(copy.log_alpha(), agent.log_alpha());
}

TEST(Sac, BanditConverges) {
  const double m = scenario::bandit_policy_mean(0);
  EXPECT_NEAR(m, 0.3, 0.05);
}
