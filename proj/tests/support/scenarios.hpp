#pragma once

// Shared fixtures for the unit and acceptance tests: small network
// instances for gradient checks and the one-step continuous bandit.

#include <cmath>
#include <cstdint>
#include <vector>

#include "oracles.hpp"
#include "tccdse/neural.hpp"
#include "tccdse/planner.hpp"
#include "tccdse/rng.hpp"
#include "tccdse/sac.hpp"
#include "tccdse/surrogate.hpp"

namespace scenario {

using tccdse::nn::Mat;
using tccdse::nn::Vec;

inline Mat random_mat(int rows, int cols, tccdse::Rng& rng, double lo = -1, double hi = 1) {
  Mat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = tccdse::uniform(rng, lo, hi);
  return m;
}

inline Mat normal_mat(int rows, int cols, tccdse::Rng& rng) {
  Mat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = tccdse::standard_normal(rng);
  return m;
}

inline tccdse::SacConfig small_sac() {
  tccdse::SacConfig c;
  c.state_dim = 6;
  c.cont_dim = 3;
  c.disc_heads = 2;
  c.disc_choices = 5;
  c.hidden = {16, 16};
  c.batch = 8;
  c.buffer = 256;
  c.target_entropy = -3;
  return c;
}

// Worst relative error of the actor loss gradient for one seed.
inline double actor_gradcheck(std::uint64_t seed) {
  tccdse::SacAgent agent(small_sac(), seed);
  tccdse::Rng rng(seed * 7 + 1);
  const auto& c = agent.config();
  const Mat s = random_mat(c.state_dim, 5, rng, 0, 1);
  const Mat noise = normal_mat(c.cont_dim, 5, rng);
  auto& net = agent.actor();
  net.zero_grad();
  agent.actor_loss_and_grad(s, noise);
  const auto g = net.grads();
  const auto p = net.params();
  const double err = oracle::gradcheck(p, g, [&](const std::vector<double>& q) {
    net.set_params(q);
    return agent.actor_loss(s, noise);
  });
  net.set_params(p);
  return err;
}

// Worst relative error of the twin-critic loss gradient for one seed.
inline double critic_gradcheck(std::uint64_t seed) {
  tccdse::SacAgent agent(small_sac(), seed);
  tccdse::Rng rng(seed * 7 + 2);
  const auto& c = agent.config();
  const int B = 6;
  const Mat s = random_mat(c.state_dim, B, rng, 0, 1);
  const Mat a = random_mat(c.cont_dim, B, rng);
  std::vector<double> y(B), w(B);
  for (int b = 0; b < B; ++b) {
    y[static_cast<std::size_t>(b)] = tccdse::uniform(rng, -2, 2);
    w[static_cast<std::size_t>(b)] = tccdse::uniform(rng, 0.1, 1);
  }
  agent.q1().zero_grad();
  agent.q2().zero_grad();
  agent.critic_loss_and_grad(s, a, y, w);
  auto p = agent.q1().params();
  const auto n1 = p.size();
  auto g = agent.q1().grads();
  const auto p2 = agent.q2().params(), g2 = agent.q2().grads();
  p.insert(p.end(), p2.begin(), p2.end());
  g.insert(g.end(), g2.begin(), g2.end());
  return oracle::gradcheck(p, g, [&](const std::vector<double>& q) {
    agent.q1().set_params(std::vector<double>(q.begin(), q.begin() + static_cast<long>(n1)));
    agent.q2().set_params(std::vector<double>(q.begin() + static_cast<long>(n1), q.end()));
    return agent.critic_loss(s, a, y, w);
  });
}

inline double world_model_gradcheck(std::uint64_t seed) {
  tccdse::WorldModel wm(8, 4, seed, {16, 16});
  tccdse::Rng rng(seed * 7 + 3);
  const Mat s = random_mat(8, 6, rng, 0, 1), a = random_mat(4, 6, rng), s2 = random_mat(8, 6, rng, 0, 1);
  wm.net().zero_grad();
  wm.loss_and_grad(s, a, s2);
  const auto g = wm.net().grads();
  return oracle::gradcheck(wm.net().params(), g, [&](const std::vector<double>& q) {
    wm.net().set_params(q);
    return wm.loss(s, a, s2);
  });
}

inline double surrogate_gradcheck(std::uint64_t seed) {
  tccdse::SurrogateConfig cfg;
  cfg.state_dim = 8;
  cfg.action_dim = 4;
  cfg.hidden = {16, 16};
  cfg.head_weights = {1.0, 0.5, 2.0};
  tccdse::SurrogateModel m(cfg, seed);
  tccdse::Rng rng(seed * 7 + 4);
  const Mat x = random_mat(m.input_dim(), 6, rng, 0, 1), y = random_mat(3, 6, rng, 0, 1);
  m.net().zero_grad();
  m.loss_and_grad(x, y);
  const auto g = m.net().grads();
  return oracle::gradcheck(m.net().params(), g, [&](const std::vector<double>& q) {
    m.net().set_params(q);
    return m.loss(x, y);
  });
}

// Trains SAC on the stateless bandit r = -(a - 0.3)^2 for `steps` steps and
// returns the deterministic policy action tanh(mu).
inline double bandit_policy_mean(std::uint64_t seed, int steps = 5000) {
  tccdse::SacConfig c;
  c.state_dim = 1;
  c.cont_dim = 1;
  c.disc_heads = 0;
  c.hidden = {32, 32};
  c.lr_actor = c.lr_critic = c.lr_alpha = 1e-3;
  c.batch = 64;
  c.buffer = 10000;
  c.warmup = 200;
  c.target_entropy = -1;
  c.eps0 = c.eps_min = 0.05;
  tccdse::SacAgent agent(c, seed);
  tccdse::Rng rng = tccdse::substream(seed, "bandit");
  Vec s = Vec::Ones(1);
  for (long t = 0; t < steps; ++t) {
    const auto pa = agent.select_action(s, rng, t);
    const double a = pa.cont[0];
    tccdse::Transition tr{s, pa.cont, {}, -(a - 0.3) * (a - 0.3), s, true};
    agent.store(std::move(tr));
    if (t >= c.warmup && agent.ready()) agent.update(rng);
  }
  return agent.act(s, rng, true).cont[0];
}

}  // namespace scenario
