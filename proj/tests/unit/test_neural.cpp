#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "scenarios.hpp"
#include "tccdse/neural.hpp"

using namespace tccdse;
using nn::Mat;
using nn::Vec;

TEST(Neural, GeluValuesAndGradient) {
  EXPECT_DOUBLE_EQ(nn::gelu(0), 0);
  EXPECT_NEAR(nn::gelu(1), 0.8413447460685429, 1e-12);
  EXPECT_NEAR(nn::gelu(-1), -0.15865525393145707, 1e-12);
  for (double x = -4; x <= 4; x += 0.37) {
    const double h = 1e-6;
    const double num = (nn::gelu(x + h) - nn::gelu(x - h)) / (2 * h);
    EXPECT_NEAR(nn::gelu_grad(x), num, 1e-8) << x;
  }
}

TEST(Neural, SoftmaxStable) {
  Vec z(3);
  z << 1000, 1001, 999;
  const Vec p = nn::softmax(z);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  EXPECT_GT(p[1], p[0]);
  const Vec lp = nn::log_softmax(z);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::exp(lp[i]), p[i], 1e-12);
}

TEST(Neural, MlpGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    nn::Mlp net({7, 12, 9, 3}, rng);
    const Mat x = scenario::random_mat(7, 4, rng), r = scenario::random_mat(3, 4, rng);
    net.zero_grad();
    net.forward(x);
    const Mat dx = net.backward(r);
    const auto g = net.grads();
    const double err = oracle::gradcheck(net.params(), g, [&](const std::vector<double>& p) {
      net.set_params(p);
      return net.predict(x).cwiseProduct(r).sum();
    });
    EXPECT_LT(err, 1e-4) << seed;
    // Input gradient.
    for (int i = 0; i < 7; ++i) {
      Mat xp = x, xm = x;
      xp(i, 1) += 1e-5;
      xm(i, 1) -= 1e-5;
      const double num = (net.predict(xp).cwiseProduct(r).sum() - net.predict(xm).cwiseProduct(r).sum()) / 2e-5;
      EXPECT_NEAR(dx(i, 1), num, 1e-6 * std::max(1.0, std::abs(num)));
    }
  }
}

TEST(Neural, MoeGradientIncludesBalanceLoss) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed + 100);
    nn::Net net({5, 8, 2}, rng, 3, 0.1);
    const Mat x = scenario::random_mat(5, 6, rng), r = scenario::random_mat(2, 6, rng);
    net.zero_grad();
    net.forward(x);
    net.backward(r);
    const auto g = net.grads();
    const double err = oracle::gradcheck(net.params(), g, [&](const std::vector<double>& p) {
      net.set_params(p);
      const Mat y = net.forward(x);
      return y.cwiseProduct(r).sum() + net.last_balance_loss();
    });
    EXPECT_LT(err, 1e-4) << seed;
  }
}

TEST(Neural, MoeBalanceLossMinimalWhenUniform) {
  Mat g = Mat::Constant(4, 10, 0.25);
  EXPECT_NEAR(nn::moe_balance_loss(g, 1.0), 1.0, 1e-12);
  g.setZero();
  g.row(0).setOnes();
  EXPECT_NEAR(nn::moe_balance_loss(g, 1.0), 4.0, 1e-12);
}

TEST(Neural, SingleExpertMatchesMlp) {
  Rng a(3), b(3);
  nn::Net net({4, 6, 2}, a, 1);
  const Mat x = scenario::random_mat(4, 3, b);
  const Mat gates = net.gates(x);
  EXPECT_TRUE(gates.isOnes(1e-12));
}

TEST(Neural, ParamsRoundTripAndJson) {
  Rng rng(1);
  nn::Net net({4, 6, 2}, rng, 2);
  auto p = net.params();
  EXPECT_EQ(p.size(), net.n_params());
  for (auto& v : p) v *= 0.5;
  net.set_params(p);
  EXPECT_EQ(net.params(), p);
  const auto back = nn::Net::from_json(net.to_json());
  EXPECT_EQ(back.params(), p);
  EXPECT_THROW(net.set_params(std::vector<double>(3)), std::exception);
}

TEST(Neural, AdamConvergesOnQuadratic) {
  Vec p = Vec::Constant(3, 5.0), m = Vec::Zero(3), v = Vec::Zero(3);
  nn::AdamConfig c;
  c.lr = 0.05;
  for (long t = 1; t <= 2000; ++t) {
    const Vec g = 2 * p;
    nn::adam_update(p, g, m, v, t, c);
  }
  EXPECT_LT(p.norm(), 1e-2);
}

TEST(Neural, SoftUpdate) {
  Rng rng(2);
  nn::Net a({3, 4, 1}, rng), b({3, 4, 1}, rng);
  const auto pa = a.params(), pb = b.params();
  a.soft_update_from(b, 0.25);
  const auto pc = a.params();
  for (std::size_t i = 0; i < pc.size(); ++i) EXPECT_NEAR(pc[i], 0.75 * pa[i] + 0.25 * pb[i], 1e-15);
}

TEST(Neural, SquashedSampleLogProbMatchesDensity) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    Vec mu(2), ls(2), eps(2);
    for (int k = 0; k < 2; ++k) {
      mu[k] = uniform(rng, -1, 1);
      ls[k] = uniform(rng, -2, 0.5);
      eps[k] = standard_normal(rng);
    }
    const auto s = nn::gaussian_tanh_sample(mu, ls, eps);
    double lp = 0;
    for (int k = 0; k < 2; ++k) {
      EXPECT_NEAR(s.action[k], std::tanh(mu[k] + std::exp(ls[k]) * eps[k]), 1e-15);
      if (std::abs(s.action[k]) < 0.999999) lp += nn::squashed_log_density(s.action[k], mu[k], ls[k]);
      else lp = NAN;
    }
    if (std::isfinite(lp)) EXPECT_NEAR(s.log_prob, lp, 1e-6 * std::max(1.0, std::abs(lp)));
  }
}

TEST(Neural, SquashedDensityIntegratesToOne) {
  const double cases[][2] = {{0, 0}, {0.5, -0.5}, {-1, 0.3}, {0.2, -1.5}};
  for (const auto& c : cases) {
    const int n = 200000;
    double sum = 0;
    for (int i = 0; i < n; ++i) {
      const double a = -1 + (i + 0.5) * 2.0 / n;
      sum += std::exp(nn::squashed_log_density(a, c[0], c[1]));
    }
    EXPECT_NEAR(sum * 2.0 / n, 1.0, 1e-3) << c[0] << " " << c[1];
  }
}

TEST(Neural, CategoricalFrequenciesWithinThreeSigma) {
  Vec logits(5);
  logits << 0.1, -1, 2, 0.5, 0;
  const Vec p = nn::softmax(logits);
  Rng rng(17);
  const int n = 100000;
  std::vector<int> count(5);
  for (int i = 0; i < n; ++i) {
    const auto s = nn::categorical_sample(logits, uniform01(rng));
    ++count[static_cast<std::size_t>(s.index)];
    ASSERT_NEAR(s.log_prob, std::log(p[s.index]), 1e-12);
  }
  for (int k = 0; k < 5; ++k) {
    const double mean = n * p[k], sd = std::sqrt(n * p[k] * (1 - p[k]));
    EXPECT_LE(std::abs(count[static_cast<std::size_t>(k)] - mean), 3 * sd) << k;
  }
}
