#include "tccdse/planner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tccdse/rlenv.hpp"

namespace tccdse {

using nn::Mat;
using nn::Vec;

WorldModel::WorldModel(int state_dim, int action_dim, std::uint64_t seed, std::vector<int> hidden,
                       double lr)
    : sd_(state_dim), ad_(action_dim) {
  Rng init = substream(seed, "planner.world_model");
  std::vector<int> dims{state_dim + action_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(state_dim);
  net_ = nn::Net(dims, init);
  adam_.lr = lr;
}

Mat WorldModel::input(const Mat& s, const Mat& a) const {
  if (s.rows() != sd_ || a.rows() != ad_ || s.cols() != a.cols())
    throw std::invalid_argument("world model: input shape mismatch");
  Mat x(sd_ + ad_, s.cols());
  x.topRows(sd_) = s;
  x.bottomRows(ad_) = a;
  return x;
}

Mat WorldModel::predict(const Mat& s, const Mat& a) const { return s + net_.predict(input(s, a)); }

Vec WorldModel::predict(const Vec& s, const Vec& a) const {
  return predict(Mat(s), Mat(a)).col(0);
}

double WorldModel::loss(const Mat& s, const Mat& a, const Mat& s2) const {
  const Mat e = net_.predict(input(s, a)) - (s2 - s);
  return e.squaredNorm() / static_cast<double>(e.size());
}

double WorldModel::loss_and_grad(const Mat& s, const Mat& a, const Mat& s2) {
  const Mat e = net_.forward(input(s, a)) - (s2 - s);
  const double n = static_cast<double>(e.size());
  net_.backward(2.0 * e / n);
  return e.squaredNorm() / n;
}

double WorldModel::train_step(const Mat& s, const Mat& a, const Mat& s2) {
  net_.zero_grad();
  const double l = loss_and_grad(s, a, s2);
  net_.adam_step(adam_);
  net_.zero_grad();
  ++steps_;
  return l;
}

double surrogate_reward(double perf, double power, double area) {
  return perf - 0.3 * power - 0.2 * area;
}

PpaSlice subset_ppa_slice() {
  const auto& idx = subset_indices();
  auto pos = [&](int full) {
    const auto it = std::find(idx.begin(), idx.end(), full);
    if (it == idx.end()) throw std::logic_error("PPA observation missing from state subset");
    return static_cast<int>(it - idx.begin());
  };
  return {pos(50), pos(51), pos(52)};
}

MpcResult mpc_plan(const PolicyMean& policy, const WorldModel& wm, const Vec& s,
                   const StateReward& reward, const MpcConfig& cfg, Rng& rng, double lo, double hi) {
  const int K = std::max(cfg.candidates, 1);
  const int ad = wm.action_dim();
  MpcResult out;
  const Mat base = policy(Mat(s));
  Mat a0(ad, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < ad; ++j)
      a0(j, i) = std::clamp(base(j, 0) + cfg.sigma * standard_normal(rng), -1.0, 1.0);

  Mat S = s.replicate(1, K);
  Mat A = a0;
  out.returns.assign(static_cast<std::size_t>(K), 0.0);
  double disc = 1.0;
  for (int k = 0; k < cfg.horizon; ++k) {
    S = wm.predict(S, A).cwiseMax(lo).cwiseMin(hi);
    out.wm_forwards += K;
    for (int i = 0; i < K; ++i) out.returns[static_cast<std::size_t>(i)] += disc * reward(S.col(i));
    disc *= cfg.gamma;
    if (k + 1 < cfg.horizon) A = policy(S).cwiseMax(-1.0).cwiseMin(1.0);
  }
  // First strictly larger return wins, so ties go to the lowest index.
  for (int i = 1; i < K; ++i)
    if (out.returns[static_cast<std::size_t>(i)] > out.returns[static_cast<std::size_t>(out.best)])
      out.best = i;
  out.action = a0.col(out.best);
  return out;
}

Vec blend(const Vec& a_mpc, const Vec& a_sac, int begin, int end) {
  Vec out = a_sac;
  for (int i = std::max(begin, 0); i < std::min<int>(end, static_cast<int>(a_sac.size())); ++i)
    out[i] = std::clamp(0.7 * a_mpc[i] + 0.3 * a_sac[i], -1.0, 1.0);
  return out;
}

bool mpc_active(double epsilon, const WorldModel& wm, const MpcConfig& cfg) {
  return epsilon < cfg.eps_gate && wm.trained();
}

}  // namespace tccdse
