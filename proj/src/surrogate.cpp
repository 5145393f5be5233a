#include "tccdse/surrogate.hpp"

#include <limits>
#include <numeric>
#include <stdexcept>

#include "tccdse/rng.hpp"

namespace tccdse {

using nn::Mat;
using nn::Vec;

SurrogateModel::SurrogateModel(const SurrogateConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), residuals_(static_cast<std::size_t>(cfg.n_nodes)) {
  Rng init = substream(seed, "surrogate.init");
  std::vector<int> dims{input_dim()};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(3);
  net_ = nn::Net(dims, init);
  adam_.lr = cfg.lr;
}

Vec SurrogateModel::features(const Vec& s, const Vec& a, int node_idx) const {
  if (s.size() != cfg_.state_dim || a.size() != cfg_.action_dim)
    throw std::invalid_argument("surrogate: input shape mismatch");
  if (node_idx < 0 || node_idx >= cfg_.n_nodes) throw std::invalid_argument("surrogate: node index");
  Vec x = Vec::Zero(input_dim());
  x.head(cfg_.state_dim) = s;
  x.segment(cfg_.state_dim, cfg_.action_dim) = a;
  x[cfg_.state_dim + cfg_.action_dim + node_idx] = 1.0;
  return x;
}

Vec SurrogateModel::predict(const Vec& s, const Vec& a, int node_idx) const {
  return net_.predict(features(s, a, node_idx));
}

Mat SurrogateModel::predict(const Mat& x) const { return net_.predict(x); }

double SurrogateModel::loss(const Mat& x, const Mat& y) const {
  const Mat e = net_.predict(x) - y;
  double l = 0;
  for (int q = 0; q < 3; ++q) l += cfg_.head_weights[static_cast<std::size_t>(q)] * e.row(q).squaredNorm();
  return l / static_cast<double>(x.cols());
}

double SurrogateModel::loss_and_grad(const Mat& x, const Mat& y) {
  const Mat e = net_.forward(x) - y;
  const double B = static_cast<double>(x.cols());
  Mat d = e;
  double l = 0;
  for (int q = 0; q < 3; ++q) {
    const double w = cfg_.head_weights[static_cast<std::size_t>(q)];
    l += w * e.row(q).squaredNorm();
    d.row(q) *= 2.0 * w / B;
  }
  net_.backward(d);
  return l / B;
}

double SurrogateModel::train_step(const Mat& x, const Mat& y) {
  net_.zero_grad();
  const double l = loss_and_grad(x, y);
  net_.adam_step(adam_);
  net_.zero_grad();
  ++steps_;
  return l;
}

void SurrogateModel::observe_residual(int node_idx, const Vec& pred, const Vec& truth) {
  auto& q = residuals_.at(static_cast<std::size_t>(node_idx));
  q.push_back(surrogate_uncertainty(pred, truth));
  while (static_cast<int>(q.size()) > cfg_.window) q.pop_front();
}

double SurrogateModel::rolling_residual(int node_idx) const {
  const auto& q = residuals_.at(static_cast<std::size_t>(node_idx));
  if (q.empty()) return std::numeric_limits<double>::infinity();
  return std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(q.size());
}

bool SurrogateModel::gate_open(int node_idx) const {
  const auto& q = residuals_.at(static_cast<std::size_t>(node_idx));
  return 2 * static_cast<int>(q.size()) >= cfg_.window &&
         surrogate_accept(rolling_residual(node_idx), cfg_.tau);
}

double surrogate_uncertainty(const Vec& pred, const Vec& truth) {
  if (pred.size() != 3 || truth.size() != 3) throw std::invalid_argument("surrogate: need 3 heads");
  return (pred - truth).squaredNorm() / 3.0;
}

bool surrogate_accept(double sigma2, double tau) { return sigma2 < tau; }

}  // namespace tccdse
