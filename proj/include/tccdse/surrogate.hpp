#pragma once

#include <array>
#include <deque>
#include <vector>

#include "tccdse/neural.hpp"

namespace tccdse {

inline constexpr int kNumNodes = 7;

// Head order inside the surrogate output.
enum SurrogateHead : int { kHeadPower = 0, kHeadPerf = 1, kHeadArea = 2 };

struct SurrogateConfig {
  int state_dim = 52;
  int action_dim = 30;
  int n_nodes = kNumNodes;
  std::vector<int> hidden{128, 64};
  double lr = 1e-3;
  std::array<double, 3> head_weights{1.0, 1.0, 1.0};
  double tau = 0.05;
  int window = 32;  // rolling residual window
};

// Shared trunk over (state, action, node one-hot) with three scalar heads
// predicting normalized power, perf and area.
class SurrogateModel {
 public:
  SurrogateModel(const SurrogateConfig& cfg, std::uint64_t seed);

  int input_dim() const { return cfg_.state_dim + cfg_.action_dim + cfg_.n_nodes; }
  nn::Vec features(const nn::Vec& s, const nn::Vec& a, int node_idx) const;
  nn::Vec predict(const nn::Vec& s, const nn::Vec& a, int node_idx) const;
  nn::Mat predict(const nn::Mat& x) const;

  // Weighted MSE sum_q w_q (m_q - m_hat_q)^2, averaged over the batch.
  double loss(const nn::Mat& x, const nn::Mat& y) const;
  double train_step(const nn::Mat& x, const nn::Mat& y);
  // Accumulates the loss gradient without stepping (for gradient checks).
  double loss_and_grad(const nn::Mat& x, const nn::Mat& y);

  // Records |residual|^2 / 3 for a verified prediction.
  void observe_residual(int node_idx, const nn::Vec& pred, const nn::Vec& truth);
  double rolling_residual(int node_idx) const;
  // Trusted once the window is half full and its mean residual is below tau.
  bool gate_open(int node_idx) const;

  const SurrogateConfig& config() const { return cfg_; }
  void set_head_weights(const std::array<double, 3>& w) { cfg_.head_weights = w; }
  nn::Net& net() { return net_; }
  long steps() const { return steps_; }

 private:
  SurrogateConfig cfg_;
  nn::Net net_;
  nn::AdamConfig adam_;
  long steps_ = 0;
  std::vector<std::deque<double>> residuals_;
};

// (1/3) sum_q (m_q - m_hat_q)^2
double surrogate_uncertainty(const nn::Vec& pred, const nn::Vec& truth);
// Strict: sigma^2 == tau is rejected.
bool surrogate_accept(double sigma2, double tau);

}  // namespace tccdse
