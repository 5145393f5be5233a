#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "tccdse/rng.hpp"

namespace tccdse::nn {

using Mat = Eigen::MatrixXd;  // batches are column-major: one sample per column
using Vec = Eigen::VectorXd;

// Exact (erf) GELU.
double gelu(double x);
double gelu_grad(double x);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update of `p` given gradient `g`; t is the 1-based step count.
template <class P, class G, class M>
void adam_update(P& p, const G& g, M& m, M& v, long t, const AdamConfig& c) {
  m = c.beta1 * m + (1.0 - c.beta1) * g;
  v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  p.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
}

struct Dense {
  Mat W, gW, mW, vW;
  Vec b, gb, mb, vb;

  Dense() = default;
  Dense(int in, int out);
  // Uniform in +-1/sqrt(fan_in).
  void init(Rng& rng);
  int in_dim() const { return static_cast<int>(W.cols()); }
  int out_dim() const { return static_cast<int>(W.rows()); }
};

// Dense layers with GELU between them and a linear output.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int>& dims, Rng& rng);

  int in_dim() const { return layers_.front().in_dim(); }
  int out_dim() const { return layers_.back().out_dim(); }
  const std::vector<int>& dims() const { return dims_; }

  Mat forward(const Mat& x);  // caches activations for backward
  Mat predict(const Mat& x) const;
  Vec predict(const Vec& x) const;
  Mat backward(const Mat& dy);  // accumulates parameter grads, returns dL/dx

  void zero_grad();
  void adam_step(const AdamConfig& c);
  double grad_norm_sq() const;
  void scale_grad(double s);
  void soft_update_from(const Mlp& src, double tau);

  std::size_t n_params() const;
  std::vector<double> params() const;
  void set_params(const std::vector<double>& p);
  std::vector<double> grads() const;

  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  std::vector<int> dims_;
  std::vector<Dense> layers_;
  std::vector<Mat> in_, pre_;
  long t_ = 0;
};

// Softmax of one logit vector.
Vec softmax(const Vec& z);

// Softmax-gated mixture of K expert MLPs with a load-balance regularizer
// lambda * K * sum_k mean_gate_k^2. With K = 1 it reduces to a plain MLP.
class Net {
 public:
  Net() = default;
  Net(const std::vector<int>& dims, Rng& rng, int experts = 1, double balance = 0.01);

  int in_dim() const { return experts_.front().in_dim(); }
  int out_dim() const { return experts_.front().out_dim(); }
  int n_experts() const { return static_cast<int>(experts_.size()); }

  Mat forward(const Mat& x);
  Mat predict(const Mat& x) const;
  Vec predict(const Vec& x) const;
  Mat backward(const Mat& dy);  // includes the balance-loss gradient
  double last_balance_loss() const { return last_balance_; }
  Mat gates(const Mat& x) const;  // K x B

  void zero_grad();
  void adam_step(const AdamConfig& c);
  void clip_grad_norm(double max_norm);
  void soft_update_from(const Net& src, double tau);

  std::size_t n_params() const;
  std::vector<double> params() const;
  void set_params(const std::vector<double>& p);
  std::vector<double> grads() const;

  nlohmann::json to_json() const;
  static Net from_json(const nlohmann::json& j);

 private:
  std::vector<Mlp> experts_;
  Dense gate_;
  double balance_ = 0.01;
  long t_ = 0;
  Mat x_, g_;
  std::vector<Mat> outs_;
  double last_balance_ = 0;
};

double moe_balance_loss(const Mat& gates, double lambda);

inline constexpr double kLogStdMin = -20.0, kLogStdMax = 2.0;

struct SquashedSample {
  Vec u;       // pre-squash sample
  Vec action;  // tanh(u)
  double log_prob = 0;
};
// a = tanh(mu + sigma * eps); log_std is clamped before use.
SquashedSample gaussian_tanh_sample(const Vec& mu, const Vec& log_std, const Vec& eps);
// Density of the squashed 1-d Gaussian at a in (-1, 1).
double squashed_log_density(double a, double mu, double log_std);

struct CategoricalSample {
  int index = 0;
  double log_prob = 0;
};
CategoricalSample categorical_sample(const Vec& logits, double u);

// Numerically stable log-softmax.
Vec log_softmax(const Vec& z);

}  // namespace tccdse::nn
