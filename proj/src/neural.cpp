#include "tccdse/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tccdse::nn {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr int kCheckpointVersion = 1;

template <class F>
void for_each_block(std::vector<Dense>& ls, F&& f) {
  for (auto& l : ls) {
    f(l.W.data(), l.gW.data(), static_cast<std::size_t>(l.W.size()));
    f(l.b.data(), l.gb.data(), static_cast<std::size_t>(l.b.size()));
  }
}

void append(std::vector<double>& out, const double* p, std::size_t n) {
  out.insert(out.end(), p, p + n);
}

nlohmann::json dense_json(const Dense& d) {
  nlohmann::json j;
  j["W"] = {{"shape", {d.W.rows(), d.W.cols()}},
            {"data", std::vector<double>(d.W.data(), d.W.data() + d.W.size())}};
  j["b"] = {{"shape", {d.b.size()}}, {"data", std::vector<double>(d.b.data(), d.b.data() + d.b.size())}};
  return j;
}

Dense dense_from_json(const nlohmann::json& j) {
  const auto ws = j.at("W").at("shape").get<std::vector<long>>();
  if (ws.size() != 2) throw std::runtime_error("checkpoint: W shape must be 2-d");
  Dense d(static_cast<int>(ws[1]), static_cast<int>(ws[0]));
  const auto wd = j.at("W").at("data").get<std::vector<double>>();
  const auto bd = j.at("b").at("data").get<std::vector<double>>();
  if (static_cast<long>(wd.size()) != d.W.size() || static_cast<long>(bd.size()) != d.b.size())
    throw std::runtime_error("checkpoint: data size does not match shape");
  std::copy(wd.begin(), wd.end(), d.W.data());
  std::copy(bd.begin(), bd.end(), d.b.data());
  return d;
}

Mat softmax_cols(const Mat& z) {
  Mat g(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) g.col(c) = softmax(z.col(c));
  return g;
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Dense::Dense(int in, int out)
    : W(Mat::Zero(out, in)), gW(Mat::Zero(out, in)), mW(Mat::Zero(out, in)), vW(Mat::Zero(out, in)),
      b(Vec::Zero(out)), gb(Vec::Zero(out)), mb(Vec::Zero(out)), vb(Vec::Zero(out)) {}

void Dense::init(Rng& rng) {
  const double r = 1.0 / std::sqrt(static_cast<double>(std::max(in_dim(), 1)));
  for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = uniform(rng, -r, r);
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = uniform(rng, -r, r);
}

Mlp::Mlp(const std::vector<int>& dims, Rng& rng) : dims_(dims) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp needs at least input and output dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers_.emplace_back(dims[i], dims[i + 1]);
    layers_.back().init(rng);
  }
}

Mat Mlp::forward(const Mat& x) {
  in_.resize(layers_.size());
  pre_.resize(layers_.size());
  Mat h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    in_[l] = h;
    pre_[l] = (layers_[l].W * h).colwise() + layers_[l].b;
    h = l + 1 < layers_.size() ? pre_[l].unaryExpr([](double v) { return gelu(v); }).eval() : pre_[l];
  }
  return h;
}

Mat Mlp::predict(const Mat& x) const {
  Mat h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Mat z = (layers_[l].W * h).colwise() + layers_[l].b;
    h = l + 1 < layers_.size() ? z.unaryExpr([](double v) { return gelu(v); }).eval() : z;
  }
  return h;
}

Vec Mlp::predict(const Vec& x) const { return predict(Mat(x)).col(0); }

Mat Mlp::backward(const Mat& dy) {
  if (in_.size() != layers_.size()) throw std::logic_error("Mlp::backward before forward");
  Mat g = dy;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    if (k + 1 < layers_.size())
      g = g.cwiseProduct(pre_[k].unaryExpr([](double v) { return gelu_grad(v); }));
    layers_[k].gW.noalias() += g * in_[k].transpose();
    layers_[k].gb += g.rowwise().sum();
    g = layers_[k].W.transpose() * g;
  }
  return g;
}

void Mlp::zero_grad() {
  for (auto& l : layers_) {
    l.gW.setZero();
    l.gb.setZero();
  }
}

void Mlp::adam_step(const AdamConfig& c) {
  ++t_;
  for (auto& l : layers_) {
    adam_update(l.W, l.gW, l.mW, l.vW, t_, c);
    adam_update(l.b, l.gb, l.mb, l.vb, t_, c);
  }
}

double Mlp::grad_norm_sq() const {
  double s = 0;
  for (const auto& l : layers_) s += l.gW.squaredNorm() + l.gb.squaredNorm();
  return s;
}

void Mlp::scale_grad(double s) {
  for (auto& l : layers_) {
    l.gW *= s;
    l.gb *= s;
  }
}

void Mlp::soft_update_from(const Mlp& src, double tau) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].W = tau * src.layers_[i].W + (1.0 - tau) * layers_[i].W;
    layers_[i].b = tau * src.layers_[i].b + (1.0 - tau) * layers_[i].b;
  }
}

std::size_t Mlp::n_params() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.W.size() + l.b.size());
  return n;
}

std::vector<double> Mlp::params() const {
  std::vector<double> out;
  for (const auto& l : layers_) {
    append(out, l.W.data(), static_cast<std::size_t>(l.W.size()));
    append(out, l.b.data(), static_cast<std::size_t>(l.b.size()));
  }
  return out;
}

void Mlp::set_params(const std::vector<double>& p) {
  if (p.size() != n_params()) throw std::invalid_argument("set_params: size mismatch");
  std::size_t off = 0;
  for_each_block(layers_, [&](double* w, double*, std::size_t n) {
    std::copy(p.begin() + static_cast<long>(off), p.begin() + static_cast<long>(off + n), w);
    off += n;
  });
}

std::vector<double> Mlp::grads() const {
  std::vector<double> out;
  for (const auto& l : layers_) {
    append(out, l.gW.data(), static_cast<std::size_t>(l.gW.size()));
    append(out, l.gb.data(), static_cast<std::size_t>(l.gb.size()));
  }
  return out;
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["dims"] = dims_;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : layers_) j["layers"].push_back(dense_json(l));
  return j;
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  Mlp m;
  m.dims_ = j.at("dims").get<std::vector<int>>();
  for (const auto& lj : j.at("layers")) m.layers_.push_back(dense_from_json(lj));
  if (m.layers_.size() + 1 != m.dims_.size()) throw std::runtime_error("checkpoint: layer count");
  return m;
}

Vec softmax(const Vec& z) {
  const double m = z.maxCoeff();
  Vec e = (z.array() - m).exp();
  return e / e.sum();
}

Vec log_softmax(const Vec& z) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return z.array() - lse;
}

Net::Net(const std::vector<int>& dims, Rng& rng, int experts, double balance) : balance_(balance) {
  if (experts < 1) throw std::invalid_argument("Net needs at least one expert");
  for (int k = 0; k < experts; ++k) experts_.emplace_back(dims, rng);
  if (experts > 1) {
    gate_ = Dense(dims.front(), experts);
    gate_.init(rng);
  }
}

Mat Net::gates(const Mat& x) const {
  if (experts_.size() == 1) return Mat::Ones(1, x.cols());
  return softmax_cols((gate_.W * x).colwise() + gate_.b);
}

Mat Net::forward(const Mat& x) {
  if (experts_.size() == 1) {
    last_balance_ = 0;
    return experts_[0].forward(x);
  }
  x_ = x;
  g_ = gates(x);
  last_balance_ = moe_balance_loss(g_, balance_);
  outs_.resize(experts_.size());
  Mat y = Mat::Zero(out_dim(), x.cols());
  for (std::size_t k = 0; k < experts_.size(); ++k) {
    outs_[k] = experts_[k].forward(x);
    y += (outs_[k].array().rowwise() * g_.row(static_cast<Eigen::Index>(k)).array()).matrix();
  }
  return y;
}

Mat Net::predict(const Mat& x) const {
  if (experts_.size() == 1) return experts_[0].predict(x);
  const Mat g = gates(x);
  Mat y = Mat::Zero(out_dim(), x.cols());
  for (std::size_t k = 0; k < experts_.size(); ++k)
    y += (experts_[k].predict(x).array().rowwise() * g.row(static_cast<Eigen::Index>(k)).array())
             .matrix();
  return y;
}

Vec Net::predict(const Vec& x) const { return predict(Mat(x)).col(0); }

Mat Net::backward(const Mat& dy) {
  if (experts_.size() == 1) return experts_[0].backward(dy);
  const auto K = static_cast<Eigen::Index>(experts_.size());
  const auto B = x_.cols();
  Mat dx = Mat::Zero(x_.rows(), B);
  Mat dg(K, B);
  const Vec gbar = g_.rowwise().mean();
  for (Eigen::Index k = 0; k < K; ++k) {
    const Mat dek = (dy.array().rowwise() * g_.row(k).array()).matrix();
    dx += experts_[static_cast<std::size_t>(k)].backward(dek);
    dg.row(k) = (outs_[static_cast<std::size_t>(k)].cwiseProduct(dy)).colwise().sum();
    dg.row(k).array() += balance_ * static_cast<double>(K) * 2.0 * gbar[k] / static_cast<double>(B);
  }
  Mat dz(K, B);
  for (Eigen::Index c = 0; c < B; ++c)
    dz.col(c) = g_.col(c).cwiseProduct(dg.col(c) - Vec::Constant(K, g_.col(c).dot(dg.col(c))));
  gate_.gW.noalias() += dz * x_.transpose();
  gate_.gb += dz.rowwise().sum();
  dx += gate_.W.transpose() * dz;
  return dx;
}

void Net::zero_grad() {
  for (auto& e : experts_) e.zero_grad();
  if (experts_.size() > 1) {
    gate_.gW.setZero();
    gate_.gb.setZero();
  }
}

void Net::adam_step(const AdamConfig& c) {
  ++t_;
  for (auto& e : experts_) e.adam_step(c);
  if (experts_.size() > 1) {
    adam_update(gate_.W, gate_.gW, gate_.mW, gate_.vW, t_, c);
    adam_update(gate_.b, gate_.gb, gate_.mb, gate_.vb, t_, c);
  }
}

void Net::clip_grad_norm(double max_norm) {
  double s = 0;
  for (const auto& e : experts_) s += e.grad_norm_sq();
  if (experts_.size() > 1) s += gate_.gW.squaredNorm() + gate_.gb.squaredNorm();
  const double n = std::sqrt(s);
  if (!(n > max_norm)) return;
  const double f = max_norm / n;
  for (auto& e : experts_) e.scale_grad(f);
  if (experts_.size() > 1) {
    gate_.gW *= f;
    gate_.gb *= f;
  }
}

void Net::soft_update_from(const Net& src, double tau) {
  for (std::size_t k = 0; k < experts_.size(); ++k) experts_[k].soft_update_from(src.experts_[k], tau);
  if (experts_.size() > 1) {
    gate_.W = tau * src.gate_.W + (1.0 - tau) * gate_.W;
    gate_.b = tau * src.gate_.b + (1.0 - tau) * gate_.b;
  }
}

std::size_t Net::n_params() const {
  std::size_t n = 0;
  for (const auto& e : experts_) n += e.n_params();
  if (experts_.size() > 1) n += static_cast<std::size_t>(gate_.W.size() + gate_.b.size());
  return n;
}

std::vector<double> Net::params() const {
  std::vector<double> out;
  for (const auto& e : experts_) {
    const auto p = e.params();
    out.insert(out.end(), p.begin(), p.end());
  }
  if (experts_.size() > 1) {
    append(out, gate_.W.data(), static_cast<std::size_t>(gate_.W.size()));
    append(out, gate_.b.data(), static_cast<std::size_t>(gate_.b.size()));
  }
  return out;
}

void Net::set_params(const std::vector<double>& p) {
  if (p.size() != n_params()) throw std::invalid_argument("set_params: size mismatch");
  std::size_t off = 0;
  for (auto& e : experts_) {
    const std::size_t n = e.n_params();
    e.set_params(std::vector<double>(p.begin() + static_cast<long>(off), p.begin() + static_cast<long>(off + n)));
    off += n;
  }
  if (experts_.size() > 1) {
    std::copy_n(p.begin() + static_cast<long>(off), gate_.W.size(), gate_.W.data());
    off += static_cast<std::size_t>(gate_.W.size());
    std::copy_n(p.begin() + static_cast<long>(off), gate_.b.size(), gate_.b.data());
  }
}

std::vector<double> Net::grads() const {
  std::vector<double> out;
  for (const auto& e : experts_) {
    const auto g = e.grads();
    out.insert(out.end(), g.begin(), g.end());
  }
  if (experts_.size() > 1) {
    append(out, gate_.gW.data(), static_cast<std::size_t>(gate_.gW.size()));
    append(out, gate_.gb.data(), static_cast<std::size_t>(gate_.gb.size()));
  }
  return out;
}

nlohmann::json Net::to_json() const {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["balance"] = balance_;
  j["experts"] = nlohmann::json::array();
  for (const auto& e : experts_) j["experts"].push_back(e.to_json());
  if (experts_.size() > 1) j["gate"] = dense_json(gate_);
  return j;
}

Net Net::from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  Net n;
  n.balance_ = j.value("balance", 0.01);
  for (const auto& e : j.at("experts")) n.experts_.push_back(Mlp::from_json(e));
  if (n.experts_.empty()) throw std::runtime_error("checkpoint: no experts");
  if (n.experts_.size() > 1) n.gate_ = dense_from_json(j.at("gate"));
  return n;
}

double moe_balance_loss(const Mat& gates, double lambda) {
  const Vec gbar = gates.rowwise().mean();
  return lambda * static_cast<double>(gates.rows()) * gbar.squaredNorm();
}

SquashedSample gaussian_tanh_sample(const Vec& mu, const Vec& log_std, const Vec& eps) {
  SquashedSample s;
  const Vec ls = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  const Vec sigma = ls.array().exp();
  s.u = mu + sigma.cwiseProduct(eps);
  s.action = s.u.array().tanh();
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double u = s.u[i];
    // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)), stable for large |u|.
    const double log_jac = 2.0 * (std::numbers::ln2 - u - std::log1p(std::exp(-2.0 * u)));
    lp += -0.5 * eps[i] * eps[i] - ls[i] - half_log_2pi - log_jac;
  }
  s.log_prob = lp;
  return s;
}

double squashed_log_density(double a, double mu, double log_std) {
  const double ls = std::clamp(log_std, kLogStdMin, kLogStdMax);
  const double u = std::atanh(a);
  const double z = (u - mu) / std::exp(ls);
  return -0.5 * z * z - ls - 0.5 * std::log(2.0 * std::numbers::pi) - std::log1p(-a * a);
}

CategoricalSample categorical_sample(const Vec& logits, double u) {
  const Vec lp = log_softmax(logits);
  double c = 0;
  const auto n = lp.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    c += std::exp(lp[i]);
    if (u < c) return {static_cast<int>(i), lp[i]};
  }
  // u landed in the rounding gap above the last cumulative value.
  Eigen::Index last = n - 1;
  while (last > 0 && !(std::exp(lp[last]) > 0)) --last;
  return {static_cast<int>(last), lp[last]};
}

}  // namespace tccdse::nn
