#include "tccdse/sac.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tccdse {

using nn::Mat;
using nn::Vec;

SumTree::SumTree(std::size_t capacity) : cap_(capacity), leaf0_(1) {
  if (capacity == 0) throw std::invalid_argument("SumTree capacity must be > 0");
  while (leaf0_ < capacity) leaf0_ <<= 1;
  tree_.assign(2 * leaf0_, 0.0);
}

void SumTree::set(std::size_t i, double p) {
  std::size_t n = leaf0_ + i;
  const double delta = p - tree_[n];
  for (; n >= 1; n >>= 1) tree_[n] += delta;
}

std::size_t SumTree::find(double v) const {
  std::size_t n = 1;
  while (n < leaf0_) {
    const std::size_t left = 2 * n;
    if (v < tree_[left]) {
      n = left;
    } else {
      v -= tree_[left];
      n = left + 1;
    }
  }
  std::size_t i = n - leaf0_;
  // Rounding can land on an empty leaf past the end; step back to a live one.
  while (i > 0 && (i >= cap_ || tree_[leaf0_ + i] <= 0.0)) --i;
  return i;
}

PrioritizedReplay::PrioritizedReplay(std::size_t capacity, double alpha, double beta0,
                                     double beta_step)
    : tree_(capacity), alpha_(alpha), beta_(beta0), beta_step_(beta_step) {}

void PrioritizedReplay::store(Transition t) {
  if (data_.size() < tree_.capacity()) {
    data_.push_back(std::move(t));
  } else {
    data_[next_] = std::move(t);
  }
  tree_.set(next_, max_priority_);
  next_ = (next_ + 1) % tree_.capacity();
}

PrioritizedReplay::Batch PrioritizedReplay::sample(std::size_t n, Rng& rng) {
  if (data_.empty()) throw std::logic_error("sample from empty replay buffer");
  Batch b;
  b.idx.resize(n);
  b.weights.resize(n);
  const double total = tree_.total();
  const double N = static_cast<double>(data_.size());
  double wmax = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = tree_.find(uniform01(rng) * total);
    b.idx[k] = i;
    const double p = tree_.get(i) / total;
    b.weights[k] = std::pow(N * p, -beta_);
    wmax = std::max(wmax, b.weights[k]);
  }
  for (auto& w : b.weights) w /= wmax;
  beta_ = std::min(1.0, beta_ + beta_step_);
  return b;
}

void PrioritizedReplay::update_priorities(const std::vector<std::size_t>& idx,
                                          const std::vector<double>& td) {
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double p = std::pow(std::abs(td[k]) + 1e-6, alpha_);
    tree_.set(idx[k], p);
    max_priority_ = std::max(max_priority_, p);
  }
}

double EpsilonSchedule::decay_for(double eps0, double eps_min, int horizon) {
  return std::pow(eps_min / eps0, 1.0 / std::max(horizon, 1));
}

EpsilonSchedule::EpsilonSchedule(double eps0, double eps_min_, int horizon)
    : eps(eps0), eps_min(eps_min_), d(decay_for(eps0, eps_min_, horizon)) {}

void EpsilonSchedule::step(bool feasible_found, bool stuck) {
  if (!feasible_found) return;
  eps = std::max(eps_min, eps * (stuck ? stuck_decay(d) : d));
}

namespace {

std::vector<int> net_dims(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> d{in};
  d.insert(d.end(), hidden.begin(), hidden.end());
  d.push_back(out);
  return d;
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;

// log(1 - tanh(u)^2), stable for large |u|.
double log_jacobian(double u) {
  return 2.0 * (std::numbers::ln2 - u - std::log1p(std::exp(-2.0 * u)));
}

}  // namespace

SacAgent::SacAgent(const SacConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), log_alpha_(std::log(cfg.alpha0)),
      buffer_(cfg.buffer, cfg.per_alpha, cfg.per_beta0, cfg.per_beta_step),
      eps_(cfg.eps0, cfg.eps_min, cfg.eps_horizon) {
  Rng init = substream(seed, "sac.init");
  const int out = 2 * cfg.cont_dim + cfg.disc_heads * cfg.disc_choices;
  actor_ = nn::Net(net_dims(cfg.state_dim, cfg.hidden, out), init, cfg.moe_experts);
  const auto qd = net_dims(cfg.state_dim + cfg.cont_dim, cfg.hidden, 1);
  q1_ = nn::Net(qd, init);
  q2_ = nn::Net(qd, init);
  q1t_ = q1_;
  q2t_ = q2_;
}

double SacAgent::alpha() const { return std::exp(log_alpha_); }

Mat SacAgent::critic_input(const Mat& s, const Mat& a) const {
  Mat x(s.rows() + a.rows(), s.cols());
  x.topRows(s.rows()) = s;
  x.bottomRows(a.rows()) = a;
  return x;
}

PolicyHeads SacAgent::heads(const Mat& s) const {
  const Mat out = actor_.predict(s);
  PolicyHeads h;
  const int c = cfg_.cont_dim;
  h.mu = out.topRows(c);
  h.log_std_raw = out.middleRows(c, c);
  h.log_std = h.log_std_raw.cwiseMax(nn::kLogStdMin).cwiseMin(nn::kLogStdMax);
  h.logits = out.bottomRows(cfg_.disc_heads * cfg_.disc_choices);
  return h;
}

PolicyAction SacAgent::act(const Vec& s, Rng& rng, bool deterministic) const {
  const PolicyHeads h = heads(Mat(s));
  PolicyAction a;
  const int c = cfg_.cont_dim;
  if (deterministic) {
    a.cont = h.mu.col(0).array().tanh();
  } else {
    Vec eps(c);
    for (int i = 0; i < c; ++i) eps[i] = standard_normal(rng);
    const auto smp = nn::gaussian_tanh_sample(h.mu.col(0), h.log_std.col(0), eps);
    a.cont = smp.action;
    a.log_prob = smp.log_prob;
  }
  const int C = cfg_.disc_choices;
  for (int k = 0; k < cfg_.disc_heads; ++k) {
    const Vec lg = h.logits.col(0).segment(k * C, C);
    if (deterministic) {
      Eigen::Index best = 0;
      lg.maxCoeff(&best);
      a.disc.push_back(static_cast<int>(best));
    } else {
      const auto cs = nn::categorical_sample(lg, uniform01(rng));
      a.disc.push_back(cs.index);
      a.log_prob += cs.log_prob;
    }
  }
  return a;
}

PolicyAction SacAgent::uniform_action(Rng& rng) const {
  PolicyAction a;
  a.cont.resize(cfg_.cont_dim);
  for (int i = 0; i < cfg_.cont_dim; ++i) a.cont[i] = uniform(rng, -1.0, 1.0);
  for (int k = 0; k < cfg_.disc_heads; ++k)
    a.disc.push_back(static_cast<int>(uniform01(rng) * cfg_.disc_choices));
  return a;
}

PolicyAction SacAgent::select_action(const Vec& s, Rng& rng, long step) {
  const double u = uniform01(rng);
  if (step < cfg_.warmup || u < eps_.eps) return uniform_action(rng);
  return act(s, rng, false);
}

std::vector<double> SacAgent::targets(const std::vector<const Transition*>& batch, Rng& rng) const {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const int c = cfg_.cont_dim;
  Mat s2(cfg_.state_dim, B);
  for (Eigen::Index b = 0; b < B; ++b) s2.col(b) = batch[static_cast<std::size_t>(b)]->s2;
  const PolicyHeads h = heads(s2);
  Mat a2(c, B);
  std::vector<double> logp(static_cast<std::size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) {
    Vec eps(c);
    for (int i = 0; i < c; ++i) eps[i] = standard_normal(rng);
    const auto smp = nn::gaussian_tanh_sample(h.mu.col(b), h.log_std.col(b), eps);
    a2.col(b) = smp.action;
    logp[static_cast<std::size_t>(b)] = smp.log_prob;
  }
  const Mat x = critic_input(s2, a2);
  const Mat t1 = q1t_.predict(x), t2 = q2t_.predict(x);
  std::vector<double> y(static_cast<std::size_t>(B));
  const double al = alpha();
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& tr = *batch[static_cast<std::size_t>(b)];
    const double v = std::min(t1(0, b), t2(0, b)) - al * logp[static_cast<std::size_t>(b)];
    y[static_cast<std::size_t>(b)] = tr.r + (tr.done ? 0.0 : cfg_.gamma * v);
  }
  return y;
}

double SacAgent::actor_loss(const Mat& s, const Mat& noise) const {
  const PolicyHeads h = heads(s);
  const auto B = s.cols();
  Mat a(cfg_.cont_dim, B);
  double lp_sum = 0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto smp = nn::gaussian_tanh_sample(h.mu.col(b), h.log_std.col(b), noise.col(b));
    a.col(b) = smp.action;
    lp_sum += smp.log_prob;
  }
  const Mat x = critic_input(s, a);
  const Mat v1 = q1_.predict(x), v2 = q2_.predict(x);
  double q_sum = 0;
  for (Eigen::Index b = 0; b < B; ++b) q_sum += std::min(v1(0, b), v2(0, b));
  return (alpha() * lp_sum - q_sum) / static_cast<double>(B);
}

namespace {

struct DiscTerm {
  const std::vector<double>* adv;
  const std::vector<std::vector<int>>* chosen;
  double entropy_coef;
};

}  // namespace

// Shared by the public FD-checkable path and the training update.
static double actor_pass(nn::Net& actor, nn::Net& q1, nn::Net& q2, const SacConfig& cfg,
                         const Mat& s, const Mat& noise, const DiscTerm* disc,
                         std::vector<double>* logp_out, double alpha) {
  const int c = cfg.cont_dim;
  const auto B = s.cols();
  const double inv_b = 1.0 / static_cast<double>(B);
  const Mat out = actor.forward(s);
  const Mat mu = out.topRows(c);
  const Mat ls_raw = out.middleRows(c, c);
  const Mat ls = ls_raw.cwiseMax(nn::kLogStdMin).cwiseMin(nn::kLogStdMax);
  const Mat sigma = ls.array().exp();
  const Mat u = mu + sigma.cwiseProduct(noise);
  const Mat a = u.array().tanh();

  Mat x(cfg.state_dim + c, B);
  x.topRows(cfg.state_dim) = s;
  x.bottomRows(c) = a;
  const Mat v1 = q1.forward(x);
  const Mat v2 = q2.forward(x);
  Mat d1 = Mat::Zero(1, B), d2 = Mat::Zero(1, B);
  double q_sum = 0, lp_sum = 0;
  if (logp_out) logp_out->assign(static_cast<std::size_t>(B), 0.0);
  for (Eigen::Index b = 0; b < B; ++b) {
    const bool first = v1(0, b) <= v2(0, b);
    q_sum += first ? v1(0, b) : v2(0, b);
    (first ? d1 : d2)(0, b) = -inv_b;
    double lp = 0;
    for (int i = 0; i < c; ++i)
      lp += -0.5 * noise(i, b) * noise(i, b) - ls(i, b) - kHalfLog2Pi - log_jacobian(u(i, b));
    lp_sum += lp;
    if (logp_out) (*logp_out)[static_cast<std::size_t>(b)] = lp;
  }
  const Mat dx1 = q1.backward(d1);
  const Mat dx2 = q2.backward(d2);
  q1.zero_grad();
  q2.zero_grad();
  const Mat dqa = dx1.bottomRows(c) + dx2.bottomRows(c);  // already includes -1/B

  Mat dout = Mat::Zero(out.rows(), B);
  for (Eigen::Index b = 0; b < B; ++b)
    for (int i = 0; i < c; ++i) {
      const double ai = a(i, b);
      const double gu = dqa(i, b) * (1.0 - ai * ai) + alpha * inv_b * 2.0 * ai;
      dout(i, b) = gu;
      const double raw = ls_raw(i, b);
      if (raw > nn::kLogStdMin && raw < nn::kLogStdMax)
        dout(c + i, b) = gu * sigma(i, b) * noise(i, b) - alpha * inv_b;
    }
  if (disc && cfg.disc_heads > 0) {
    const int C = cfg.disc_choices;
    for (Eigen::Index b = 0; b < B; ++b) {
      const double A = (*disc->adv)[static_cast<std::size_t>(b)];
      for (int k = 0; k < cfg.disc_heads; ++k) {
        const Vec lg = out.col(b).segment(2 * c + k * C, C);
        const Vec p = nn::softmax(lg);
        const Vec lp = nn::log_softmax(lg);
        const double H = -p.dot(lp);
        const int pick = (*disc->chosen)[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)];
        for (int j = 0; j < C; ++j) {
          const double onehot = j == pick ? 1.0 : 0.0;
          dout(2 * c + k * C + j, b) =
              inv_b * (-A * (onehot - p[j]) + disc->entropy_coef * p[j] * (lp[j] + H));
        }
      }
    }
  }
  actor.backward(dout);
  return (alpha * lp_sum - q_sum) * inv_b;
}

double SacAgent::actor_loss_and_grad(const Mat& s, const Mat& noise) {
  return actor_pass(actor_, q1_, q2_, cfg_, s, noise, nullptr, nullptr, alpha());
}

double SacAgent::critic_loss_and_grad(const Mat& s, const Mat& a, const std::vector<double>& y,
                                     const std::vector<double>& w, std::vector<double>* td,
                                     std::vector<double>* adv) {
  const auto B = s.cols();
  const Mat x = critic_input(s, a);
  const Mat v1 = q1_.forward(x);
  const Mat v2 = q2_.forward(x);
  Mat d1(1, B), d2(1, B);
  if (td) td->assign(static_cast<std::size_t>(B), 0.0);
  if (adv) adv->assign(static_cast<std::size_t>(B), 0.0);
  double loss = 0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto k = static_cast<std::size_t>(b);
    const double e1 = v1(0, b) - y[k], e2 = v2(0, b) - y[k];
    d1(0, b) = 2.0 * w[k] * e1 / static_cast<double>(B);
    d2(0, b) = 2.0 * w[k] * e2 / static_cast<double>(B);
    loss += w[k] * (e1 * e1 + e2 * e2);
    if (td) (*td)[k] = 0.5 * (std::abs(e1) + std::abs(e2));
    if (adv) (*adv)[k] = y[k] - std::min(v1(0, b), v2(0, b));
  }
  q1_.backward(d1);
  q2_.backward(d2);
  return loss / static_cast<double>(B);
}

double SacAgent::critic_loss(const Mat& s, const Mat& a, const std::vector<double>& y,
                             const std::vector<double>& w) const {
  const Mat x = critic_input(s, a);
  const Mat v1 = q1_.predict(x), v2 = q2_.predict(x);
  double loss = 0;
  for (Eigen::Index b = 0; b < s.cols(); ++b) {
    const auto k = static_cast<std::size_t>(b);
    const double e1 = v1(0, b) - y[k], e2 = v2(0, b) - y[k];
    loss += w[k] * (e1 * e1 + e2 * e2);
  }
  return loss / static_cast<double>(s.cols());
}

double SacAgent::alpha_grad(const std::vector<double>& log_probs, double target_entropy) {
  double s = 0;
  for (double lp : log_probs) s += lp + target_entropy;
  return -s / static_cast<double>(std::max<std::size_t>(log_probs.size(), 1));
}

double SacAgent::alpha_update(const std::vector<double>& log_probs) {
  double loss = 0;
  for (double lp : log_probs) loss += -log_alpha_ * (lp + cfg_.target_entropy);
  loss /= static_cast<double>(std::max<std::size_t>(log_probs.size(), 1));
  const double g = std::clamp(alpha_grad(log_probs, cfg_.target_entropy), -1.0, 1.0);
  Vec p(1), gv(1);
  p[0] = log_alpha_;
  gv[0] = g;
  nn::AdamConfig ac;
  ac.lr = cfg_.lr_alpha;
  nn::adam_update(p, gv, alpha_m_, alpha_v_, ++alpha_t_, ac);
  log_alpha_ = std::clamp(p[0], -10.0, 10.0);
  return loss;
}

void SacAgent::soft_update(double tau) {
  q1t_.soft_update_from(q1_, tau);
  q2t_.soft_update_from(q2_, tau);
}

SacStats SacAgent::update(Rng& rng) {
  SacStats st;
  const auto batch = buffer_.sample(static_cast<std::size_t>(cfg_.batch), rng);
  const auto B = static_cast<Eigen::Index>(batch.idx.size());
  const int c = cfg_.cont_dim;
  std::vector<const Transition*> tr;
  for (auto i : batch.idx) tr.push_back(&buffer_.at(i));
  Mat S(cfg_.state_dim, B), A(c, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    S.col(b) = tr[static_cast<std::size_t>(b)]->s;
    A.col(b) = tr[static_cast<std::size_t>(b)]->a;
  }
  const std::vector<double> y = targets(tr, rng);

  std::vector<double> td, adv;
  const double loss = critic_loss_and_grad(S, A, y, batch.weights, &td, &adv);
  nn::AdamConfig cc;
  cc.lr = cfg_.lr_critic;
  q1_.adam_step(cc);
  q2_.adam_step(cc);
  q1_.zero_grad();
  q2_.zero_grad();
  st.critic_loss = 0.5 * loss;  // per critic
  buffer_.update_priorities(batch.idx, td);

  // Advantages for the discrete heads, standardized over the batch.
  double m = 0, v = 0;
  for (double a : adv) m += a;
  m /= static_cast<double>(B);
  for (double a : adv) v += (a - m) * (a - m);
  const double sd = std::sqrt(v / static_cast<double>(B)) + 1e-8;
  for (double& a : adv) a = (a - m) / sd;
  std::vector<std::vector<int>> chosen;
  for (const auto* t : tr) chosen.push_back(t->disc);
  const DiscTerm dt{&adv, &chosen, cfg_.disc_entropy};

  Mat noise(c, B);
  for (Eigen::Index b = 0; b < B; ++b)
    for (int i = 0; i < c; ++i) noise(i, b) = standard_normal(rng);
  actor_.zero_grad();
  std::vector<double> logp;
  st.actor_loss = actor_pass(actor_, q1_, q2_, cfg_, S, noise,
                             cfg_.disc_heads > 0 ? &dt : nullptr, &logp, alpha());
  nn::AdamConfig ac;
  ac.lr = cfg_.lr_actor;
  actor_.adam_step(ac);
  actor_.zero_grad();

  st.alpha_loss = alpha_update(logp);
  st.alpha = alpha();
  double ent = 0;
  for (double lp : logp) ent -= lp;
  st.entropy = ent / static_cast<double>(B);
  soft_update(cfg_.tau);
  return st;
}

std::string SacAgent::checkpoint_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["actor"] = actor_.to_json();
  j["q1"] = q1_.to_json();
  j["q2"] = q2_.to_json();
  j["q1_target"] = q1t_.to_json();
  j["q2_target"] = q2t_.to_json();
  j["log_alpha"] = log_alpha_;
  j["epsilon"] = eps_.eps;
  return j.dump();
}

void SacAgent::load_checkpoint(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("version", 0) != 1) throw std::runtime_error("checkpoint: unsupported version");
  actor_ = nn::Net::from_json(j.at("actor"));
  q1_ = nn::Net::from_json(j.at("q1"));
  q2_ = nn::Net::from_json(j.at("q2"));
  q1t_ = nn::Net::from_json(j.at("q1_target"));
  q2t_ = nn::Net::from_json(j.at("q2_target"));
  log_alpha_ = j.at("log_alpha").get<double>();
  eps_.eps = j.at("epsilon").get<double>();
}

}  // namespace tccdse
