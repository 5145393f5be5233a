#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tccdse/neural.hpp"
#include "tccdse/rng.hpp"

namespace tccdse {

struct Transition {
  nn::Vec s;
  nn::Vec a;              // continuous part
  std::vector<int> disc;  // discrete head choices (index into the 5 deltas)
  double r = 0;
  nn::Vec s2;
  bool done = false;
};

// Binary sum tree over leaf priorities.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity);
  void set(std::size_t i, double p);
  double get(std::size_t i) const { return tree_[leaf0_ + i]; }
  double total() const { return tree_[1]; }
  // Leaf whose cumulative range contains v in [0, total).
  std::size_t find(double v) const;
  std::size_t capacity() const { return cap_; }

 private:
  std::size_t cap_, leaf0_;
  std::vector<double> tree_;
};

class PrioritizedReplay {
 public:
  PrioritizedReplay(std::size_t capacity, double alpha = 0.6, double beta0 = 0.4,
                    double beta_step = 0.001);

  // New entries get the largest priority seen so far (1.0 when empty).
  void store(Transition t);

  struct Batch {
    std::vector<std::size_t> idx;
    std::vector<double> weights;  // IS weights normalized by the batch max
  };
  // Draws with replacement, P(i) = p_i / sum p; anneals beta afterwards.
  Batch sample(std::size_t n, Rng& rng);
  // p = (|delta| + 1e-6)^alpha
  void update_priorities(const std::vector<std::size_t>& idx, const std::vector<double>& td);

  const Transition& at(std::size_t i) const { return data_[i]; }
  double priority(std::size_t i) const { return tree_.get(i); }
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return tree_.capacity(); }
  double beta() const { return beta_; }
  void set_beta(double b) { beta_ = b; }
  double alpha() const { return alpha_; }

 private:
  SumTree tree_;
  std::vector<Transition> data_;
  std::size_t next_ = 0;
  double alpha_, beta_, beta_step_;
  double max_priority_ = 1.0;
};

struct SacConfig {
  int state_dim = 52;
  int cont_dim = 30;
  int disc_heads = 4;
  int disc_choices = 5;
  std::vector<int> hidden{256, 256};
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  double lr_alpha = 3e-4;
  double gamma = 0.99;
  double tau = 0.005;
  int batch = 256;
  double alpha0 = 0.2;
  double target_entropy = -30;
  std::size_t buffer = 100000;
  double per_alpha = 0.6;
  double per_beta0 = 0.4;
  double per_beta_step = 0.001;
  int warmup = 1000;
  double eps0 = 0.5;
  double eps_min = 0.1;
  int eps_horizon = 4000;
  int moe_experts = 1;
  double disc_entropy = 0.01;
};

// Geometric epsilon schedule; decays only once feasible configs exist, and
// ten times slower while the search is stuck.
struct EpsilonSchedule {
  double eps = 0.5, eps_min = 0.1, d = 1.0;
  EpsilonSchedule() = default;
  EpsilonSchedule(double eps0, double eps_min, int horizon);
  static double decay_for(double eps0, double eps_min, int horizon);
  static double stuck_decay(double d) { return 1.0 - (1.0 - d) * 0.1; }
  void step(bool feasible_found, bool stuck);
};

struct PolicyHeads {
  nn::Mat mu;        // cont x B
  nn::Mat log_std;   // clamped, cont x B
  nn::Mat log_std_raw;
  nn::Mat logits;    // (heads * choices) x B
};

struct PolicyAction {
  nn::Vec cont;
  std::vector<int> disc;
  double log_prob = 0;
};

struct SacStats {
  double critic_loss = 0;
  double actor_loss = 0;
  double alpha_loss = 0;
  double alpha = 0;
  double entropy = 0;
};

class SacAgent {
 public:
  SacAgent(const SacConfig& cfg, std::uint64_t seed);

  const SacConfig& config() const { return cfg_; }
  PolicyHeads heads(const nn::Mat& s) const;
  // Stochastic sample, or tanh(mu) and argmax heads when deterministic.
  PolicyAction act(const nn::Vec& s, Rng& rng, bool deterministic = false) const;
  PolicyAction uniform_action(Rng& rng) const;
  // Epsilon-greedy overlay; warmup steps are always uniform.
  PolicyAction select_action(const nn::Vec& s, Rng& rng, long step);

  void store(Transition t) { buffer_.store(std::move(t)); }
  bool ready() const { return buffer_.size() >= static_cast<std::size_t>(std::max(1, cfg_.batch / 4)); }
  // One critic, actor, temperature and target update on a PER batch.
  SacStats update(Rng& rng);

  double alpha() const;
  double log_alpha() const { return log_alpha_; }
  void set_log_alpha(double v) { log_alpha_ = v; }
  // Gradient of the temperature loss with respect to log alpha, before clipping.
  static double alpha_grad(const std::vector<double>& log_probs, double target_entropy);
  // Clipped, clamped temperature step; returns the loss value.
  double alpha_update(const std::vector<double>& log_probs);

  // Clipped double-Q targets y = r + gamma (1 - done) (min Q' - alpha log pi).
  std::vector<double> targets(const std::vector<const Transition*>& batch, Rng& rng) const;

  // Sum of both critics' IS-weighted squared residuals, averaged over the
  // batch; accumulates critic grads. td gets mean |residual|, adv y - min Q.
  double critic_loss_and_grad(const nn::Mat& s, const nn::Mat& a, const std::vector<double>& y,
                              const std::vector<double>& w, std::vector<double>* td = nullptr,
                              std::vector<double>* adv = nullptr);
  double critic_loss(const nn::Mat& s, const nn::Mat& a, const std::vector<double>& y,
                     const std::vector<double>& w) const;
  // Policy loss E[alpha log pi - min Q] on fixed noise; accumulates actor grads.
  double actor_loss_and_grad(const nn::Mat& s, const nn::Mat& noise);
  double actor_loss(const nn::Mat& s, const nn::Mat& noise) const;

  void soft_update(double tau);

  nn::Net& actor() { return actor_; }
  nn::Net& q1() { return q1_; }
  nn::Net& q2() { return q2_; }
  nn::Net& q1_target() { return q1t_; }
  nn::Net& q2_target() { return q2t_; }
  const nn::Net& actor() const { return actor_; }
  PrioritizedReplay& buffer() { return buffer_; }
  const PrioritizedReplay& buffer() const { return buffer_; }
  EpsilonSchedule& epsilon() { return eps_; }
  const EpsilonSchedule& epsilon() const { return eps_; }

  std::string checkpoint_json() const;
  void load_checkpoint(const std::string& text);

 private:
  nn::Mat critic_input(const nn::Mat& s, const nn::Mat& a) const;

  SacConfig cfg_;
  nn::Net actor_, q1_, q2_, q1t_, q2t_;
  double log_alpha_;
  nn::Vec alpha_m_{nn::Vec::Zero(1)}, alpha_v_{nn::Vec::Zero(1)};
  long alpha_t_ = 0;
  PrioritizedReplay buffer_;
  EpsilonSchedule eps_;
};

}  // namespace tccdse
