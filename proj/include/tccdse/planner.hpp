#pragma once

#include <functional>
#include <vector>

#include "tccdse/neural.hpp"
#include "tccdse/rng.hpp"

namespace tccdse {

// Residual dynamics model: s' = s + f([s; a]).
class WorldModel {
 public:
  WorldModel(int state_dim, int action_dim, std::uint64_t seed,
             std::vector<int> hidden = {128, 64}, double lr = 1.5e-4);

  nn::Vec predict(const nn::Vec& s, const nn::Vec& a) const;
  nn::Mat predict(const nn::Mat& s, const nn::Mat& a) const;
  // One Adam step on the mean squared error of predicted deltas.
  double train_step(const nn::Mat& s, const nn::Mat& a, const nn::Mat& s2);
  double loss(const nn::Mat& s, const nn::Mat& a, const nn::Mat& s2) const;
  // Accumulates the loss gradient without stepping.
  double loss_and_grad(const nn::Mat& s, const nn::Mat& a, const nn::Mat& s2);
  long steps() const { return steps_; }
  bool trained() const { return steps_ > 0; }

  int state_dim() const { return sd_; }
  int action_dim() const { return ad_; }
  nn::Net& net() { return net_; }
  const nn::Net& net() const { return net_; }

 private:
  nn::Mat input(const nn::Mat& s, const nn::Mat& a) const;
  int sd_, ad_;
  nn::Net net_;
  nn::AdamConfig adam_;
  long steps_ = 0;
};

double surrogate_reward(double perf, double power, double area);

struct MpcConfig {
  int candidates = 64;
  int horizon = 5;
  double sigma = 0.3;
  double gamma = 0.99;
  double eps_gate = 0.15;  // plan only while epsilon is below this
};

// Positions of the (perf, power, area) observation inside the state vector
// the planner sees.
struct PpaSlice {
  int perf = 0, power = 1, area = 2;
};
PpaSlice subset_ppa_slice();

using PolicyMean = std::function<nn::Mat(const nn::Mat&)>;  // batch of states -> actions
using StateReward = std::function<double(const nn::Vec&)>;

struct MpcResult {
  nn::Vec action;
  std::vector<double> returns;
  int best = 0;
  long wm_forwards = 0;
};

// Shoots K noisy first actions around the policy mean, follows the policy
// mean for the rest of the horizon, and returns the best first action.
// Rollout states are clamped to [lo, hi].
MpcResult mpc_plan(const PolicyMean& policy, const WorldModel& wm, const nn::Vec& s,
                   const StateReward& reward, const MpcConfig& cfg, Rng& rng, double lo = 0.0,
                   double hi = 1.0);

// 0.7 * a_mpc + 0.3 * a_sac on [begin, end); a_sac elsewhere.
nn::Vec blend(const nn::Vec& a_mpc, const nn::Vec& a_sac, int begin, int end);

bool mpc_active(double epsilon, const WorldModel& wm, const MpcConfig& cfg);

}  // namespace tccdse
