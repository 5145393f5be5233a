#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tccdse/arch.hpp"
#include "tccdse/model.hpp"
#include "tccdse/partition.hpp"

namespace tccdse {

inline constexpr int kStateDim = 73;
inline constexpr int kSubsetDim = 52;
inline constexpr int kContDim = 30;
inline constexpr int kDiscDim = 4;
inline constexpr int kDiscChoices = 5;  // deltas -2..+2
inline constexpr int kTccBegin = 0;     // continuous TCC parameter group
inline constexpr int kTccEnd = 15;

// Continuous action indices.
namespace act {
enum : int {
  Fetch = 0, Stanum, Vlen, Dmem, Wmem, Imem, Dflit, XrWp, VrWp, XdpNum, VdpNum, Clock,
  PrecisionMode, KvStrategyIdx, KvWindow,                  // 0-14
  FracIn = 15, FracOut, LoadWeight, HopWeight, ImbWeight,  // 15-19
  RhoMatmul = 20, RhoConv, RhoGeneral, OpSpare,            // 20-23
  StreamIn = 24, StreamOut, StreamSpare,                   // 24-26
  SubMatmul = 27, AllReduce, WorkloadSpare                 // 27-29
};
}  // namespace act

using StateVector = std::array<double, kStateDim>;
using SubsetVector = std::array<double, kSubsetDim>;

struct ActionVector {
  std::array<double, kContDim> cont{};
  std::array<int, kDiscDim> disc{};  // mesh dw, dh, sc dx, dy
  bool operator==(const ActionVector&) const = default;
};

struct StateIndexInfo {
  int index;
  std::string group;
  std::string name;
  std::string scheme;  // normalization description
  bool in_subset;
};
const std::vector<StateIndexInfo>& state_table();
const std::vector<int>& subset_indices();
SubsetVector subset(const StateVector& s);

struct ActionIndexInfo {
  int index;
  std::string group;
  std::string name;
  std::string mapping;
};
const std::vector<ActionIndexInfo>& action_table();

struct Constraints {
  double p_max = 5000;  // mW
  double a_max = 100;   // mm^2
  double m_budget = 64.0 * 1024 * 1024;  // bytes
  PpaWeights weights;
  NormRanges ranges;
  double lambda_mem = 1.0;
  double lambda_hazard = 0.5;
  double s_mag = 1.0;
};

enum class Mode { HighPerformance, LowPower };
PpaWeights mode_weights(Mode m);

// Budgets and normalization ranges derived from the node and workload.
Constraints default_constraints(const ProcessNode& node, const Workload& w,
                                Mode mode = Mode::HighPerformance);

std::string to_json(const Constraints& c);
// Missing keys keep the values already in `base`.
Constraints constraints_from_json(const std::string& text, Constraints base);

struct RewardParts {
  double perf = 0;       // alpha * P_norm
  double power = 0;      // beta * P_power
  double area = 0;       // gamma * A_norm
  double feasible = 0;   // bonus
  double violation = 0;
  double memory = 0;
  double hazard = 0;
  double total = 0;
  double v = 0;          // violation magnitude
};

bool feasible(const PpaEstimate& p, const Constraints& c);
RewardParts reward(const PpaEstimate& p, const Constraints& c);

struct ActionBounds {
  int wmem_max_kb = 1024;
};
// Adaptive WMEM upper bound: max(1 MB, 4 * W_total / cores), bank-rounded.
int wmem_upper_kb(double w_total_bytes, int cores);

ActionVector project_action(const ActionVector& a);

// Applies discrete mesh deltas and continuous TCC deltas; tiles are reset to
// a uniform copy of the updated mean tile.
ChipConfig decode_action(const ActionVector& a, const ChipConfig& cfg, const ProcessNode& node,
                         const Workload& w);
PartitionKnobs decode_knobs(const ActionVector& a);

struct EncodeInputs {
  const Workload* workload = nullptr;
  const ChipConfig* cfg = nullptr;
  const ProcessNode* node = nullptr;
  const PartitionKnobs* knobs = nullptr;
  const Evaluation* eval = nullptr;      // evaluation of cfg (placement statistics)
  const PpaEstimate* ppa_obs = nullptr;  // previous estimate; null on the first episode
  const Constraints* constraints = nullptr;
  int node_index = 0;
};
StateVector encode_state(const EncodeInputs& in);

// Index into the 7-node list (3nm -> 0).
int node_index(int nm);

struct EnvStep {
  ChipConfig cfg;
  PartitionKnobs knobs;
  Evaluation eval;
  RewardParts reward;
  bool feasible = false;
  StateVector next_state{};
};

// One configuration per step: decode, place, evaluate, reward.
class DesignEnv {
 public:
  DesignEnv(Workload w, ProcessNode node, Constraints c, ModelOptions opt = {});

  void reset();
  const StateVector& state() const { return state_; }
  const ChipConfig& config() const { return cfg_; }
  const Workload& workload() const { return w_; }
  const ProcessNode& node() const { return node_; }
  const Constraints& constraints() const { return c_; }
  EnvStep step(const ActionVector& a);

 private:
  StateVector encode(const Evaluation& ev, const PpaEstimate* obs) const;

  Workload w_;
  ProcessNode node_;
  Constraints c_;
  ModelOptions opt_;
  ChipConfig cfg_;
  PartitionKnobs knobs_;
  StateVector state_{};
};

ChipConfig initial_config(const Workload& w, const ProcessNode& node);

// Largest near-square mesh (w x w or w x (w + 1)) of default tiles at f_max
// that places the workload within the power and area budgets. Returns the
// initial mesh when nothing fits.
ChipConfig budget_mesh(const Workload& w, const ProcessNode& node, const Constraints& c);

}  // namespace tccdse
