#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tccdse/arch.hpp"
#include "tccdse/model.hpp"
#include "tccdse/partition.hpp"
#include "tccdse/planner.hpp"
#include "tccdse/rlenv.hpp"
#include "tccdse/sac.hpp"
#include "tccdse/surrogate.hpp"

namespace tccdse {

struct ArchiveEntry {
  ChipConfig cfg;
  PartitionKnobs knobs;
  PpaEstimate ppa;
  long episode = 0;
};

// a dominates b: perf >=, power <=, area <=, at least one strict.
bool dominates(const PpaEstimate& a, const PpaEstimate& b);

class ParetoArchive {
 public:
  // Adds the entry iff no member dominates it; evicts members it dominates.
  // Entries with identical objectives to a member are rejected.
  bool insert(const ArchiveEntry& e);
  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<ArchiveEntry> entries_;
};

// Min-max normalizes each objective over the frontier and returns the index
// minimizing beta*power + gamma*area + alpha*(1 - perf); ties go to lower
// power, then lower area, then lower index.
std::size_t select_final(const std::vector<ArchiveEntry>& frontier, const PpaWeights& w);

enum class Strategy { Sac, Random, Grid };
std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

struct SearchConfig {
  int budget = 500;
  SacConfig sac;
  MpcConfig mpc;
  SurrogateConfig surrogate;
  bool use_mpc = true;
  bool use_surrogate = true;
  int model_batch = 64;    // world model / surrogate minibatch
  int stuck_window = 50;   // episodes without a better score count as stuck
  ModelOptions model;
};

// Warmup and epsilon horizon scaled to a small budget.
SearchConfig default_search_config(int budget);

struct LogRow {
  long episode = 0;
  double epsilon = 0;
  double reward = 0;
  double ppa_score = 0;
  bool feasible = false;
  double alpha = 0;
  double critic_loss = 0;
  double actor_loss = 0;
  std::size_t buffer_size = 0;
  double best_score = std::numeric_limits<double>::infinity();
  double power_mw = 0, perf_gops = 0, area_mm2 = 0, tok_s = 0;
  int cores = 0;
  Binding binding = Binding::Compute;
  bool mpc = false;
  bool screened = false;
  bool new_config = false;
};

struct NodeResult {
  int node_nm = 0;
  Strategy strategy = Strategy::Sac;
  std::vector<LogRow> log;
  ParetoArchive archive;
  bool feasible_found = false;
  ArchiveEntry best;           // selected from the frontier, or best-effort
  double best_score = std::numeric_limits<double>::infinity();
  int feasible_count = 0;      // feasible evaluations
  int unique_configs = 0;
  int unique_feasible = 0;
  long evaluations = 0;
  long wm_forwards = 0;
  Evaluation best_eval;
  ChipConfig heterogeneous;
};

NodeResult run_node(const Workload& w, const ProcessNode& node, const Constraints& c,
                    const SearchConfig& cfg, std::uint64_t seed,
                    Strategy strategy = Strategy::Sac);
NodeResult random_search(const Workload& w, const ProcessNode& node, const Constraints& c,
                         int budget, std::uint64_t seed);
NodeResult grid_search(const Workload& w, const ProcessNode& node, const Constraints& c,
                       int budget, const ModelOptions& opt = {});

struct RunAllResult {
  std::vector<NodeResult> nodes;
  int best = -1;  // index of the lowest best_score, -1 when nothing was feasible
};

// Nodes may run concurrently (jobs > 1); each node uses its own seed stream,
// so results do not depend on the job count.
RunAllResult run_all(const Workload& w, const std::vector<ProcessNode>& nodes,
                     const std::vector<Constraints>& constraints, const SearchConfig& cfg,
                     std::uint64_t seed, int jobs = 1, Strategy strategy = Strategy::Sac);

// True when the best score improved by less than tol over the last `window`
// entries of the best-so-far series.
bool convergence_check(const std::vector<double>& best_scores, int window, double tol);
// First index at which convergence_check becomes true, or -1.
long convergence_episode(const std::vector<double>& best_scores, int window, double tol);

// Short textual key for detecting repeated configurations.
std::string config_key(const ChipConfig& c);

}  // namespace tccdse
