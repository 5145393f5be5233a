#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tccdse/arch.hpp"
#include "tccdse/graph.hpp"

namespace tccdse {

class InfeasiblePlacement : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScoreWeights {
  double load = 1.0, hop = 0.5, imbalance = 0.5, centrality = 0.25;
};

// Decoded partitioning controls (operator split ratios, DMEM fractions,
// streaming and intra-op traffic knobs).
struct PartitionKnobs {
  double rho_matmul = 0.3;
  double rho_conv = 0.3;
  double rho_general = 0.3;
  double f_in = 0.3;
  double f_out = 0.3;
  double stream_in = 0.0;
  double stream_out = 0.0;
  double sub_matmul = 0.0;   // share of splits along the reduction dimension
  double allreduce = 0.5;    // share of all-reduce traffic that crosses the NoC
  ScoreWeights weights;
};

struct Share {
  int tile = 0;
  double frac = 0;
};

struct LoadStats {
  double variance = 0;       // of per-tile load normalized by the mean
  double max_min_ratio = 1;  // max / min, min floored at 1% of the mean
  double balance = 1;        // mean / max
  double cv = 0;
};

struct Placement {
  int mesh_w = 1, mesh_h = 1;
  std::vector<std::vector<Share>> ops;  // indexed like graph nodes
  std::vector<double> load;             // flops per tile
  std::vector<double> wmem_used;        // bytes per tile
  std::vector<double> dmem_used;        // activation working set per tile (bytes)
  double cross_bytes = 0;               // whole sequence
  double intra_op_bytes = 0;            // split fan-out / all-reduce part of cross_bytes
  LoadStats stats;

  int n_tiles() const { return mesh_w * mesh_h; }
};

double partition_ratio(double base, double delta);
int target_cores(double rho, int n_total);

struct ScoreContext {
  int mesh_w = 1, mesh_h = 1;
  std::vector<double> load;       // current per-tile flops
  double mean_target = 1;         // total flops / n_tiles
  double max_load = 0;
  std::vector<double> hop_x, hop_y;  // per-column / per-row mean distance to producers
  bool has_producers = false;
};

// Builds the hop tables for an op from the placements of its producers.
ScoreContext make_score_context(int mesh_w, int mesh_h, const std::vector<double>& load,
                                double total_flops,
                                const std::vector<const std::vector<Share>*>& producers);

double placement_score(int tile, double share_flops, const ScoreContext& ctx,
                       const ScoreWeights& w);

// Per-tile WMEM capacity comes from cfg.tiles.
Placement place(const OperatorGraph& g, const ChipConfig& cfg, const PartitionKnobs& k);

LoadStats load_stats(const std::vector<double>& load);

// Cross-tile bytes over the whole sequence, from edge placements only.
double edge_cross_bytes(const OperatorGraph& g, const Placement& p);

ChipConfig derive_heterogeneous(const ChipConfig& cfg, const Placement& p);

// (max - min) / max of a per-tile field.
double variation(const std::vector<double>& v);

struct RegionStat {
  double wmem_mean = 0, wmem_std = 0;
  double dflit_mean = 0, dflit_std = 0;
  double fetch_mean = 0, fetch_std = 0;
  int tiles = 0;
};

struct RegionReport {
  std::array<RegionStat, 9> regions{};   // 3x3 blocks, row-major
  std::vector<double> wmem_sorted;       // KB, ascending (CDF support)
  std::vector<double> hist_edges;        // KB
  std::vector<int> hist_counts;
  double p50 = 0, p90 = 0;
  double gini = 0;
};

RegionReport region_stats(const ChipConfig& cfg, int hist_bins = 10);

// Gini coefficient from the Lorenz curve of the sorted values.
double gini(std::vector<double> v);

// Per-tile config artifact: one object per tile.
std::string tiles_json(const ChipConfig& cfg);

}  // namespace tccdse
