#pragma once

#include <vector>

#include "tccdse/arch.hpp"
#include "tccdse/graph.hpp"
#include "tccdse/kvcache.hpp"
#include "tccdse/partition.hpp"
#include "tccdse/procnode.hpp"

namespace tccdse {

struct Workload {
  OperatorGraph graph;
  WorkloadFeatures features;
  ModelShape shape;
  double phi_decode = 0.97;
  double flops_per_token = 0;
  int precision_bits = 16;
  int elem_bytes = 2;
};

// Shape falls back to a single-layer guess from the graph when absent.
Workload make_workload(OperatorGraph g, double phi_decode = 0.97);

struct ModelOptions {
  double tm_fp16 = 64;
  std::int64_t kv_page_bytes = 4096;
};

KvSpec kv_spec_for(const Workload& w, const ChipConfig& cfg, const ModelOptions& opt = {});

struct HazardStats {
  double raw = 0, war = 0, waw = 0, total = 0;
  // Per-tile hazard density aggregates.
  double tile_mean = 0, tile_max = 0, tile_std = 0, tile_hot = 0;
};

HazardStats hazard_stats(const OperatorGraph& g, const Placement& p);

struct Evaluation {
  PpaEstimate ppa;
  Placement placement;
  KvFootprint kv;
  KvDmemReport kv_dmem;
  HazardStats hazards;
  std::vector<double> tile_bw;
  double bytes_per_token = 0;
  double cross_bytes_per_token = 0;
  double mem_pressure = 0;  // mean over tiles
  double comm_ratio = 0;
};

// Full analytical evaluation. Never throws for an unplaceable config: the
// result carries placed = false, zero throughput and the WMEM deficit.
Evaluation evaluate(const Workload& w, const ChipConfig& cfg, const ProcessNode& node,
                    const PartitionKnobs& knobs, const ModelOptions& opt = {});

// Activation bytes moved per token (2 * hidden * layers * elem).
double activation_bytes_per_token(const Workload& w);

// Smallest near-square mesh whose minimum WMEM covers the weights.
std::pair<int, int> initial_mesh(const Workload& w);

}  // namespace tccdse
