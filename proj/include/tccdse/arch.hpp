#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tccdse/graph.hpp"
#include "tccdse/kvcache.hpp"
#include "tccdse/procnode.hpp"

namespace tccdse {

// Per-tile parameter ranges.
namespace limits {
inline constexpr int kFetchMin = 1, kFetchMax = 16;
inline constexpr int kStanumMin = 1, kStanumMax = 32;
inline constexpr int kVlenMin = 128, kVlenMax = 2048;
inline constexpr int kDmemMinKb = 16, kDmemMaxKb = 512;
inline constexpr int kWmemMinKb = 256;
inline constexpr int kImemMinKb = 1, kImemMaxKb = 128;
inline constexpr int kPortMin = 1, kPortMax = 16;
inline constexpr int kDflitMin = 64, kDflitMax = 8192;
inline constexpr int kMeshMin = 1, kMeshMax = 64;
inline constexpr int kBankKb = 16;
inline constexpr int kImemGranuleKb = 1;
inline constexpr double kAlphaSpecMin = 1.0, kAlphaSpecMax = 2.0;
}  // namespace limits

struct TccConfig {
  int fetch_size = 4;
  int stanum = 8;
  int vlen_bits = 512;
  int dmem_kb = 64;
  int wmem_kb = 256;
  int imem_kb = 16;
  int xr_wp = 4;
  int vr_wp = 4;
  int xdpnum = 4;
  int vdpnum = 4;

  bool operator==(const TccConfig&) const = default;
};

struct ChipConfig {
  int mesh_w = 1;
  int mesh_h = 1;
  int sc_x = 1;
  int sc_y = 1;
  int dflit_bits = 512;
  double f_clk = 250e6;
  std::vector<TccConfig> tiles{TccConfig{}};
  Precision precision_mode = Precision::FP16;
  int batch = 1;
  KvStrategy kv_strategy = KvStrategy::None;
  int kv_window = 0;  // tokens; 0 means full context
  double alpha_spec = 1.0;

  int n_tiles() const { return mesh_w * mesh_h; }
  bool operator==(const ChipConfig&) const = default;
};

// Replaces every tile with `t`, resizing to mesh_w * mesh_h.
void set_uniform_tiles(ChipConfig& c, const TccConfig& t);
// Mean of each tile field (rounded to the nearest valid value).
TccConfig mean_tile(const ChipConfig& c);

bool is_pow2(int v);
// Throws ValidationError when the config violates a range, quantization
// rule, or the node clock limit. wmem_max_kb is the adaptive upper bound.
void validate(const ChipConfig& c, const ProcessNode& node, int wmem_max_kb);

std::string to_json(const ChipConfig& c);
ChipConfig chip_from_json(const std::string& text);

struct DmemSplit {
  double in = 0, out = 0, scratch = 0;
};
DmemSplit dmem_split(double d_total, double f_in, double f_out);

double bw_eff(double bw_peak, double volume, double cycles, double f_clk);
double mem_pressure(double w_used, double w_alloc, double d_used, double d_alloc);
double bisection_bw(int M, int N, double dflit_bits, double f_clk);
double avg_hops(int M, int N);
double noc_latency(int M, int N, double hop_lat, double setup_lat);

// Effective tensor-multiplier count of one tile: min(tm, vlen/16), scaled by
// 16 / max(mode_bits, workload_bits) for narrower datapaths.
double tile_multipliers(const TccConfig& t, double tm_fp16, int precision_bits);
// Logic complexity of a tile relative to the default tile (1.0).
double logic_factor(const TccConfig& t);

double compute_ceiling(const ChipConfig& cfg, double flops_tok, double eta_par, double tm_fp16,
                       int precision_bits);
// Sum of per-tile effective bandwidth over bytes_per_token.
double memory_ceiling(const std::vector<double>& tile_bw, double bytes_per_token);
// Returns +inf when there is no cross-tile traffic.
double noc_ceiling(const ChipConfig& cfg, double cross_tile_bytes_per_token);

enum class Binding { Compute, Memory, NoC };
std::string_view to_string(Binding b);

struct ThroughputResult {
  double tok_s = 0;
  Binding binding = Binding::Compute;
};
// Ties resolve Compute < Memory < NoC.
ThroughputResult binding_min(double compute, double memory, double noc);

struct PowerBreakdown {
  double compute = 0, sram = 0, rom_read = 0, noc = 0, leakage = 0;
  double total() const { return compute + sram + rom_read + noc + leakage; }
};

struct PowerInputs {
  double w_touched_bytes = 0;
  double cross_bytes_per_token = 0;
  double tok_s = 0;
};
PowerBreakdown power_model(const ChipConfig& cfg, const ProcessNode& node, const PowerInputs& in);

double area_model(const ChipConfig& cfg, const ProcessNode& node);

struct PpaEstimate {
  PowerBreakdown breakdown;
  double power_mw = 0;
  double perf_gops = 0;   // delivered
  double peak_gops = 0;
  double area_mm2 = 0;
  double tok_s = 0;
  double compute_ceiling = 0, memory_ceiling = 0, noc_ceiling = 0;
  Binding binding = Binding::Compute;
  double score = 0;
  bool feasible = false;
  bool placed = false;          // false when the weights could not be placed
  double mem_used_bytes = 0;    // allocated on-chip memory
  double mem_deficit_bytes = 0; // weight bytes without WMEM + KV spill
  double hazard_score = 0;
  double eta_par = 0;
  int cores = 0;
};

struct NormRanges {
  double perf_min = 0, perf_max = 1;
  double power_min = 0, power_max = 1;
  double area_min = 0, area_max = 1;
};

struct PpaWeights {
  double perf = 0.4, power = 0.4, area = 0.2;
};

struct NormalizedWeights {
  double alpha, beta, gamma;
};
NormalizedWeights normalize_weights(const PpaWeights& w);

struct NormalizedMetrics {
  double perf, power, area;
};
// Min-max normalized metrics clipped to [0, 1].
NormalizedMetrics normalize(const PpaEstimate& p, const NormRanges& r);

double ppa_score(const PpaEstimate& p, const NormRanges& r, const PpaWeights& w);

std::string ppa_csv_header();
std::string ppa_csv_row(int node_nm, const ChipConfig& c, const PpaEstimate& p);

}  // namespace tccdse
