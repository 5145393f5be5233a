#include "tccdse/rlenv.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace tccdse {

namespace {

double clip01(double v) { return std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : (v > 0 ? 1.0 : 0.0); }
double lin(double v, double lo, double hi) { return hi > lo ? clip01((v - lo) / (hi - lo)) : 0.0; }
double log2n(double v, double lo, double hi) {
  return lin(std::log2(std::max(v, 1e-12)), std::log2(lo), std::log2(hi));
}
double squash(double v) { return v > 0 ? v / (1.0 + v) : 0.0; }

bool dropped(int i) {
  return (i >= 33 && i <= 36) || (i >= 41 && i <= 44) || (i >= 46 && i <= 49) ||
         (i >= 59 && i <= 64) || (i >= 67 && i <= 69);
}

std::vector<StateIndexInfo> build_state_table() {
  struct R {
    const char* group;
    const char* name;
    const char* scheme;
  };
  static const R rows[kStateDim] = {
      {"workload", "instruction_count", "log10(1+x)/12"},
      {"workload", "ilp", "raw [0,1]"},
      {"workload", "memory_intensity", "raw [0,1]"},
      {"workload", "vector_util", "raw [0,1]"},
      {"workload", "matmul_ratio", "raw [0,1]"},
      {"config", "mesh_w", "(x-1)/63"},
      {"config", "mesh_h", "(x-1)/63"},
      {"config", "cores", "x/4096"},
      {"config", "sc_x", "(x-1)/63"},
      {"config", "sc_y", "(x-1)/63"},
      {"config", "fetch_size", "(x-1)/15"},
      {"config", "stanum", "(x-1)/31"},
      {"config", "vlen_bits", "log2 over [128,2048]"},
      {"config", "dmem_kb", "(x-16)/496"},
      {"config", "wmem_kb", "(x-256)/(wmem_max-256)"},
      {"config", "imem_kb", "(x-1)/127"},
      {"config", "dflit_bits", "log2 over [64,8192]"},
      {"config", "xr_wp", "(x-1)/15"},
      {"config", "vr_wp", "(x-1)/15"},
      {"config", "xdpnum", "(x-1)/15"},
      {"config", "vdpnum", "(x-1)/15"},
      {"config", "precision_mode", "index/5"},
      {"config", "node", "index/6 (3nm=0)"},
      {"config", "node_f_max", "f_max/1GHz"},
      {"config", "node_area_scale", "raw"},
      {"config", "weight_fill", "W_total / total WMEM, clipped"},
      {"partition", "f_in", "raw"},
      {"partition", "f_out", "raw"},
      {"partition", "f_scratch", "1-f_in-f_out"},
      {"load", "load_variance", "x/(1+x)"},
      {"load", "load_max_min", "1-1/ratio"},
      {"load", "load_balance", "mean/max"},
      {"load", "mem_pressure", "x/1.5, clipped"},
      {"op_partition", "rho_matmul", "raw"},
      {"op_partition", "rho_conv", "raw"},
      {"op_partition", "rho_general", "raw"},
      {"op_partition", "eta_par", "raw"},
      {"hazard", "raw", "raw [0,1]"},
      {"hazard", "war", "raw [0,1]"},
      {"hazard", "waw", "raw [0,1]"},
      {"hazard", "total", "raw [0,1]"},
      {"tile_hazard", "mean", "raw"},
      {"tile_hazard", "max", "raw"},
      {"tile_hazard", "std", "raw, clipped"},
      {"tile_hazard", "hot_fraction", "raw"},
      {"frequency", "f_clk", "f/f_max"},
      {"streaming", "stream_in", "raw"},
      {"streaming", "stream_out", "raw"},
      {"streaming", "intra_op_share", "intra-op / cross bytes"},
      {"streaming", "comm_ratio", "x/(1+x)"},
      {"ppa_obs", "perf", "min-max, clipped"},
      {"ppa_obs", "power", "min-max, clipped"},
      {"ppa_obs", "area", "min-max, clipped"},
      {"ppa_obs", "tok_s", "log10(1+x)/7"},
      {"ppa_obs", "efficiency", "perf/(perf+power)"},
      {"workload_partition", "active_fraction", "busy tiles / tiles"},
      {"workload_partition", "load_cv", "x/(1+x)"},
      {"workload_partition", "sub_matmul", "raw"},
      {"workload_partition", "allreduce", "raw"},
      {"precision", "fp32", "node share"},
      {"precision", "fp16", "node share"},
      {"precision", "bf16", "node share"},
      {"precision", "fp8", "node share"},
      {"precision", "int8", "node share"},
      {"precision", "mixed", "node share"},
      {"instruction", "scalar", "share"},
      {"instruction", "vector", "share"},
      {"sc_topology", "active_cores", "x/4096"},
      {"sc_topology", "avg_hops", "x/42.67"},
      {"sc_topology", "noc_latency", "cycles/(max hops*hop+setup)"},
      {"llm", "batch", "log2(x)/10"},
      {"llm", "kv_strategy", "index/3"},
      {"llm", "kv_compression", "1-1/kappa"},
  };
  std::vector<StateIndexInfo> t;
  for (int i = 0; i < kStateDim; ++i)
    t.push_back({i, rows[i].group, rows[i].name, rows[i].scheme, !dropped(i)});
  return t;
}

int bank_ceil(double kb) {
  return static_cast<int>(std::ceil(kb / limits::kBankKb - 1e-9)) * limits::kBankKb;
}

int step_int(int v, double a, int lo, int hi) {
  return std::clamp(static_cast<int>(std::lround(v + a * (hi - lo))), lo, hi);
}

int step_pow2(int v, double a, int lo, int hi) {
  const int elo = static_cast<int>(std::lround(std::log2(lo)));
  const int ehi = static_cast<int>(std::lround(std::log2(hi)));
  const double e = std::log2(static_cast<double>(v));
  return 1 << std::clamp(static_cast<int>(std::lround(e + a * (ehi - elo))), elo, ehi);
}

int step_bank(int v, double a, int lo, int hi) {
  const double raw = v + a * (hi - lo);
  const int q = static_cast<int>(std::lround(raw / limits::kBankKb)) * limits::kBankKb;
  return std::clamp(q, lo, hi);
}

constexpr KvStrategy kKvOrder[] = {KvStrategy::None, KvStrategy::Quantized, KvStrategy::Windowed,
                                   KvStrategy::Paged};

int kv_index(KvStrategy s) {
  for (int i = 0; i < 4; ++i)
    if (kKvOrder[i] == s) return i;
  return 0;
}

}  // namespace

const std::vector<StateIndexInfo>& state_table() {
  static const auto t = build_state_table();
  return t;
}

const std::vector<int>& subset_indices() {
  static const std::vector<int> idx = [] {
    std::vector<int> v;
    for (int i = 0; i < kStateDim; ++i)
      if (!dropped(i)) v.push_back(i);
    return v;
  }();
  return idx;
}

SubsetVector subset(const StateVector& s) {
  SubsetVector out{};
  const auto& idx = subset_indices();
  for (int i = 0; i < kSubsetDim; ++i) out[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
  return out;
}

const std::vector<ActionIndexInfo>& action_table() {
  static const std::vector<ActionIndexInfo> t = {
      {0, "tcc", "fetch_size", "delta * 15, round, clamp [1,16]"},
      {1, "tcc", "stanum", "delta * 31, round, clamp [1,32]"},
      {2, "tcc", "vlen_bits", "log2 delta * 4, clamp [128,2048]"},
      {3, "tcc", "dmem_kb", "delta * 496, 16 KB banks, clamp [16,512]"},
      {4, "tcc", "wmem_kb", "delta * (wmem_max-256), 16 KB banks"},
      {5, "tcc", "imem_kb", "delta * 127, 1 KB steps, clamp [1,128]"},
      {6, "tcc", "dflit_bits", "log2 delta * 7, clamp [64,8192]"},
      {7, "tcc", "xr_wp", "delta * 15, clamp [1,16]"},
      {8, "tcc", "vr_wp", "delta * 15, clamp [1,16]"},
      {9, "tcc", "xdpnum", "delta * 15, clamp [1,16]"},
      {10, "tcc", "vdpnum", "delta * 15, clamp [1,16]"},
      {11, "tcc", "f_clk", "delta * f_max, clamp [f_max/100, f_max]"},
      {12, "tcc", "precision_mode", "index delta * 5"},
      {13, "tcc", "kv_strategy", "index delta * 3"},
      {14, "tcc", "kv_window", "delta * (seq_len-1), clamp [1,seq_len]"},
      {15, "mem_load", "f_in", "0.25*(a+1)"},
      {16, "mem_load", "f_out", "0.25*(a+1)"},
      {17, "mem_load", "w_load", "1.0 * 2^a"},
      {18, "mem_load", "w_hop", "0.5 * 2^a"},
      {19, "mem_load", "w_imbalance", "0.5 * 2^a"},
      {20, "op_partition", "rho_matmul", "clip(0.3+a, 0, 1)"},
      {21, "op_partition", "rho_conv", "clip(0.3+a, 0, 1)"},
      {22, "op_partition", "rho_general", "clip(0.3+a, 0, 1)"},
      {23, "op_partition", "reserved", "ignored"},
      {24, "streaming", "stream_in", "(a+1)/2"},
      {25, "streaming", "stream_out", "(a+1)/2"},
      {26, "streaming", "reserved", "ignored"},
      {27, "workload", "sub_matmul", "(a+1)/2"},
      {28, "workload", "allreduce", "(a+1)/2"},
      {29, "workload", "reserved", "ignored"},
      {30, "discrete", "mesh_w", "delta in {-2..2}, clamp [1,64]"},
      {31, "discrete", "mesh_h", "delta in {-2..2}, clamp [1,64]"},
      {32, "discrete", "sc_x", "delta in {-2..2}, clamp [1,mesh_w]"},
      {33, "discrete", "sc_y", "delta in {-2..2}, clamp [1,mesh_h]"},
  };
  return t;
}

PpaWeights mode_weights(Mode m) {
  return m == Mode::HighPerformance ? PpaWeights{0.4, 0.4, 0.2} : PpaWeights{0.2, 0.6, 0.2};
}

Constraints default_constraints(const ProcessNode& node, const Workload& w, Mode mode) {
  Constraints c;
  c.weights = mode_weights(mode);
  c.m_budget = std::max(4.0 * static_cast<double>(w.graph.w_total), 64.0 * 1024 * 1024);
  // Reference core: default tile at the node's top clock.
  ChipConfig one;
  one.f_clk = node.f_clk_max;
  const double p_core = power_model(one, node, {}).total();
  const double a_core = area_model(one, node);
  const double n_ref = std::clamp(std::min(c.p_max / p_core, c.a_max / a_core), 1.0, 4096.0);
  const double per_core =
      tile_multipliers(TccConfig{}, 64, w.precision_bits) * 2.0 * node.f_clk_max / 1e9;
  c.ranges.perf_min = 0;
  c.ranges.perf_max = n_ref * per_core;
  c.ranges.power_min = 0;
  c.ranges.power_max = 2.0 * c.p_max;
  c.ranges.area_min = 0;
  c.ranges.area_max = 2.0 * c.a_max;
  return c;
}

std::string to_json(const Constraints& c) {
  nlohmann::json j;
  j["p_max_mw"] = c.p_max;
  j["a_max_mm2"] = c.a_max;
  j["m_budget_bytes"] = c.m_budget;
  j["weights"] = {{"perf", c.weights.perf}, {"power", c.weights.power}, {"area", c.weights.area}};
  j["ranges"] = {{"perf_min", c.ranges.perf_min},   {"perf_max", c.ranges.perf_max},
                 {"power_min", c.ranges.power_min}, {"power_max", c.ranges.power_max},
                 {"area_min", c.ranges.area_min},   {"area_max", c.ranges.area_max}};
  j["lambda_mem"] = c.lambda_mem;
  j["lambda_hazard"] = c.lambda_hazard;
  j["s_mag"] = c.s_mag;
  return j.dump(2);
}

Constraints constraints_from_json(const std::string& text, Constraints c) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("constraints: {}", e.what()));
  }
  auto get = [](const nlohmann::json& o, const char* k, double& dst) {
    if (o.contains(k)) {
      if (!o[k].is_number()) throw ParseError(fmt::format("constraints: '{}' must be a number", k));
      dst = o[k].get<double>();
    }
  };
  bool budget_changed = j.contains("p_max_mw") || j.contains("a_max_mm2");
  get(j, "p_max_mw", c.p_max);
  get(j, "a_max_mm2", c.a_max);
  get(j, "m_budget_bytes", c.m_budget);
  get(j, "lambda_mem", c.lambda_mem);
  get(j, "lambda_hazard", c.lambda_hazard);
  get(j, "s_mag", c.s_mag);
  if (j.contains("weights")) {
    get(j["weights"], "perf", c.weights.perf);
    get(j["weights"], "power", c.weights.power);
    get(j["weights"], "area", c.weights.area);
  }
  if (budget_changed) {
    c.ranges.power_max = 2.0 * c.p_max;
    c.ranges.area_max = 2.0 * c.a_max;
  }
  if (j.contains("ranges")) {
    const auto& r = j["ranges"];
    get(r, "perf_min", c.ranges.perf_min);
    get(r, "perf_max", c.ranges.perf_max);
    get(r, "power_min", c.ranges.power_min);
    get(r, "power_max", c.ranges.power_max);
    get(r, "area_min", c.ranges.area_min);
    get(r, "area_max", c.ranges.area_max);
  }
  if (!(c.p_max > 0 && c.a_max > 0 && c.m_budget > 0))
    throw ValidationError("constraint budgets must be > 0");
  normalize_weights(c.weights);
  return c;
}

bool feasible(const PpaEstimate& p, const Constraints& c) {
  return p.placed && p.power_mw <= c.p_max && p.area_mm2 <= c.a_max &&
         p.mem_used_bytes <= c.m_budget && p.mem_deficit_bytes <= 0.0;
}

RewardParts reward(const PpaEstimate& p, const Constraints& c) {
  const auto k = normalize_weights(c.weights);
  const auto m = normalize(p, c.ranges);
  RewardParts r;
  r.perf = k.alpha * m.perf;
  r.power = k.beta * m.power;
  r.area = k.gamma * m.area;
  if (feasible(p, c)) {
    const double margin = (c.p_max - p.power_mw) / c.p_max;
    r.feasible = c.s_mag * (1.0 + margin);
  }
  r.v = std::max({0.0, (p.power_mw - c.p_max) / c.p_max, (p.area_mm2 - c.a_max) / c.a_max});
  if (r.v > 0) r.violation = c.s_mag * (1.0 + r.v) * r.v * r.v;
  r.memory = c.lambda_mem *
             (std::max(0.0, p.mem_used_bytes - c.m_budget) + p.mem_deficit_bytes) / c.m_budget;
  r.hazard = c.lambda_hazard * p.hazard_score;
  r.total = r.perf - r.power - r.area + r.feasible - r.violation - r.memory - r.hazard;
  return r;
}

int wmem_upper_kb(double w_total_bytes, int cores) {
  const double per = 4.0 * w_total_bytes / std::max(cores, 1) / 1024.0;
  return std::max(1024, bank_ceil(per));
}

ActionVector project_action(const ActionVector& a) {
  ActionVector p = a;
  for (auto& v : p.cont) v = std::isfinite(v) ? std::clamp(v, -1.0, 1.0) : 0.0;
  for (auto& d : p.disc) d = std::clamp(d, -2, 2);
  return p;
}

ChipConfig decode_action(const ActionVector& a_in, const ChipConfig& cfg, const ProcessNode& node,
                         const Workload& w) {
  using namespace limits;
  const ActionVector a = project_action(a_in);
  const auto& x = a.cont;
  ChipConfig c = cfg;
  c.mesh_w = std::clamp(cfg.mesh_w + a.disc[0], kMeshMin, kMeshMax);
  c.mesh_h = std::clamp(cfg.mesh_h + a.disc[1], kMeshMin, kMeshMax);
  c.sc_x = std::clamp(cfg.sc_x + a.disc[2], 1, c.mesh_w);
  c.sc_y = std::clamp(cfg.sc_y + a.disc[3], 1, c.mesh_h);

  const int wmax = wmem_upper_kb(static_cast<double>(w.graph.w_total), c.n_tiles());
  TccConfig t = mean_tile(cfg);
  t.fetch_size = step_int(t.fetch_size, x[act::Fetch], kFetchMin, kFetchMax);
  t.stanum = step_int(t.stanum, x[act::Stanum], kStanumMin, kStanumMax);
  t.vlen_bits = step_pow2(t.vlen_bits, x[act::Vlen], kVlenMin, kVlenMax);
  t.dmem_kb = step_bank(t.dmem_kb, x[act::Dmem], kDmemMinKb, kDmemMaxKb);
  t.wmem_kb = step_bank(std::min(t.wmem_kb, wmax), x[act::Wmem], kWmemMinKb, wmax);
  t.imem_kb = step_int(t.imem_kb, x[act::Imem], kImemMinKb, kImemMaxKb);
  t.xr_wp = step_int(t.xr_wp, x[act::XrWp], kPortMin, kPortMax);
  t.vr_wp = step_int(t.vr_wp, x[act::VrWp], kPortMin, kPortMax);
  t.xdpnum = step_int(t.xdpnum, x[act::XdpNum], kPortMin, kPortMax);
  t.vdpnum = step_int(t.vdpnum, x[act::VdpNum], kPortMin, kPortMax);
  set_uniform_tiles(c, t);

  c.dflit_bits = step_pow2(cfg.dflit_bits, x[act::Dflit], kDflitMin, kDflitMax);
  const double fmax = node.f_clk_max;
  c.f_clk = std::clamp(std::min(cfg.f_clk, fmax) + x[act::Clock] * fmax, fmax / 100.0, fmax);
  c.precision_mode = static_cast<Precision>(
      step_int(static_cast<int>(cfg.precision_mode), x[act::PrecisionMode], 0, kNumPrecisions - 1));
  c.kv_strategy = kKvOrder[step_int(kv_index(cfg.kv_strategy), x[act::KvStrategyIdx], 0, 3)];
  const int L = static_cast<int>(std::max<std::int64_t>(w.shape.seq_len, 1));
  const int win = cfg.kv_window > 0 ? std::min(cfg.kv_window, L) : L;
  const int nw = L > 1 ? step_int(win, x[act::KvWindow], 1, L) : 1;
  c.kv_window = nw >= L ? 0 : nw;
  return c;
}

PartitionKnobs decode_knobs(const ActionVector& a_in) {
  const auto x = project_action(a_in).cont;
  PartitionKnobs k;
  k.f_in = 0.25 * (x[act::FracIn] + 1.0);
  k.f_out = 0.25 * (x[act::FracOut] + 1.0);
  k.weights.load = 1.0 * std::exp2(x[act::LoadWeight]);
  k.weights.hop = 0.5 * std::exp2(x[act::HopWeight]);
  k.weights.imbalance = 0.5 * std::exp2(x[act::ImbWeight]);
  k.rho_matmul = partition_ratio(0.3, x[act::RhoMatmul]);
  k.rho_conv = partition_ratio(0.3, x[act::RhoConv]);
  k.rho_general = partition_ratio(0.3, x[act::RhoGeneral]);
  k.stream_in = 0.5 * (x[act::StreamIn] + 1.0);
  k.stream_out = 0.5 * (x[act::StreamOut] + 1.0);
  k.sub_matmul = 0.5 * (x[act::SubMatmul] + 1.0);
  k.allreduce = 0.5 * (x[act::AllReduce] + 1.0);
  return k;
}

int node_index(int nm) {
  const auto& v = valid_nodes();
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (std::abs(v[static_cast<std::size_t>(i)] - nm) < std::abs(v[static_cast<std::size_t>(best)] - nm)) best = i;
  return best;
}

StateVector encode_state(const EncodeInputs& in) {
  if (!in.workload || !in.cfg || !in.node || !in.knobs || !in.constraints)
    throw ValidationError("encode_state: missing input");
  const Workload& w = *in.workload;
  const ChipConfig& c = *in.cfg;
  const ProcessNode& node = *in.node;
  const PartitionKnobs& k = *in.knobs;
  StateVector s{};
  const auto& f = w.features;
  s[0] = clip01(std::log10(1.0 + f.instruction_count) / 12.0);
  s[1] = clip01(f.ilp);
  s[2] = clip01(f.memory_intensity);
  s[3] = clip01(f.vector_util);
  s[4] = clip01(f.matmul_ratio);

  const TccConfig t = mean_tile(c);
  const int n = c.n_tiles();
  const int wmax = wmem_upper_kb(static_cast<double>(w.graph.w_total), n);
  s[5] = lin(c.mesh_w, 1, 64);
  s[6] = lin(c.mesh_h, 1, 64);
  s[7] = lin(n, 0, 4096);
  s[8] = lin(c.sc_x, 1, 64);
  s[9] = lin(c.sc_y, 1, 64);
  s[10] = lin(t.fetch_size, 1, 16);
  s[11] = lin(t.stanum, 1, 32);
  s[12] = log2n(t.vlen_bits, 128, 2048);
  s[13] = lin(t.dmem_kb, 16, 512);
  s[14] = lin(t.wmem_kb, 256, wmax);
  s[15] = lin(t.imem_kb, 1, 128);
  s[16] = log2n(c.dflit_bits, 64, 8192);
  s[17] = lin(t.xr_wp, 1, 16);
  s[18] = lin(t.vr_wp, 1, 16);
  s[19] = lin(t.xdpnum, 1, 16);
  s[20] = lin(t.vdpnum, 1, 16);
  s[21] = static_cast<double>(static_cast<int>(c.precision_mode)) / (kNumPrecisions - 1);
  s[22] = in.node_index / 6.0;
  s[23] = clip01(node.f_clk_max / 1e9);
  s[24] = clip01(node.a_scale);
  double wcap = 0;
  for (const auto& tile : c.tiles) wcap += tile.wmem_kb * 1024.0;
  s[25] = wcap > 0 ? clip01(static_cast<double>(w.graph.w_total) / wcap) : 1.0;

  s[26] = clip01(k.f_in);
  s[27] = clip01(k.f_out);
  s[28] = clip01(1.0 - k.f_in - k.f_out);

  const Evaluation* ev = in.eval;
  const bool placed = ev && ev->ppa.placed;
  if (placed) {
    const auto& st = ev->placement.stats;
    s[29] = squash(st.variance);
    s[30] = clip01(1.0 - 1.0 / std::max(st.max_min_ratio, 1.0));
    s[31] = clip01(st.balance);
    s[32] = clip01(ev->mem_pressure / 1.5);
    s[36] = clip01(ev->ppa.eta_par);
    s[37] = clip01(ev->hazards.raw);
    s[38] = clip01(ev->hazards.war);
    s[39] = clip01(ev->hazards.waw);
    s[40] = clip01(ev->hazards.total);
    s[41] = clip01(ev->hazards.tile_mean);
    s[42] = clip01(ev->hazards.tile_max);
    s[43] = clip01(ev->hazards.tile_std * 2.0);
    s[44] = clip01(ev->hazards.tile_hot);
    const auto& pl = ev->placement;
    s[48] = pl.cross_bytes > 0 ? clip01(pl.intra_op_bytes / pl.cross_bytes) : 0.0;
    const double busy = static_cast<double>(
        std::count_if(pl.load.begin(), pl.load.end(), [](double l) { return l > 0; }));
    s[55] = clip01(busy / std::max(n, 1));
    s[56] = squash(st.cv);
    s[67] = clip01(busy / 4096.0);
  }
  s[33] = clip01(k.rho_matmul);
  s[34] = clip01(k.rho_conv);
  s[35] = clip01(k.rho_general);
  s[45] = clip01(c.f_clk / node.f_clk_max);
  s[46] = clip01(k.stream_in);
  s[47] = clip01(k.stream_out);
  s[49] = squash(ev ? ev->comm_ratio : 0.0);

  if (in.ppa_obs) {
    const auto m = normalize(*in.ppa_obs, in.constraints->ranges);
    s[50] = m.perf;
    s[51] = m.power;
    s[52] = m.area;
    s[53] = clip01(std::log10(1.0 + in.ppa_obs->tok_s) / 7.0);
    s[54] = m.perf + m.power > 0 ? m.perf / (m.perf + m.power) : 0.0;
  }
  s[57] = clip01(k.sub_matmul);
  s[58] = clip01(k.allreduce);
  for (int i = 0; i < kNumPrecisions; ++i)
    s[static_cast<std::size_t>(59 + i)] = clip01(f.precision_dist[static_cast<std::size_t>(i)]);
  s[65] = clip01(f.scalar_vector_ratio[0]);
  s[66] = clip01(f.scalar_vector_ratio[1]);
  s[68] = clip01(avg_hops(c.mesh_w, c.mesh_h) / (128.0 / 3.0));
  const double lat_max = node.hop_latency * 128.0 / 3.0 + node.setup_latency;
  s[69] = clip01(noc_latency(c.mesh_w, c.mesh_h, node.hop_latency, node.setup_latency) / lat_max);
  s[70] = clip01(std::log2(std::max(c.batch, 1)) / 10.0);
  s[71] = kv_index(c.kv_strategy) / 3.0;
  s[72] = ev && ev->kv.kappa > 0 ? clip01(1.0 - 1.0 / ev->kv.kappa) : 0.0;
  return s;
}

ChipConfig initial_config(const Workload& w, const ProcessNode& node) {
  ChipConfig c;
  const auto [mw, mh] = initial_mesh(w);
  c.mesh_w = mw;
  c.mesh_h = mh;
  c.f_clk = node.f_clk_max;
  set_uniform_tiles(c, TccConfig{});
  return c;
}

ChipConfig budget_mesh(const Workload& w, const ProcessNode& node, const Constraints& c) {
  ChipConfig best = initial_config(w, node);
  int best_cores = 0;
  for (int m = 1; m <= limits::kMeshMax; ++m)
    for (int h : {m, m + 1}) {
      if (h > limits::kMeshMax || m * h <= best_cores) continue;
      ChipConfig cfg = best;
      cfg.mesh_w = m;
      cfg.mesh_h = h;
      set_uniform_tiles(cfg, TccConfig{});
      const auto ev = evaluate(w, cfg, node, decode_knobs(ActionVector{}));
      if (ev.ppa.placed && ev.ppa.power_mw <= c.p_max && ev.ppa.area_mm2 <= c.a_max) {
        best = cfg;
        best_cores = m * h;
      }
    }
  return best;
}

DesignEnv::DesignEnv(Workload w, ProcessNode node, Constraints c, ModelOptions opt)
    : w_(std::move(w)), node_(node), c_(c), opt_(opt) {
  reset();
}

StateVector DesignEnv::encode(const Evaluation& ev, const PpaEstimate* obs) const {
  EncodeInputs in;
  in.workload = &w_;
  in.cfg = &cfg_;
  in.node = &node_;
  in.knobs = &knobs_;
  in.eval = &ev;
  in.ppa_obs = obs;
  in.constraints = &c_;
  in.node_index = node_index(node_.node_nm);
  return encode_state(in);
}

void DesignEnv::reset() {
  cfg_ = initial_config(w_, node_);
  knobs_ = decode_knobs(ActionVector{});
  const Evaluation ev = evaluate(w_, cfg_, node_, knobs_, opt_);
  state_ = encode(ev, nullptr);
}

EnvStep DesignEnv::step(const ActionVector& a_in) {
  const ActionVector a = project_action(a_in);
  EnvStep out;
  out.cfg = decode_action(a, cfg_, node_, w_);
  out.knobs = decode_knobs(a);
  out.eval = evaluate(w_, out.cfg, node_, out.knobs, opt_);
  auto& p = out.eval.ppa;
  p.feasible = feasible(p, c_);
  p.score = ppa_score(p, c_.ranges, c_.weights);
  out.reward = reward(p, c_);
  out.feasible = p.feasible;
  cfg_ = out.cfg;
  knobs_ = out.knobs;
  state_ = encode(out.eval, &out.eval.ppa);
  out.next_state = state_;
  return out;
}

}  // namespace tccdse
