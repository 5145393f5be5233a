#include "tccdse/arch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace tccdse {

using json = nlohmann::json;

void set_uniform_tiles(ChipConfig& c, const TccConfig& t) {
  c.tiles.assign(static_cast<std::size_t>(c.n_tiles()), t);
}

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

namespace {

int round_multiple(double v, int m) {
  return static_cast<int>(std::lround(v / m)) * m;
}

}  // namespace

TccConfig mean_tile(const ChipConfig& c) {
  if (c.tiles.empty()) return TccConfig{};
  double s[10] = {};
  double log_vlen = 0;
  for (const auto& t : c.tiles) {
    s[0] += t.fetch_size;
    s[1] += t.stanum;
    log_vlen += std::log2(static_cast<double>(t.vlen_bits));
    s[3] += t.dmem_kb;
    s[4] += t.wmem_kb;
    s[5] += t.imem_kb;
    s[6] += t.xr_wp;
    s[7] += t.vr_wp;
    s[8] += t.xdpnum;
    s[9] += t.vdpnum;
  }
  const double n = static_cast<double>(c.tiles.size());
  TccConfig m;
  m.fetch_size = static_cast<int>(std::lround(s[0] / n));
  m.stanum = static_cast<int>(std::lround(s[1] / n));
  m.vlen_bits = 1 << static_cast<int>(std::lround(log_vlen / n));
  m.dmem_kb = std::max(limits::kDmemMinKb, round_multiple(s[3] / n, limits::kBankKb));
  m.wmem_kb = std::max(limits::kWmemMinKb, round_multiple(s[4] / n, limits::kBankKb));
  m.imem_kb = std::max(limits::kImemMinKb, static_cast<int>(std::lround(s[5] / n)));
  m.xr_wp = static_cast<int>(std::lround(s[6] / n));
  m.vr_wp = static_cast<int>(std::lround(s[7] / n));
  m.xdpnum = static_cast<int>(std::lround(s[8] / n));
  m.vdpnum = static_cast<int>(std::lround(s[9] / n));
  return m;
}

void validate(const ChipConfig& c, const ProcessNode& node, int wmem_max_kb) {
  using namespace limits;
  auto range = [](const char* name, double v, double lo, double hi) {
    if (!(v >= lo && v <= hi))
      throw ValidationError(fmt::format("{} = {} outside [{}, {}]", name, v, lo, hi));
  };
  range("mesh_w", c.mesh_w, kMeshMin, kMeshMax);
  range("mesh_h", c.mesh_h, kMeshMin, kMeshMax);
  range("sc_x", c.sc_x, 1, c.mesh_w);
  range("sc_y", c.sc_y, 1, c.mesh_h);
  range("dflit_bits", c.dflit_bits, kDflitMin, kDflitMax);
  if (!is_pow2(c.dflit_bits)) throw ValidationError("dflit_bits must be a power of two");
  if (!(c.f_clk > 0 && c.f_clk <= node.f_clk_max * (1 + 1e-12)))
    throw ValidationError(fmt::format("f_clk {} Hz outside (0, {}]", c.f_clk, node.f_clk_max));
  range("batch", c.batch, 1, 1 << 20);
  range("alpha_spec", c.alpha_spec, kAlphaSpecMin, kAlphaSpecMax);
  if (c.kv_window < 0) throw ValidationError("kv_window must be >= 0");
  if (static_cast<int>(c.tiles.size()) != c.n_tiles())
    throw ValidationError(
        fmt::format("tile list has {} entries, mesh needs {}", c.tiles.size(), c.n_tiles()));
  for (std::size_t i = 0; i < c.tiles.size(); ++i) {
    const auto& t = c.tiles[i];
    const std::string p = fmt::format("tile[{}].", i);
    range((p + "fetch_size").c_str(), t.fetch_size, kFetchMin, kFetchMax);
    range((p + "stanum").c_str(), t.stanum, kStanumMin, kStanumMax);
    range((p + "vlen_bits").c_str(), t.vlen_bits, kVlenMin, kVlenMax);
    if (!is_pow2(t.vlen_bits)) throw ValidationError(p + "vlen_bits must be a power of two");
    range((p + "dmem_kb").c_str(), t.dmem_kb, kDmemMinKb, kDmemMaxKb);
    range((p + "wmem_kb").c_str(), t.wmem_kb, kWmemMinKb, wmem_max_kb);
    range((p + "imem_kb").c_str(), t.imem_kb, kImemMinKb, kImemMaxKb);
    if (t.dmem_kb % kBankKb || t.wmem_kb % kBankKb)
      throw ValidationError(p + "memory sizes must be multiples of the 16 KB bank");
    for (int v : {t.xr_wp, t.vr_wp, t.xdpnum, t.vdpnum}) range((p + "port").c_str(), v, kPortMin, kPortMax);
  }
}

std::string to_json(const ChipConfig& c) {
  json j;
  j["mesh_w"] = c.mesh_w;
  j["mesh_h"] = c.mesh_h;
  j["sc_x"] = c.sc_x;
  j["sc_y"] = c.sc_y;
  j["dflit_bits"] = c.dflit_bits;
  j["f_clk_hz"] = c.f_clk;
  j["precision_mode"] = std::string(to_string(c.precision_mode));
  j["batch"] = c.batch;
  j["kv_strategy"] = static_cast<int>(c.kv_strategy);
  j["kv_window"] = c.kv_window;
  j["alpha_spec"] = c.alpha_spec;
  j["tiles"] = json::array();
  for (int i = 0; i < c.n_tiles() && i < static_cast<int>(c.tiles.size()); ++i) {
    const auto& t = c.tiles[static_cast<std::size_t>(i)];
    j["tiles"].push_back({{"x", i % c.mesh_w},
                          {"y", i / c.mesh_w},
                          {"fetch", t.fetch_size},
                          {"stanum", t.stanum},
                          {"vlen", t.vlen_bits},
                          {"dmem_kb", t.dmem_kb},
                          {"wmem_kb", t.wmem_kb},
                          {"imem_kb", t.imem_kb},
                          {"xr_wp", t.xr_wp},
                          {"vr_wp", t.vr_wp},
                          {"xdpnum", t.xdpnum},
                          {"vdpnum", t.vdpnum}});
  }
  return j.dump(1) + "\n";
}

ChipConfig chip_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  try {
    ChipConfig c;
    c.mesh_w = j.at("mesh_w").get<int>();
    c.mesh_h = j.at("mesh_h").get<int>();
    c.sc_x = j.at("sc_x").get<int>();
    c.sc_y = j.at("sc_y").get<int>();
    c.dflit_bits = j.at("dflit_bits").get<int>();
    c.f_clk = j.at("f_clk_hz").get<double>();
    c.precision_mode = parse_precision(j.at("precision_mode").get<std::string>());
    c.batch = j.at("batch").get<int>();
    c.kv_strategy = static_cast<KvStrategy>(j.at("kv_strategy").get<int>());
    c.kv_window = j.at("kv_window").get<int>();
    c.alpha_spec = j.at("alpha_spec").get<double>();
    c.tiles.clear();
    for (const auto& t : j.at("tiles")) {
      TccConfig x;
      x.fetch_size = t.at("fetch").get<int>();
      x.stanum = t.at("stanum").get<int>();
      x.vlen_bits = t.at("vlen").get<int>();
      x.dmem_kb = t.at("dmem_kb").get<int>();
      x.wmem_kb = t.at("wmem_kb").get<int>();
      x.imem_kb = t.at("imem_kb").get<int>();
      x.xr_wp = t.at("xr_wp").get<int>();
      x.vr_wp = t.at("vr_wp").get<int>();
      x.xdpnum = t.at("xdpnum").get<int>();
      x.vdpnum = t.at("vdpnum").get<int>();
      c.tiles.push_back(x);
    }
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("chip config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

DmemSplit dmem_split(double d_total, double f_in, double f_out) {
  if (f_in < 0 || f_out < 0 || f_in + f_out > 1 + 1e-12)
    throw ValidationError("dmem fractions must be >= 0 and sum to <= 1");
  DmemSplit s;
  s.in = f_in * d_total;
  s.out = f_out * d_total;
  // The remainder absorbs rounding; the sum is d_total to within one ulp.
  s.scratch = d_total - (s.in + s.out);
  return s;
}

double bw_eff(double bw_peak, double volume, double cycles, double f_clk) {
  if (cycles < 1 || !(f_clk > 0)) throw ValidationError("bw_eff: cycles >= 1 and f_clk > 0");
  return std::min(bw_peak, volume / (cycles / f_clk));
}

double mem_pressure(double w_used, double w_alloc, double d_used, double d_alloc) {
  if (!(w_alloc > 0) || !(d_alloc > 0)) throw ValidationError("mem_pressure: allocs must be > 0");
  return w_used / w_alloc + 0.5 * d_used / d_alloc;
}

double bisection_bw(int M, int N, double dflit_bits, double f_clk) {
  if (M < 1 || N < 1) throw ValidationError("mesh dims must be >= 1");
  return static_cast<double>(std::min(M, N)) * dflit_bits * f_clk;
}

double avg_hops(int M, int N) {
  if (M < 1 || N < 1) throw ValidationError("mesh dims must be >= 1");
  return (M + N) / 3.0;
}

double noc_latency(int M, int N, double hop_lat, double setup_lat) {
  return avg_hops(M, N) * hop_lat + setup_lat;
}

double tile_multipliers(const TccConfig& t, double tm_fp16, int precision_bits) {
  const double m = std::min(tm_fp16, t.vlen_bits / 16.0);
  return m * 16.0 / std::max(precision_bits, 1);
}

double logic_factor(const TccConfig& t) {
  const double ports = (t.xr_wp + t.vr_wp + t.xdpnum + t.vdpnum) / 4.0;
  return 0.4 + 0.3 * (t.vlen_bits / 512.0) + 0.1 * (t.fetch_size / 4.0) +
         0.05 * (t.stanum / 8.0) + 0.15 * (ports / 4.0);
}

double compute_ceiling(const ChipConfig& cfg, double flops_tok, double eta_par, double tm_fp16,
                       int precision_bits) {
  if (!(flops_tok > 0)) throw ValidationError("flops per token must be > 0");
  if (!(eta_par > 0 && eta_par <= 1)) throw ValidationError("eta_par must be in (0, 1]");
  double m = 0;
  for (const auto& t : cfg.tiles) m += tile_multipliers(t, tm_fp16, precision_bits);
  return m * 2.0 * cfg.f_clk * eta_par * cfg.alpha_spec / flops_tok;
}

double memory_ceiling(const std::vector<double>& tile_bw, double bytes_per_token) {
  if (!(bytes_per_token > 0)) throw ValidationError("bytes per token must be > 0");
  double s = 0;
  for (double b : tile_bw) s += b;
  return s / bytes_per_token;
}

double noc_ceiling(const ChipConfig& cfg, double cross_tile_bytes_per_token) {
  if (cross_tile_bytes_per_token <= 0) return std::numeric_limits<double>::infinity();
  return bisection_bw(cfg.mesh_w, cfg.mesh_h, cfg.dflit_bits, cfg.f_clk) / 8.0 /
         cross_tile_bytes_per_token;
}

std::string_view to_string(Binding b) {
  switch (b) {
    case Binding::Compute: return "Compute";
    case Binding::Memory: return "Memory";
    case Binding::NoC: return "NoC";
  }
  return "?";
}

ThroughputResult binding_min(double compute, double memory, double noc) {
  ThroughputResult r{compute, Binding::Compute};
  if (memory < r.tok_s) r = {memory, Binding::Memory};
  if (noc < r.tok_s) r = {noc, Binding::NoC};
  return r;
}

PowerBreakdown power_model(const ChipConfig& cfg, const ProcessNode& node, const PowerInputs& in) {
  const double kp = power_scale(node);
  const double fr = cfg.f_clk / kFRef;
  double logic = 0, sram_mb = 0;
  for (const auto& t : cfg.tiles) {
    logic += node.p_logic_base * logic_factor(t) * kp;
    sram_mb += (t.dmem_kb + t.imem_kb) / 1024.0;
  }
  PowerBreakdown p;
  p.compute = logic * fr;
  p.rom_read = in.w_touched_bytes / (1024.0 * 1024.0) * node.e_dyn_per_mb * node.activity_alpha * fr;
  p.sram = sram_mb * node.e_dyn_per_mb * 0.5 * fr;
  // bytes -> bits, pJ -> mW
  p.noc = in.cross_bytes_per_token * 8.0 * node.e_hop_pj_per_bit *
          avg_hops(cfg.mesh_w, cfg.mesh_h) * in.tok_s * 1e-9;
  // Static: proportional to the logic and SRAM that stay powered. ROM banks
  // are power-gated, so they contribute nothing here.
  p.leakage = node.leak_frac * (logic + sram_mb * node.e_dyn_per_mb * 0.5);
  return p;
}

double area_model(const ChipConfig& cfg, const ProcessNode& node) {
  double logic = 0, rom_mb = 0, sram_mb = 0;
  for (const auto& t : cfg.tiles) {
    logic += node.a_logic_base * logic_factor(t) * node.a_scale;
    rom_mb += t.wmem_kb / 1024.0;
    sram_mb += (t.dmem_kb + t.imem_kb) / 1024.0;
  }
  return logic + rom_mb * node.a_rom_per_mb + sram_mb * node.a_sram_per_mb;
}

NormalizedWeights normalize_weights(const PpaWeights& w) {
  if (w.perf < 0 || w.power < 0 || w.area < 0) throw ValidationError("weights must be >= 0");
  const double s = w.perf + w.power + w.area;
  if (!(s > 0)) throw ValidationError("weights must not all be zero");
  return {w.perf / s, w.power / s, w.area / s};
}

NormalizedMetrics normalize(const PpaEstimate& p, const NormRanges& r) {
  if (!(r.perf_max > r.perf_min && r.power_max > r.power_min && r.area_max > r.area_min))
    throw ValidationError("normalization ranges need max > min");
  auto n = [](double v, double lo, double hi) { return std::clamp((v - lo) / (hi - lo), 0.0, 1.0); };
  return {n(p.perf_gops, r.perf_min, r.perf_max), n(p.power_mw, r.power_min, r.power_max),
          n(p.area_mm2, r.area_min, r.area_max)};
}

double ppa_score(const PpaEstimate& p, const NormRanges& r, const PpaWeights& w) {
  const auto k = normalize_weights(w);
  const auto m = normalize(p, r);
  return k.beta * m.power + k.gamma * m.area + k.alpha * (1.0 - m.perf);
}

std::string ppa_csv_header() {
  return "process_node,mesh_config,cores,freq_mhz,power_mw,perf_gops,area_mm2,ppa_score,tok_s";
}

std::string ppa_csv_row(int node_nm, const ChipConfig& c, const PpaEstimate& p) {
  return fmt::format("{}nm,{}x{},{},{:.1f},{:.3f},{:.3f},{:.4f},{:.4f},{:.3f}", node_nm, c.mesh_w,
                     c.mesh_h, c.n_tiles(), c.f_clk / 1e6, p.power_mw, p.perf_gops, p.area_mm2,
                     p.score, p.tok_s);
}

}  // namespace tccdse
