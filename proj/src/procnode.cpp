#include "tccdse/procnode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "tccdse/graph.hpp"

namespace tccdse {

const std::vector<int>& valid_nodes() {
  static const std::vector<int> v = {3, 5, 7, 10, 14, 22, 28};
  return v;
}

namespace {

// Log-log interpolation of the clock between the 5nm and 28nm anchors.
double interp_clock(double nm) {
  if (nm <= 3) return 1000e6;
  if (nm <= 5) {
    const double t = (std::log(nm) - std::log(3.0)) / (std::log(5.0) - std::log(3.0));
    return std::exp(std::log(1000e6) + t * (std::log(820e6) - std::log(1000e6)));
  }
  const double t = (std::log(nm) - std::log(5.0)) / (std::log(28.0) - std::log(5.0));
  return std::exp(std::log(820e6) + t * (std::log(250e6) - std::log(820e6)));
}

}  // namespace

std::vector<ProcessNode> builtin_table() {
  struct Row {
    int nm;
    double a_scale, v_dd, e_dyn, alpha, a_rom, a_sram, hop, setup, leak, e_hop;
  };
  // Uncalibrated defaults; only the trends across nodes are meant to be used.
  static const Row rows[] = {
      {3, 0.04, 0.55, 0.30, 0.10, 0.08, 0.26, 1, 4, 0.030, 0.030},
      {5, 0.08, 0.60, 0.38, 0.10, 0.12, 0.38, 1, 4, 0.035, 0.040},
      {7, 0.13, 0.65, 0.46, 0.10, 0.16, 0.50, 1, 5, 0.040, 0.050},
      {10, 0.22, 0.70, 0.58, 0.10, 0.22, 0.70, 1, 5, 0.045, 0.065},
      {14, 0.36, 0.75, 0.72, 0.10, 0.28, 0.90, 2, 6, 0.050, 0.080},
      {22, 0.70, 0.85, 0.90, 0.10, 0.40, 1.20, 2, 6, 0.055, 0.100},
      {28, 1.00, 0.90, 1.00, 0.10, 0.50, 1.50, 2, 8, 0.060, 0.120},
  };
  std::vector<ProcessNode> t;
  for (const auto& r : rows) {
    ProcessNode n;
    n.node_nm = r.nm;
    n.f_clk_max = r.nm == 3 ? 1000e6 : r.nm == 5 ? 820e6 : r.nm == 28 ? 250e6 : interp_clock(r.nm);
    n.a_scale = r.a_scale;
    n.v_dd = r.v_dd;
    n.e_dyn_per_mb = r.e_dyn;
    n.activity_alpha = r.alpha;
    n.a_rom_per_mb = r.a_rom;
    n.a_sram_per_mb = r.a_sram;
    n.a_logic_base = 2.0;
    n.p_logic_base = 40.0;
    n.hop_latency = r.hop;
    n.setup_latency = r.setup;
    n.leak_frac = r.leak;
    n.e_hop_pj_per_bit = r.e_hop;
    t.push_back(n);
  }
  return t;
}

const ProcessNode& find_node(const std::vector<ProcessNode>& t, int nm) {
  for (const auto& n : t)
    if (n.node_nm == nm) return n;
  throw ValidationError(fmt::format("unknown process node {}nm (valid: 3, 5, 7, 10, 14, 22, 28)",
                                    nm));
}

ProcessNode interpolate(const std::vector<ProcessNode>& t, double nm) {
  if (t.empty()) throw ValidationError("empty process node table");
  std::vector<ProcessNode> s = t;
  std::sort(s.begin(), s.end(),
            [](const ProcessNode& a, const ProcessNode& b) { return a.node_nm < b.node_nm; });
  if (nm <= s.front().node_nm) return s.front();
  if (nm >= s.back().node_nm) return s.back();
  std::size_t hi = 1;
  while (s[hi].node_nm < nm) ++hi;
  const ProcessNode& a = s[hi - 1];
  const ProcessNode& b = s[hi];
  const double u = (nm - a.node_nm) / static_cast<double>(b.node_nm - a.node_nm);
  auto lerp = [u](double x, double y) { return x + u * (y - x); };
  ProcessNode r;
  r.node_nm = static_cast<int>(std::lround(nm));
  const double lu = (std::log(nm) - std::log(a.node_nm)) /
                    (std::log(static_cast<double>(b.node_nm)) - std::log(a.node_nm));
  r.f_clk_max = std::exp(std::log(a.f_clk_max) + lu * (std::log(b.f_clk_max) - std::log(a.f_clk_max)));
  r.a_scale = lerp(a.a_scale, b.a_scale);
  r.v_dd = lerp(a.v_dd, b.v_dd);
  r.e_dyn_per_mb = lerp(a.e_dyn_per_mb, b.e_dyn_per_mb);
  r.activity_alpha = lerp(a.activity_alpha, b.activity_alpha);
  r.a_rom_per_mb = lerp(a.a_rom_per_mb, b.a_rom_per_mb);
  r.a_sram_per_mb = lerp(a.a_sram_per_mb, b.a_sram_per_mb);
  r.a_logic_base = lerp(a.a_logic_base, b.a_logic_base);
  r.p_logic_base = lerp(a.p_logic_base, b.p_logic_base);
  r.hop_latency = lerp(a.hop_latency, b.hop_latency);
  r.setup_latency = lerp(a.setup_latency, b.setup_latency);
  r.leak_frac = lerp(a.leak_frac, b.leak_frac);
  r.e_hop_pj_per_bit = lerp(a.e_hop_pj_per_bit, b.e_hop_pj_per_bit);
  return r;
}

double power_scale(const ProcessNode& n) { return std::sqrt(n.a_scale) * n.v_dd * n.v_dd; }

static const char* kHeader =
    "node_nm,f_clk_max_mhz,a_scale,v_dd,e_dyn_per_mb,activity_alpha,a_rom_per_mb,"
    "a_sram_per_mb,a_logic_base,p_logic_base,hop_latency,setup_latency";

std::string table_to_csv(const std::vector<ProcessNode>& t) {
  std::string out = std::string(kHeader) + ",leak_frac,e_hop_pj_per_bit\n";
  for (const auto& n : t)
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", n.node_nm,
                       n.f_clk_max / 1e6, n.a_scale, n.v_dd, n.e_dyn_per_mb, n.activity_alpha,
                       n.a_rom_per_mb, n.a_sram_per_mb, n.a_logic_base, n.p_logic_base,
                       n.hop_latency, n.setup_latency, n.leak_frac, n.e_hop_pj_per_bit);
  return out;
}

std::vector<ProcessNode> load_table_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw ParseError(path + ": empty file");
  if (line.rfind(kHeader, 0) != 0) throw ParseError(path + ":1: unexpected header");
  const auto builtin = builtin_table();
  std::vector<ProcessNode> t;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(fmt::format("{}:{}: bad number '{}'", path, lineno, cell));
      }
    }
    if (v.size() != 12 && v.size() != 14)
      throw ParseError(fmt::format("{}:{}: expected 12 or 14 columns, got {}", path, lineno,
                                   v.size()));
    ProcessNode n;
    n.node_nm = static_cast<int>(v[0]);
    n.f_clk_max = v[1] * 1e6;
    n.a_scale = v[2];
    n.v_dd = v[3];
    n.e_dyn_per_mb = v[4];
    n.activity_alpha = v[5];
    n.a_rom_per_mb = v[6];
    n.a_sram_per_mb = v[7];
    n.a_logic_base = v[8];
    n.p_logic_base = v[9];
    n.hop_latency = v[10];
    n.setup_latency = v[11];
    const ProcessNode* ref = nullptr;
    for (const auto& b : builtin)
      if (b.node_nm == n.node_nm) ref = &b;
    if (!ref) throw ParseError(fmt::format("{}:{}: unsupported node {}", path, lineno, n.node_nm));
    n.leak_frac = v.size() == 14 ? v[12] : ref->leak_frac;
    n.e_hop_pj_per_bit = v.size() == 14 ? v[13] : ref->e_hop_pj_per_bit;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (!(v[i] > 0))
        throw ParseError(fmt::format("{}:{}: column {} must be > 0", path, lineno, i + 1));
    t.push_back(n);
  }
  return t;
}

}  // namespace tccdse
