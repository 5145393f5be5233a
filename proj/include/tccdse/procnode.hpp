#pragma once

#include <string>
#include <vector>

namespace tccdse {

struct ProcessNode {
  int node_nm = 28;
  double f_clk_max = 250e6;  // Hz
  double a_scale = 1.0;      // logic area relative to 28nm
  double v_dd = 0.9;
  double e_dyn_per_mb = 1.0;   // mW per MB read at f_ref
  double activity_alpha = 0.1;
  double a_rom_per_mb = 0.5;   // mm^2 / MB
  double a_sram_per_mb = 1.5;  // mm^2 / MB
  double a_logic_base = 2.0;   // mm^2 per core at 28nm
  double p_logic_base = 40.0;  // mW per core at 28nm and f_ref
  double hop_latency = 1;      // cycles
  double setup_latency = 4;    // cycles
  double leak_frac = 0.05;     // static power as a fraction of compute+SRAM
  double e_hop_pj_per_bit = 0.1;
};

inline constexpr double kFRef = 250e6;  // Hz, 28nm clock anchor

// The seven supported nodes, ordered 3 -> 28 nm.
const std::vector<int>& valid_nodes();

std::vector<ProcessNode> builtin_table();

// Reads the CSV override format; optional trailing columns leak_frac and
// e_hop_pj_per_bit fall back to the builtin values for that node.
std::vector<ProcessNode> load_table_csv(const std::string& path);
std::string table_to_csv(const std::vector<ProcessNode>& t);

const ProcessNode& find_node(const std::vector<ProcessNode>& t, int nm);

// Linear interpolation in nm between the two neighbouring table entries
// (clock interpolated in log-log space). Clamps outside [3, 28].
ProcessNode interpolate(const std::vector<ProcessNode>& t, double nm);

// sqrt(a_scale) * v_dd^2
double power_scale(const ProcessNode& n);

}  // namespace tccdse
