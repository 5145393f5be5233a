#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tccdse/analysis.hpp"
#include "tccdse/search.hpp"

namespace tccdse {

// Fixed-format number for CSV output ("inf" for infinities).
std::string num(double v);

// Columns: episode,epsilon,reward,ppa_score,feasible,alpha,critic_loss,actor_loss,buffer_size
std::string training_log_csv(const NodeResult& r);
// Per-episode trace with best-so-far score and raw PPA.
std::string episodes_csv(const NodeResult& r);
std::string archive_json(const NodeResult& r);
std::string best_config_json(const NodeResult& r);

std::string ppa_by_node_csv(const std::vector<NodeResult>& rs);
std::string mesh_scaling_csv(const std::vector<NodeResult>& rs);
std::string training_stats_csv(const std::vector<NodeResult>& rs);

struct BaselineRow {
  Strategy strategy = Strategy::Sac;
  std::uint64_t seed = 0;
  double best_score = 0;
  int feasible_count = 0;
  int unique_feasible = 0;
  double tok_s = 0;
  double power_mw = 0;
  double area_mm2 = 0;
  double perf_gops = 0;
};
BaselineRow baseline_row(const NodeResult& r, std::uint64_t seed);
// One row per (strategy, seed) plus a median row per strategy.
std::string search_comparison_csv(const std::vector<BaselineRow>& rows);

double median(std::vector<double> v);

void write_text(const std::filesystem::path& p, const std::string& content);
std::string read_text(const std::filesystem::path& p);

// "s<seed>-<8 hex of the config hash>"
std::string run_id(std::uint64_t seed, const std::string& resolved_config);

// training_log.csv, episodes.csv, archive.json, best_config.json,
// tiles/homogeneous.json, tiles/heterogeneous.json, wmem_regions.csv
void write_node_artifacts(const std::filesystem::path& dir, const NodeResult& r);

std::vector<NodeMetrics> parse_ppa_by_node(const std::string& csv);
// Reads <dir>/ppa_by_node.csv and writes statistical_analysis.csv,
// efficiency_metrics.csv, correlation_matrix.csv and baseline_comparison.csv.
// Throws ValidationError when the input is missing.
void write_analysis(const std::filesystem::path& dir);

}  // namespace tccdse
