#pragma once

#include <array>
#include <string>
#include <vector>

namespace tccdse {

struct PowerLawFit {
  double k = 0;
  double c = 0;
  double r2 = 0;
  bool degenerate = false;  // zero variance in log y; r2 reported as 1
};

// OLS on (log x, log y) for y = c * x^k. Needs >= 3 positive points.
PowerLawFit powerlaw_fit(const std::vector<double>& x, const std::vector<double>& y);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

inline constexpr int kMetricCount = 5;
inline const std::array<std::string, kMetricCount> kMetricNames = {"power", "perf", "area", "score",
                                                                   "tok_s"};

struct NodeMetrics {
  int node_nm = 0;
  double power_mw = 0, perf_gops = 0, area_mm2 = 0, score = 0, tok_s = 0;
  std::array<double, kMetricCount> values() const { return {power_mw, perf_gops, area_mm2, score, tok_s}; }
};

// Symmetric, unit diagonal. Pairs involving a constant column are 0.
std::array<std::array<double, kMetricCount>, kMetricCount> pearson_matrix(
    const std::vector<NodeMetrics>& rows);

struct Efficiency {
  double perf_per_power = 0;   // GOps / mW
  double tok_s_per_power = 0;  // tok/s / mW
  double perf_per_area = 0;    // GOps / mm^2
};
// Throws ValidationError on non-positive power or area.
Efficiency efficiency(const NodeMetrics& m);

struct CrossNodeReport {
  int best_nm = 0, worst_nm = 0;  // by score
  double perf_ratio = 1;   // best / worst
  double tok_s_ratio = 1;  // best / worst
  double power_ratio = 1;  // worst / best
  double area_ratio = 1;   // worst / best
};
CrossNodeReport cross_node_report(const std::vector<NodeMetrics>& rows);

}  // namespace tccdse
