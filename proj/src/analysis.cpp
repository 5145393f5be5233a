#include "tccdse/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tccdse/graph.hpp"

namespace tccdse {

PowerLawFit powerlaw_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ValidationError("powerlaw_fit: x and y differ in length");
  if (x.size() < 3) throw ValidationError("powerlaw_fit: need at least 3 points");
  const auto n = static_cast<double>(x.size());
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0))
      throw ValidationError(fmt::format("powerlaw_fit: point {} is not positive", i));
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0)) throw ValidationError("powerlaw_fit: x values are all equal");
  PowerLawFit f;
  f.k = sxy / sxx;
  const double b = my - f.k * mx;
  f.c = std::exp(b);
  double ss_res = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (b + f.k * lx[i]);
    ss_res += r * r;
  }
  if (syy <= 1e-300) {
    f.degenerate = true;
    f.r2 = 1.0;
  } else {
    f.r2 = 1.0 - ss_res / syy;
  }
  return f;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("pearson: size mismatch or empty");
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0 && sbb > 0)) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::array<std::array<double, kMetricCount>, kMetricCount> pearson_matrix(
    const std::vector<NodeMetrics>& rows) {
  std::array<std::vector<double>, kMetricCount> cols;
  for (const auto& r : rows) {
    const auto v = r.values();
    for (int j = 0; j < kMetricCount; ++j) cols[static_cast<std::size_t>(j)].push_back(v[static_cast<std::size_t>(j)]);
  }
  std::array<std::array<double, kMetricCount>, kMetricCount> m{};
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    m[i][i] = 1.0;
    for (std::size_t j = i + 1; j < kMetricCount; ++j) m[i][j] = m[j][i] = pearson(cols[i], cols[j]);
  }
  return m;
}

Efficiency efficiency(const NodeMetrics& m) {
  if (!(m.power_mw > 0)) throw ValidationError("efficiency: power must be > 0");
  if (!(m.area_mm2 > 0)) throw ValidationError("efficiency: area must be > 0");
  return {m.perf_gops / m.power_mw, m.tok_s / m.power_mw, m.perf_gops / m.area_mm2};
}

CrossNodeReport cross_node_report(const std::vector<NodeMetrics>& rows) {
  if (rows.empty()) throw ValidationError("cross_node_report: no rows");
  std::size_t best = 0, worst = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].score < rows[best].score) best = i;
    if (rows[i].score > rows[worst].score) worst = i;
  }
  const auto& b = rows[best];
  const auto& w = rows[worst];
  auto ratio = [](double num, double den) { return den != 0 ? num / den : (num == 0 ? 1.0 : INFINITY); };
  CrossNodeReport r;
  r.best_nm = b.node_nm;
  r.worst_nm = w.node_nm;
  r.perf_ratio = ratio(b.perf_gops, w.perf_gops);
  r.tok_s_ratio = ratio(b.tok_s, w.tok_s);
  r.power_ratio = ratio(w.power_mw, b.power_mw);
  r.area_ratio = ratio(w.area_mm2, b.area_mm2);
  return r;
}

}  // namespace tccdse
