#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "tccdse/rng.hpp"
#include "tccdse/search.hpp"

namespace oracle {

inline double rel_err(double a, double b) {
  const double d = std::abs(a - b);
  const double s = std::max(std::abs(a), std::abs(b));
  return s > 0 ? d / s : 0.0;
}

// Mean hop distance of the (M + N) / 3 model, written as the sum of two
// per-dimension thirds.
inline double hops(int m, int n) { return m / 3.0 + n / 3.0; }

// Links crossing the cheaper of the two bisecting cuts of an M x N mesh.
inline double bisection_bits(int m, int n, double dflit, double f) {
  auto cut_links = [](int cols, int rows) {
    // Cut between column cols/2 - 1 and cols/2; one link per row crosses it.
    if (cols < 2) return 1e300;
    long links = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c + 1 < cols; ++c)
        if (c == cols / 2 - 1) ++links;
    return static_cast<double>(links);
  };
  double links = std::min(cut_links(m, n), cut_links(n, m));
  if (links > 1e299) links = 1;  // 1x1: a single link's worth
  return links * dflit * f;
}

inline std::int64_t pages(std::int64_t total, std::int64_t page) {
  std::int64_t n = 0;
  for (std::int64_t left = total; left > 0; left -= page) ++n;
  return n;
}

inline bool dominates(const tccdse::PpaEstimate& a, const tccdse::PpaEstimate& b) {
  const bool ge = a.perf_gops >= b.perf_gops && a.power_mw <= b.power_mw && a.area_mm2 <= b.area_mm2;
  const bool gt = a.perf_gops > b.perf_gops || a.power_mw < b.power_mw || a.area_mm2 < b.area_mm2;
  return ge && gt;
}

// O(n^2) non-dominated filter with first-occurrence deduplication.
inline std::vector<tccdse::PpaEstimate> pareto_filter(const std::vector<tccdse::PpaEstimate>& pts) {
  std::vector<tccdse::PpaEstimate> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dom = false;
    for (std::size_t j = 0; j < pts.size() && !dom; ++j) dom = j != i && oracle::dominates(pts[j], pts[i]);
    if (dom) continue;
    bool dup = false;
    for (const auto& o : out)
      dup = dup || (o.perf_gops == pts[i].perf_gops && o.power_mw == pts[i].power_mw &&
                    o.area_mm2 == pts[i].area_mm2);
    if (!dup) out.push_back(pts[i]);
  }
  return out;
}

// Central differences over a flat parameter vector. Returns the worst
// relative error, with |g| below `floor` compared absolutely.
inline double gradcheck(std::vector<double> params, const std::vector<double>& analytic,
                        const std::function<double(const std::vector<double>&)>& loss,
                        double h = 1e-5, double floor = 1e-6, std::size_t max_checks = 0,
                        std::uint64_t seed = 0) {
  std::vector<std::size_t> idx(params.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (max_checks && max_checks < idx.size()) {
    tccdse::Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_checks);
  }
  double worst = 0;
  for (std::size_t i : idx) {
    const double p0 = params[i];
    params[i] = p0 + h;
    const double lp = loss(params);
    params[i] = p0 - h;
    const double lm = loss(params);
    params[i] = p0;
    const double num = (lp - lm) / (2 * h);
    const double a = analytic[i];
    const double scale = std::max({std::abs(num), std::abs(a), floor});
    worst = std::max(worst, std::abs(num - a) / scale);
  }
  return worst;
}

}  // namespace oracle
