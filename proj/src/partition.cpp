#include "tccdse/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace tccdse {

double partition_ratio(double base, double delta) { return std::clamp(base + delta, 0.0, 1.0); }

int target_cores(double rho, int n_total) {
  if (n_total < 1) throw ValidationError("n_total must be >= 1");
  // Tolerate float noise so that rho = k/n yields exactly k.
  const int n = static_cast<int>(std::ceil(std::clamp(rho, 0.0, 1.0) * n_total - 1e-9));
  return std::clamp(n, 1, n_total);
}

namespace {

// Per-coordinate mean |c - c'| under marginal distribution m.
std::vector<double> marginal_distance(const std::vector<double>& m) {
  const int n = static_cast<int>(m.size());
  std::vector<double> out(m.size(), 0.0);
  for (int c = 0; c < n; ++c)
    for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(c)] += m[static_cast<std::size_t>(k)] * std::abs(c - k);
  return out;
}

}  // namespace

ScoreContext make_score_context(int mesh_w, int mesh_h, const std::vector<double>& load,
                                double total_flops,
                                const std::vector<const std::vector<Share>*>& producers) {
  ScoreContext ctx;
  ctx.mesh_w = mesh_w;
  ctx.mesh_h = mesh_h;
  ctx.load = load;
  const int n = mesh_w * mesh_h;
  ctx.mean_target = total_flops > 0 ? total_flops / n : 1.0;
  ctx.max_load = load.empty() ? 0.0 : *std::max_element(load.begin(), load.end());
  std::vector<double> mx(static_cast<std::size_t>(mesh_w), 0.0), my(static_cast<std::size_t>(mesh_h), 0.0);
  int count = 0;
  for (const auto* p : producers) {
    if (!p || p->empty()) continue;
    ++count;
    for (const auto& s : *p) {
      mx[static_cast<std::size_t>(s.tile % mesh_w)] += s.frac;
      my[static_cast<std::size_t>(s.tile / mesh_w)] += s.frac;
    }
  }
  ctx.has_producers = count > 0;
  if (ctx.has_producers) {
    for (auto& v : mx) v /= count;
    for (auto& v : my) v /= count;
    ctx.hop_x = marginal_distance(mx);
    ctx.hop_y = marginal_distance(my);
  }
  return ctx;
}

double placement_score(int tile, double share_flops, const ScoreContext& ctx,
                       const ScoreWeights& w) {
  const int x = tile % ctx.mesh_w, y = tile / ctx.mesh_w;
  const double l = ctx.load[static_cast<std::size_t>(tile)];
  const double load_norm = l / ctx.mean_target;
  const double hop = ctx.has_producers ? ctx.hop_x[static_cast<std::size_t>(x)] + ctx.hop_y[static_cast<std::size_t>(y)] : 0.0;
  const double imb = std::max(0.0, l + share_flops - ctx.max_load) / ctx.mean_target;
  const double cx = (ctx.mesh_w - 1) / 2.0, cy = (ctx.mesh_h - 1) / 2.0;
  const double cent = (cx + cy) > 0 ? (std::abs(x - cx) + std::abs(y - cy)) / (cx + cy) : 0.0;
  return w.load * load_norm + w.hop * hop + w.imbalance * imb + w.centrality * cent;
}

LoadStats load_stats(const std::vector<double>& load) {
  LoadStats s;
  if (load.empty()) return s;
  const double n = static_cast<double>(load.size());
  const double mean = std::accumulate(load.begin(), load.end(), 0.0) / n;
  if (mean <= 0) return s;
  const auto [mn, mx] = std::minmax_element(load.begin(), load.end());
  double var = 0;
  for (double l : load) var += (l / mean - 1.0) * (l / mean - 1.0);
  s.variance = var / n;
  s.cv = std::sqrt(s.variance);
  s.max_min_ratio = *mx / std::max(*mn, 0.01 * mean);
  s.balance = mean / *mx;
  return s;
}

double edge_cross_bytes(const OperatorGraph& g, const Placement& p) {
  std::vector<double> scratch(static_cast<std::size_t>(p.n_tiles()), 0.0);
  double cross = 0;
  for (const auto& e : g.edges) {
    const auto& a = p.ops[g.index_of(e.src)];
    const auto& b = p.ops[g.index_of(e.dst)];
    for (const auto& s : a) scratch[static_cast<std::size_t>(s.tile)] += s.frac;
    double overlap = 0;
    for (const auto& s : b) overlap += std::min(s.frac, scratch[static_cast<std::size_t>(s.tile)]);
    for (const auto& s : a) scratch[static_cast<std::size_t>(s.tile)] = 0.0;
    cross += static_cast<double>(e.bytes) * std::max(0.0, 1.0 - overlap);
  }
  return cross;
}

Placement place(const OperatorGraph& g, const ChipConfig& cfg, const PartitionKnobs& k) {
  const int n = cfg.n_tiles();
  if (static_cast<int>(cfg.tiles.size()) != n)
    throw ValidationError("tile list does not match mesh");
  Placement p;
  p.mesh_w = cfg.mesh_w;
  p.mesh_h = cfg.mesh_h;
  p.ops.assign(g.nodes.size(), {});
  p.load.assign(static_cast<std::size_t>(n), 0.0);
  p.wmem_used.assign(static_cast<std::size_t>(n), 0.0);
  p.dmem_used.assign(static_cast<std::size_t>(n), 0.0);

  std::vector<double> cap(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) cap[static_cast<std::size_t>(t)] = cfg.tiles[static_cast<std::size_t>(t)].wmem_kb * 1024.0;
  const double total_cap = std::accumulate(cap.begin(), cap.end(), 0.0);
  if (total_cap < static_cast<double>(g.w_total))
    throw InfeasiblePlacement(fmt::format("total WMEM {} B below weight footprint {} B",
                                          total_cap, g.w_total));

  std::vector<std::vector<std::size_t>> preds(g.nodes.size());
  for (const auto& e : g.edges) preds[g.index_of(e.dst)].push_back(g.index_of(e.src));
  const double total_flops = static_cast<double>(g.total_flops());
  const double act_scale = std::max(0.0, 1.0 - 0.25 * (k.stream_in + k.stream_out));

  std::vector<int> order(static_cast<std::size_t>(n));
  std::vector<double> score(static_cast<std::size_t>(n));
  std::vector<double> rem(static_cast<std::size_t>(n));

  for (std::size_t op : topo_order(g)) {
    const auto& node = g.nodes[op];
    double rho = 0.0;
    switch (node.kind) {
      case OpKind::MatMul: rho = k.rho_matmul; break;
      case OpKind::Conv: rho = k.rho_conv; break;
      case OpKind::Attention: rho = k.rho_general; break;
      default: rho = 0.0; break;
    }
    const int want = target_cores(rho, n);
    const double w = static_cast<double>(node.weight_bytes);
    const double fl = static_cast<double>(node.flops);

    std::vector<const std::vector<Share>*> prod;
    for (auto q : preds[op]) prod.push_back(&p.ops[q]);
    const ScoreContext ctx = make_score_context(p.mesh_w, p.mesh_h, p.load, total_flops, prod);
    for (int t = 0; t < n; ++t) {
      score[static_cast<std::size_t>(t)] = placement_score(t, fl / want, ctx, k.weights);
      rem[static_cast<std::size_t>(t)] = cap[static_cast<std::size_t>(t)] - p.wmem_used[static_cast<std::size_t>(t)];
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return score[static_cast<std::size_t>(a)] < score[static_cast<std::size_t>(b)];
    });

    std::vector<Share>& shares = p.ops[op];
    // Smallest k >= want such that k tiles can each hold w / k.
    int use = 0;
    if (w <= 0) {
      use = want;
    } else {
      std::vector<double> sorted = rem;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      for (int kk = want; kk <= n; ++kk)
        if (sorted[static_cast<std::size_t>(kk - 1)] * kk >= w * (1 - 1e-12)) {
          use = kk;
          break;
        }
    }
    if (use > 0) {
      const double thresh = w / use;
      for (int t : order) {
        if (static_cast<int>(shares.size()) == use) break;
        if (w > 0 && rem[static_cast<std::size_t>(t)] < thresh * (1 - 1e-12)) continue;
        shares.push_back({t, 1.0 / use});
      }
    } else {
      // Unequal fill in score order; only reachable through fragmentation.
      double left = w;
      const double total_rem = std::accumulate(rem.begin(), rem.end(), 0.0);
      if (total_rem < w * (1 - 1e-12))
        throw InfeasiblePlacement(
            fmt::format("operator {} needs {} B of WMEM, {} B left", node.id, w, total_rem));
      for (int t : order) {
        if (left <= 0) break;
        const double take = std::min(left, rem[static_cast<std::size_t>(t)]);
        if (take <= 0) continue;
        shares.push_back({t, take / w});
        left -= take;
      }
    }
    for (const auto& s : shares) {
      const auto t = static_cast<std::size_t>(s.tile);
      p.load[t] += fl * s.frac;
      p.wmem_used[t] += w * s.frac;
      p.dmem_used[t] = std::max(
          p.dmem_used[t],
          static_cast<double>(node.input_bytes + node.output_bytes) * s.frac * act_scale);
    }
    if (shares.size() > 1) {
      // Output splits broadcast the input; reduction splits all-reduce partial outputs.
      const double kk = static_cast<double>(shares.size());
      const double fan = ((1.0 - k.sub_matmul) * static_cast<double>(node.input_bytes) +
                          k.sub_matmul * k.allreduce * static_cast<double>(node.output_bytes)) *
                         (kk - 1.0) / kk;
      p.intra_op_bytes += fan;
    }
  }
  const double stream = 1.0 + 0.25 * (k.stream_in + k.stream_out);
  p.intra_op_bytes *= stream;
  p.cross_bytes = edge_cross_bytes(g, p) * stream + p.intra_op_bytes;
  p.stats = load_stats(p.load);
  return p;
}

// ---------------------------------------------------------------------------

namespace {

int clamp_pow2(double v, int lo, int hi) {
  const int e = static_cast<int>(std::lround(std::log2(std::max(v, 1.0))));
  return std::clamp(1 << std::clamp(e, 0, 30), lo, hi);
}

int ceil_bank(double kb) {
  return static_cast<int>(std::ceil(kb / limits::kBankKb - 1e-9)) * limits::kBankKb;
}

}  // namespace

ChipConfig derive_heterogeneous(const ChipConfig& cfg, const Placement& p) {
  if (p.n_tiles() != cfg.n_tiles()) throw ValidationError("placement does not match mesh");
  ChipConfig out = cfg;
  const double mean = std::accumulate(p.load.begin(), p.load.end(), 0.0) / p.n_tiles();
  for (int t = 0; t < cfg.n_tiles(); ++t) {
    const auto i = static_cast<std::size_t>(t);
    const TccConfig& base = cfg.tiles[i];
    TccConfig& x = out.tiles[i];
    const double r = mean > 0 ? p.load[i] / mean : 1.0;
    x.fetch_size = std::clamp(static_cast<int>(std::lround(base.fetch_size * r)),
                              limits::kFetchMin, limits::kFetchMax);
    x.vlen_bits = clamp_pow2(base.vlen_bits * r, limits::kVlenMin, limits::kVlenMax);
    // Used bytes never exceed the original allocation, so this stays in range.
    x.wmem_kb = std::max(limits::kWmemMinKb, ceil_bank(p.wmem_used[i] / 1024.0));
    const double dm = std::max(base.dmem_kb * r, p.dmem_used[i] / 1024.0);
    x.dmem_kb = std::clamp(ceil_bank(dm), limits::kDmemMinKb, limits::kDmemMaxKb);
    x.imem_kb = std::clamp(static_cast<int>(std::lround(base.imem_kb * r)), limits::kImemMinKb,
                           limits::kImemMaxKb);
  }
  return out;
}

double variation(const std::vector<double>& v) {
  if (v.empty()) return 0;
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  return *mx > 0 ? (*mx - *mn) / *mx : 0.0;
}

double gini(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (total <= 0) return 0;
  const double n = static_cast<double>(v.size());
  // 1 - 2 * (area under the Lorenz curve), trapezoid rule.
  double cum = 0, area = 0;
  for (double x : v) {
    const double prev = cum;
    cum += x / total;
    area += (prev + cum) / (2.0 * n);
  }
  return 1.0 - 2.0 * area;
}

RegionReport region_stats(const ChipConfig& cfg, int hist_bins) {
  RegionReport r;
  std::array<std::vector<double>, 9> wm, df, fe;
  for (int t = 0; t < cfg.n_tiles(); ++t) {
    const int x = t % cfg.mesh_w, y = t / cfg.mesh_w;
    const int rx = x * 3 / cfg.mesh_w, ry = y * 3 / cfg.mesh_h;
    const auto idx = static_cast<std::size_t>(ry * 3 + rx);
    const auto& tile = cfg.tiles[static_cast<std::size_t>(t)];
    wm[idx].push_back(tile.wmem_kb);
    df[idx].push_back(cfg.dflit_bits);
    fe[idx].push_back(tile.fetch_size);
    r.wmem_sorted.push_back(tile.wmem_kb);
  }
  auto mean_std = [](const std::vector<double>& v, double& m, double& s) {
    if (v.empty()) return;
    m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double acc = 0;
    for (double x : v) acc += (x - m) * (x - m);
    s = std::sqrt(acc / static_cast<double>(v.size()));
  };
  for (std::size_t i = 0; i < 9; ++i) {
    r.regions[i].tiles = static_cast<int>(wm[i].size());
    mean_std(wm[i], r.regions[i].wmem_mean, r.regions[i].wmem_std);
    mean_std(df[i], r.regions[i].dflit_mean, r.regions[i].dflit_std);
    mean_std(fe[i], r.regions[i].fetch_mean, r.regions[i].fetch_std);
  }
  std::sort(r.wmem_sorted.begin(), r.wmem_sorted.end());
  r.gini = gini(r.wmem_sorted);
  if (!r.wmem_sorted.empty()) {
    auto q = [&](double f) {
      const auto n = r.wmem_sorted.size();
      const auto idx = static_cast<std::size_t>(std::ceil(f * static_cast<double>(n))) - 1;
      return r.wmem_sorted[std::min(idx, n - 1)];
    };
    r.p50 = q(0.5);
    r.p90 = q(0.9);
    const double lo = r.wmem_sorted.front(), hi = r.wmem_sorted.back();
    const int bins = hi > lo ? std::max(hist_bins, 1) : 1;
    const double width = hi > lo ? (hi - lo) / bins : 1.0;
    for (int b = 0; b <= bins; ++b) r.hist_edges.push_back(lo + b * width);
    r.hist_counts.assign(static_cast<std::size_t>(bins), 0);
    for (double v : r.wmem_sorted) {
      int b = static_cast<int>((v - lo) / width);
      ++r.hist_counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))];
    }
  }
  return r;
}

std::string tiles_json(const ChipConfig& cfg) {
  nlohmann::json j = nlohmann::json::array();
  for (int t = 0; t < cfg.n_tiles(); ++t) {
    const auto& x = cfg.tiles[static_cast<std::size_t>(t)];
    j.push_back({{"x", t % cfg.mesh_w},
                 {"y", t / cfg.mesh_w},
                 {"fetch", x.fetch_size},
                 {"stanum", x.stanum},
                 {"vlen", x.vlen_bits},
                 {"dmem_kb", x.dmem_kb},
                 {"wmem_kb", x.wmem_kb},
                 {"imem_kb", x.imem_kb}});
  }
  return j.dump(1) + "\n";
}

}  // namespace tccdse
