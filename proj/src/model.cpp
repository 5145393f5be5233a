#include "tccdse/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tccdse {

Workload make_workload(OperatorGraph g, double phi_decode) {
  Workload w;
  w.shape = g.shape;
  if (!w.shape.valid()) {
    std::int64_t attn = 0;
    for (const auto& n : g.nodes) attn += n.kind == OpKind::Attention;
    w.shape = {std::max<std::int64_t>(attn, 1), 1, 1, 1, 1, 1, 1};
  }
  w.features = workload_features(g);
  w.phi_decode = phi_decode;
  w.flops_per_token = flops_per_token(g, phi_decode);
  // Dominant precision by node count.
  const auto& d = w.features.precision_dist;
  const auto best = static_cast<Precision>(std::max_element(d.begin(), d.end()) - d.begin());
  w.precision_bits = precision_bits(best);
  w.elem_bytes = precision_bytes(best);
  w.graph = std::move(g);
  return w;
}

double activation_bytes_per_token(const Workload& w) {
  return 2.0 * static_cast<double>(w.shape.hidden) * static_cast<double>(w.shape.layers) *
         w.elem_bytes;
}

std::pair<int, int> initial_mesh(const Workload& w) {
  const double per_tile = limits::kWmemMinKb * 1024.0;
  const auto n = static_cast<long>(std::ceil(static_cast<double>(w.graph.w_total) / per_tile));
  const long need = std::clamp<long>(n, 1, 64L * 64L);
  int m = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(need))));
  m = std::clamp(m, 1, 64);
  const int h = std::clamp(static_cast<int>((need + m - 1) / m), 1, 64);
  return {m, h};
}

KvSpec kv_spec_for(const Workload& w, const ChipConfig& cfg, const ModelOptions& opt) {
  KvSpec s;
  s.n_layers = w.shape.layers;
  s.n_kv_heads = w.shape.kv_heads;
  s.d_head = std::max<std::int64_t>(w.shape.head_dim(), 1);
  s.elem_bytes = w.elem_bytes;
  s.seq_len = std::max<std::int64_t>(w.shape.seq_len, 1);
  s.quant_bits = std::min(16, 8 * w.elem_bytes);
  switch (cfg.kv_strategy) {
    case KvStrategy::None: break;
    case KvStrategy::Quantized: s.quant_bits = std::min(s.quant_bits, 8); break;
    case KvStrategy::Windowed:
      if (cfg.kv_window > 0) s.window = cfg.kv_window;
      break;
    case KvStrategy::Paged: s.page_bytes = opt.kv_page_bytes; break;
  }
  return s;
}

HazardStats hazard_stats(const OperatorGraph& g, const Placement& p) {
  HazardStats h;
  if (g.nodes.empty()) return h;
  const std::size_t nt = static_cast<std::size_t>(p.n_tiles());
  std::vector<double> ops_on(nt, 0.0), local_edges(nt, 0.0), scratch(nt, 0.0);
  for (const auto& shares : p.ops)
    for (const auto& s : shares) ops_on[static_cast<std::size_t>(s.tile)] += 1.0;
  std::vector<int> fan_in(g.nodes.size(), 0);
  double overlap_sum = 0;
  for (const auto& e : g.edges) {
    const auto a = g.index_of(e.src), b = g.index_of(e.dst);
    ++fan_in[b];
    for (const auto& s : p.ops[a]) scratch[static_cast<std::size_t>(s.tile)] += s.frac;
    for (const auto& s : p.ops[b]) {
      const double o = std::min(s.frac, scratch[static_cast<std::size_t>(s.tile)]);
      overlap_sum += o;
      local_edges[static_cast<std::size_t>(s.tile)] += o;
    }
    for (const auto& s : p.ops[a]) scratch[static_cast<std::size_t>(s.tile)] = 0.0;
  }
  const double n_ops = static_cast<double>(g.nodes.size());
  // Dependent producer/consumer pairs sharing a tile.
  h.raw = std::min(1.0, overlap_sum / n_ops);
  h.war = static_cast<double>(std::count_if(fan_in.begin(), fan_in.end(),
                                            [](int f) { return f >= 2; })) /
          n_ops;
  // Multiple ops writing into one tile's buffers.
  double busy = 0, crowd = 0;
  std::vector<double> dens;
  for (std::size_t t = 0; t < nt; ++t) {
    if (ops_on[t] <= 0) continue;
    busy += 1;
    crowd += (ops_on[t] - 1.0) / ops_on[t];
    dens.push_back(std::min(1.0, local_edges[t] / ops_on[t]));
  }
  h.waw = busy > 0 ? crowd / busy : 0.0;
  h.total = (h.raw + h.war + h.waw) / 3.0;
  if (!dens.empty()) {
    const double m = std::accumulate(dens.begin(), dens.end(), 0.0) / static_cast<double>(dens.size());
    double v = 0;
    for (double d : dens) v += (d - m) * (d - m);
    h.tile_mean = m;
    h.tile_max = *std::max_element(dens.begin(), dens.end());
    h.tile_std = std::sqrt(v / static_cast<double>(dens.size()));
    h.tile_hot = static_cast<double>(std::count_if(dens.begin(), dens.end(),
                                                   [](double d) { return d > 0.5; })) /
                 static_cast<double>(dens.size());
  }
  return h;
}

Evaluation evaluate(const Workload& w, const ChipConfig& cfg, const ProcessNode& node,
                    const PartitionKnobs& knobs, const ModelOptions& opt) {
  Evaluation ev;
  PpaEstimate& p = ev.ppa;
  p.cores = cfg.n_tiles();
  p.area_mm2 = area_model(cfg, node);
  const int bits = std::max(precision_bits(cfg.precision_mode), w.precision_bits);
  for (const auto& t : cfg.tiles) {
    p.mem_used_bytes += (t.wmem_kb + t.dmem_kb + t.imem_kb) * 1024.0;
    p.peak_gops += tile_multipliers(t, opt.tm_fp16, bits) * 2.0 * cfg.f_clk / 1e9;
  }
  ev.comm_ratio = w.graph.total_flops() > 0 ? comm_ratio(w.graph) : 0.0;

  // KV footprint under the configured compaction strategy.
  const KvSpec kvs = kv_spec_for(w, cfg, opt);
  ev.kv = kv_footprint(kvs);
  const double kv_bt = static_cast<double>(kv_bytes_per_token(kvs));

  try {
    ev.placement = place(w.graph, cfg, knobs);
  } catch (const InfeasiblePlacement&) {
    double cap = 0;
    for (const auto& t : cfg.tiles) cap += t.wmem_kb * 1024.0;
    p.placed = false;
    p.mem_deficit_bytes = std::max(0.0, static_cast<double>(w.graph.w_total) - cap);
    p.breakdown = power_model(cfg, node, {static_cast<double>(w.graph.w_total), 0.0, 0.0});
    p.power_mw = p.breakdown.total();
    return ev;
  }
  p.placed = true;
  const Placement& pl = ev.placement;
  const std::size_t nt = static_cast<std::size_t>(cfg.n_tiles());

  // KV slices live on tiles hosting attention.
  std::vector<char> hosts(nt, 0);
  for (std::size_t i = 0; i < w.graph.nodes.size(); ++i)
    if (w.graph.nodes[i].kind == OpKind::Attention)
      for (const auto& s : pl.ops[i]) hosts[static_cast<std::size_t>(s.tile)] = 1;
  std::vector<double> dmem_in;
  for (std::size_t t = 0; t < nt; ++t)
    if (hosts[t] || std::none_of(hosts.begin(), hosts.end(), [](char c) { return c; }))
      dmem_in.push_back(dmem_split(cfg.tiles[t].dmem_kb * 1024.0, knobs.f_in, knobs.f_out).in);
  const double act_in = 2.0 * static_cast<double>(w.shape.hidden) * w.elem_bytes;
  ev.kv_dmem = kvs.page_bytes
                   ? kv_dmem_check_paged(ev.kv.stored_total, *kvs.page_bytes, dmem_in, act_in)
                   : kv_dmem_check(ev.kv.stored_total, static_cast<std::int64_t>(dmem_in.size()),
                                   dmem_in, act_in);

  // Bytes per token: weights amortized over the batch, compacted KV update,
  // activations, plus re-reads of any KV spilled to WMEM.
  double b_tok = static_cast<double>(w.graph.w_total) / cfg.batch + kv_bt +
                 activation_bytes_per_token(w);
  b_tok = adjusted_bytes_per_token(b_tok, kv_bt, ev.kv.kappa);
  const double spill_frac =
      ev.kv.stored_total > 0 ? std::min(1.0, ev.kv_dmem.total_spill / ev.kv.stored_total) : 0.0;
  b_tok += spill_frac * kv_bt / ev.kv.kappa;
  ev.bytes_per_token = b_tok;

  double spare_wmem = 0;
  for (std::size_t t = 0; t < nt; ++t) spare_wmem += cfg.tiles[t].wmem_kb * 1024.0 - pl.wmem_used[t];
  p.mem_deficit_bytes = std::max(0.0, ev.kv_dmem.total_spill - spare_wmem);

  // Banked memories: 16 bytes per 16 KB bank per cycle.
  ev.tile_bw.resize(nt);
  double pressure = 0;
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tile = cfg.tiles[t];
    const double per_cycle = static_cast<double>(tile.wmem_kb + tile.dmem_kb);
    const double peak = per_cycle * cfg.f_clk;
    const double volume = pl.wmem_used[t] + pl.dmem_used[t];
    const double cycles = node.setup_latency + volume / per_cycle;
    ev.tile_bw[t] = volume > 0 ? bw_eff(peak, volume, std::max(cycles, 1.0), cfg.f_clk) : 0.0;
    // Activations use the output and scratch buffers.
    const DmemSplit sp = dmem_split(tile.dmem_kb * 1024.0, knobs.f_in, knobs.f_out);
    pressure += mem_pressure(pl.wmem_used[t], tile.wmem_kb * 1024.0, pl.dmem_used[t],
                             std::max(sp.out + sp.scratch, 1.0));
  }
  ev.mem_pressure = pressure / static_cast<double>(nt);

  ev.cross_bytes_per_token = pl.cross_bytes / static_cast<double>(std::max<std::int64_t>(w.shape.seq_len, 1));
  p.eta_par = std::clamp(pl.stats.balance * (1.0 - 0.02 * avg_hops(cfg.mesh_w, cfg.mesh_h)), 0.1, 1.0);

  p.compute_ceiling = compute_ceiling(cfg, w.flops_per_token, p.eta_par, opt.tm_fp16, bits);
  p.memory_ceiling = memory_ceiling(ev.tile_bw, b_tok);
  p.noc_ceiling = noc_ceiling(cfg, ev.cross_bytes_per_token);
  const auto tr = binding_min(p.compute_ceiling, p.memory_ceiling, p.noc_ceiling);
  p.tok_s = tr.tok_s;
  p.binding = tr.binding;
  p.perf_gops = p.tok_s * w.flops_per_token / 1e9;

  p.breakdown = power_model(
      cfg, node, {static_cast<double>(w.graph.w_total), ev.cross_bytes_per_token, p.tok_s});
  p.power_mw = p.breakdown.total();

  ev.hazards = hazard_stats(w.graph, pl);
  p.hazard_score = ev.hazards.total;
  return ev;
}

}  // namespace tccdse
