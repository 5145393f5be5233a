#include "tccdse/kvcache.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "tccdse/graph.hpp"

namespace tccdse {

void validate(const KvSpec& s) {
  if (s.n_layers < 1 || s.n_kv_heads < 1 || s.d_head < 1 || s.elem_bytes < 1 || s.seq_len < 1)
    throw ValidationError("KV spec counts must be >= 1");
  if (s.quant_bits != 16 && s.quant_bits != 8 && s.quant_bits != 4)
    throw ValidationError(fmt::format("quant_bits must be 16, 8 or 4 (got {})", s.quant_bits));
  if (s.window && *s.window < 1) throw ValidationError("window must be >= 1");
  if (!s.layer_windows.empty()) {
    if (static_cast<std::int64_t>(s.layer_windows.size()) != s.n_layers)
      throw ValidationError("layer_windows must have one entry per layer");
    for (auto w : s.layer_windows)
      if (w < 1) throw ValidationError("layer window must be >= 1");
  }
  if (s.page_bytes && *s.page_bytes < 1) throw ValidationError("page_bytes must be >= 1");
}

std::int64_t kv_bytes_per_token(const KvSpec& s) {
  return 2 * s.n_layers * s.n_kv_heads * s.d_head * s.elem_bytes;
}

std::int64_t kv_total(const KvSpec& s, std::int64_t L) {
  if (L < 0) throw ValidationError("sequence length must be >= 0");
  return L * kv_bytes_per_token(s);
}

std::int64_t windowed_bytes(const KvSpec& s, std::int64_t L,
                            const std::vector<std::int64_t>& w_per_layer) {
  if (static_cast<std::int64_t>(w_per_layer.size()) != s.n_layers)
    throw ValidationError("one window per layer required");
  const std::int64_t per_layer = 2 * s.n_kv_heads * s.d_head * s.elem_bytes;
  std::int64_t total = 0;
  for (auto w : w_per_layer) total += std::min(L, w) * per_layer;
  return total;
}

std::int64_t page_count(std::int64_t total, std::int64_t page_bytes) {
  if (page_bytes < 1) throw ValidationError("page_bytes must be >= 1");
  if (total <= 0) return 0;
  return (total + page_bytes - 1) / page_bytes;
}

double compaction_factor(double b_orig, double b_quant, double L, double mean_window) {
  if (!(b_quant > 0) || !(mean_window > 0))
    throw ValidationError("compaction_factor: b_quant and mean_window must be > 0");
  return (b_orig / b_quant) * (L / mean_window);
}

double adjusted_bytes_per_token(double b_tok, double kv_bt, double kappa) {
  if (!(kappa > 0)) throw ValidationError("kappa must be > 0");
  return b_tok - (1.0 - 1.0 / kappa) * kv_bt;
}

std::vector<std::int64_t> effective_windows(const KvSpec& s) {
  if (!s.layer_windows.empty()) return s.layer_windows;
  return std::vector<std::int64_t>(static_cast<std::size_t>(s.n_layers),
                                   s.window ? *s.window : s.seq_len);
}

std::int64_t quant_scale_overhead(const KvSpec& s) {
  if (s.quant_bits >= 8 * s.elem_bytes) return 0;
  return s.n_layers * s.n_kv_heads * 2 * 4;
}

KvFootprint kv_footprint(const KvSpec& s) {
  validate(s);
  KvFootprint f;
  const std::int64_t L = s.seq_len;
  f.raw_total = kv_total(s, L);
  const auto w = effective_windows(s);
  double mean_w = 0;
  for (auto x : w) mean_w += static_cast<double>(std::min(L, x));
  mean_w /= static_cast<double>(w.size());
  const double b_orig = 8.0 * static_cast<double>(s.elem_bytes);
  const double b_quant = std::min<double>(b_orig, s.quant_bits);
  f.kappa = compaction_factor(b_orig, b_quant, static_cast<double>(L), mean_w);
  f.compacted_total = static_cast<double>(f.raw_total) / f.kappa;
  f.scale_overhead = quant_scale_overhead(s);
  f.stored_total = f.compacted_total + static_cast<double>(f.scale_overhead);
  if (s.page_bytes)
    f.pages = page_count(static_cast<std::int64_t>(std::ceil(f.stored_total)), *s.page_bytes);
  return f;
}

KvDmemReport kv_dmem_check(double kv_bytes, std::int64_t n_active,
                           const std::vector<double>& dmem_in_bytes, double act_input_bytes) {
  if (n_active < 1) throw ValidationError("n_active must be >= 1");
  KvDmemReport r;
  const double share = kv_bytes / static_cast<double>(n_active);
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(n_active),
                                              dmem_in_bytes.size());
  for (std::size_t i = 0; i < n; ++i) {
    KvTileReport t;
    t.need = share + act_input_bytes;
    t.have = dmem_in_bytes[i];
    // Activations have priority; only KV bytes spill.
    t.spill = std::min(share, std::max(0.0, t.need - t.have));
    if (t.need > t.have) r.feasible = false;
    r.total_spill += t.spill;
    r.tiles.push_back(t);
  }
  return r;
}

KvDmemReport kv_dmem_check_paged(double kv_bytes, std::int64_t page_bytes,
                                 const std::vector<double>& dmem_in_bytes,
                                 double act_input_bytes) {
  if (dmem_in_bytes.empty()) throw ValidationError("no tiles for paged KV allocation");
  const std::int64_t pages = page_count(static_cast<std::int64_t>(std::ceil(kv_bytes)), page_bytes);
  const double pb = static_cast<double>(page_bytes);
  std::vector<double> room(dmem_in_bytes.size());
  for (std::size_t i = 0; i < room.size(); ++i)
    room[i] = std::max(0.0, dmem_in_bytes[i] - act_input_bytes);
  const double cap = std::accumulate(room.begin(), room.end(), 0.0);

  // Largest-remainder apportionment of pages by free capacity.
  std::vector<std::int64_t> assigned(room.size(), 0);
  if (cap > 0) {
    std::vector<std::pair<double, std::size_t>> rem;
    std::int64_t given = 0;
    for (std::size_t i = 0; i < room.size(); ++i) {
      const double exact = static_cast<double>(pages) * room[i] / cap;
      assigned[i] = static_cast<std::int64_t>(std::floor(exact));
      given += assigned[i];
      rem.push_back({exact - std::floor(exact), i});
    }
    std::stable_sort(rem.begin(), rem.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; given < pages; ++k, ++given) ++assigned[rem[k % rem.size()].second];
  } else {
    for (std::int64_t p = 0; p < pages; ++p) ++assigned[static_cast<std::size_t>(p) % room.size()];
  }

  KvDmemReport r;
  for (std::size_t i = 0; i < room.size(); ++i) {
    KvTileReport t;
    const double kv_i = static_cast<double>(assigned[i]) * pb;
    t.need = kv_i + act_input_bytes;
    t.have = dmem_in_bytes[i];
    t.spill = std::min(kv_i, std::max(0.0, t.need - t.have));
    if (t.need > t.have) r.feasible = false;
    r.total_spill += t.spill;
    r.tiles.push_back(t);
  }
  return r;
}

}  // namespace tccdse
