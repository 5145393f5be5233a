#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace tccdse {

enum class KvStrategy { None, Quantized, Windowed, Paged };
inline constexpr int kNumKvStrategies = 4;

struct KvSpec {
  std::int64_t n_layers = 32;
  std::int64_t n_kv_heads = 8;
  std::int64_t d_head = 128;
  std::int64_t elem_bytes = 2;
  std::int64_t seq_len = 2048;
  int quant_bits = 16;                      // 16, 8 or 4
  std::optional<std::int64_t> window;       // uniform window
  std::vector<std::int64_t> layer_windows;  // per-layer override, size n_layers when set
  std::optional<std::int64_t> page_bytes;
};

void validate(const KvSpec& s);

// 2 * layers * kv_heads * d_head * elem_bytes
std::int64_t kv_bytes_per_token(const KvSpec& s);
std::int64_t kv_total(const KvSpec& s, std::int64_t L);
// Σ_l min(L, W_l) * per-layer bytes per token.
std::int64_t windowed_bytes(const KvSpec& s, std::int64_t L,
                            const std::vector<std::int64_t>& w_per_layer);
std::int64_t page_count(std::int64_t total, std::int64_t page_bytes);
double compaction_factor(double b_orig, double b_quant, double L, double mean_window);
double adjusted_bytes_per_token(double b_tok, double kv_bt, double kappa);

// Effective windows for every layer (seq_len when unwindowed).
std::vector<std::int64_t> effective_windows(const KvSpec& s);

// Per-head quantization scales for K and V, fp32 each. Zero at 16 bits.
std::int64_t quant_scale_overhead(const KvSpec& s);

struct KvFootprint {
  std::int64_t raw_total = 0;        // uncompacted bytes at seq_len
  double kappa = 1.0;
  double compacted_total = 0;        // raw_total / kappa
  std::int64_t scale_overhead = 0;   // reported separately, added to stored bytes
  double stored_total = 0;           // compacted_total + scale_overhead
  std::int64_t pages = 0;            // 0 unless paged
};

KvFootprint kv_footprint(const KvSpec& s);

struct KvTileReport {
  double need = 0;    // bytes required in dmem_in
  double have = 0;    // dmem_in bytes
  double spill = 0;   // bytes that overflow to WMEM
};

struct KvDmemReport {
  bool feasible = true;
  double total_spill = 0;
  std::vector<KvTileReport> tiles;
};

// dmem_in_bytes: per-tile input-buffer capacity. act_input_bytes applies to
// every tile. kv_bytes is the (compacted) cache to distribute.
KvDmemReport kv_dmem_check(double kv_bytes, std::int64_t n_active,
                           const std::vector<double>& dmem_in_bytes, double act_input_bytes);

// Paged allocation spreads whole pages in proportion to each tile's capacity
// rather than an equal split.
KvDmemReport kv_dmem_check_paged(double kv_bytes, std::int64_t page_bytes,
                                 const std::vector<double>& dmem_in_bytes,
                                 double act_input_bytes);

}  // namespace tccdse
