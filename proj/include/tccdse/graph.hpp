#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tccdse {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CycleError : public std::runtime_error {
 public:
  CycleError(const std::string& msg, std::int64_t src, std::int64_t dst)
      : std::runtime_error(msg), src(src), dst(dst) {}
  std::int64_t src;
  std::int64_t dst;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OpKind { MatMul, Conv, Attention, Elementwise, Softmax, Norm, Embed, Other };
enum class Precision { FP32, FP16, BF16, FP8, INT8, Mixed };

inline constexpr int kNumPrecisions = 6;

std::string_view to_string(OpKind k);
std::string_view to_string(Precision p);
OpKind parse_op_kind(std::string_view s);
Precision parse_precision(std::string_view s);
int precision_bits(Precision p);
int precision_bytes(Precision p);

struct OperatorNode {
  std::int64_t id = 0;
  OpKind kind = OpKind::Other;
  std::int64_t flops = 0;
  std::int64_t weight_bytes = 0;
  std::int64_t input_bytes = 0;
  std::int64_t output_bytes = 0;
  Precision precision = Precision::FP16;

  bool operator==(const OperatorNode&) const = default;
};

struct Edge {
  std::int64_t src = 0;
  std::int64_t dst = 0;
  std::int64_t bytes = 0;

  bool operator==(const Edge&) const = default;
};

// Transformer shape carried alongside a generated graph so downstream models
// (KV cache, activation traffic) do not have to reverse-engineer it.
struct ModelShape {
  std::int64_t layers = 0;
  std::int64_t hidden = 0;
  std::int64_t heads = 0;
  std::int64_t kv_heads = 0;
  std::int64_t vocab = 0;
  std::int64_t seq_len = 0;
  std::int64_t ffn_dim = 0;

  std::int64_t head_dim() const { return heads > 0 ? hidden / heads : 0; }
  bool valid() const { return layers > 0 && hidden > 0 && heads > 0 && kv_heads > 0; }
  bool operator==(const ModelShape&) const = default;
};

struct OperatorGraph {
  std::vector<OperatorNode> nodes;
  std::vector<Edge> edges;
  std::int64_t w_total = 0;
  std::int64_t p_total = 0;
  ModelShape shape;  // all-zero when unknown

  bool operator==(const OperatorGraph&) const = default;

  std::int64_t total_flops() const;
  // Index of node with the given id; throws ValidationError when absent.
  std::size_t index_of(std::int64_t id) const;
};

struct WorkloadFeatures {
  double instruction_count = 0;
  double ilp = 0;
  double memory_intensity = 0;
  double vector_util = 0;
  double matmul_ratio = 0;
  std::array<double, kNumPrecisions> precision_dist{};
  std::array<double, 2> scalar_vector_ratio{};
};

struct TransformerParams {
  std::int64_t layers = 2;
  std::int64_t hidden = 64;
  std::int64_t heads = 4;
  std::int64_t kv_heads = 2;
  std::int64_t vocab = 256;
  std::int64_t seq_len = 32;
  Precision precision = Precision::FP16;
  // Intermediate width = round(8/3 * hidden * ffn_multiplier), rounded up to
  // a multiple of `multiple_of`.
  double ffn_multiplier = 1.0;
  std::int64_t multiple_of = 1;
};

std::int64_t ffn_dim(const TransformerParams& p);

// Closed-form parameter count for the topology emitted by gen_transformer.
std::int64_t transformer_param_count(const TransformerParams& p);

OperatorGraph gen_transformer(const TransformerParams& p);

// Named shapes: "llama8b" and "llama8b-toy".
TransformerParams preset(std::string_view name);
std::vector<std::string> preset_names();

// Throws ValidationError / CycleError.
void validate(const OperatorGraph& g);
std::vector<std::size_t> topo_order(const OperatorGraph& g);

std::string to_json(const OperatorGraph& g);
OperatorGraph from_json(std::string_view text);
void save_graph(const OperatorGraph& g, const std::string& path);
OperatorGraph load_graph(const std::string& path);

WorkloadFeatures workload_features(const OperatorGraph& g);

double flops_per_token(const OperatorGraph& g, double phi_decode);

// Σ edge bytes / Σ flops; 0 when there are no edges.
double comm_ratio(const OperatorGraph& g);

}  // namespace tccdse
