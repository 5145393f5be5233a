#include "tccdse/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace tccdse {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, 8> kKindNames = {
    "MatMul", "Conv", "Attention", "Elementwise", "Softmax", "Norm", "Embed", "Other"};
constexpr std::array<std::string_view, kNumPrecisions> kPrecisionNames = {
    "FP32", "FP16", "BF16", "FP8", "INT8", "Mixed"};

}  // namespace

std::string_view to_string(OpKind k) { return kKindNames[static_cast<int>(k)]; }
std::string_view to_string(Precision p) { return kPrecisionNames[static_cast<int>(p)]; }

OpKind parse_op_kind(std::string_view s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == s) return static_cast<OpKind>(i);
  throw ParseError(fmt::format("unknown operator kind '{}'", s));
}

Precision parse_precision(std::string_view s) {
  for (std::size_t i = 0; i < kPrecisionNames.size(); ++i)
    if (kPrecisionNames[i] == s) return static_cast<Precision>(i);
  throw ParseError(fmt::format("unknown precision '{}'", s));
}

int precision_bits(Precision p) {
  switch (p) {
    case Precision::FP32: return 32;
    case Precision::FP16:
    case Precision::BF16:
    case Precision::Mixed: return 16;
    case Precision::FP8:
    case Precision::INT8: return 8;
  }
  return 16;
}

int precision_bytes(Precision p) { return precision_bits(p) / 8; }

std::int64_t OperatorGraph::total_flops() const {
  std::int64_t s = 0;
  for (const auto& n : nodes) s += n.flops;
  return s;
}

std::size_t OperatorGraph::index_of(std::int64_t id) const {
  // Generated graphs use dense ids; fall back to a scan for hand-written files.
  if (id >= 0 && static_cast<std::size_t>(id) < nodes.size() &&
      nodes[static_cast<std::size_t>(id)].id == id)
    return static_cast<std::size_t>(id);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  throw ValidationError(fmt::format("edge references unknown node id {}", id));
}

// ---------------------------------------------------------------------------
// Transformer generator

std::int64_t ffn_dim(const TransformerParams& p) {
  auto base = static_cast<std::int64_t>(std::llround(8.0 / 3.0 * static_cast<double>(p.hidden) *
                                                     p.ffn_multiplier));
  base = std::max<std::int64_t>(base, 1);
  const std::int64_t m = std::max<std::int64_t>(p.multiple_of, 1);
  return (base + m - 1) / m * m;
}

static void check_params(const TransformerParams& p) {
  if (p.layers < 1 || p.hidden < 1 || p.heads < 1 || p.kv_heads < 1 || p.vocab < 1 ||
      p.seq_len < 1)
    throw ValidationError("transformer shape counts must all be >= 1");
  if (p.hidden % p.heads != 0)
    throw ValidationError(fmt::format("hidden {} not divisible by heads {}", p.hidden, p.heads));
  if (p.heads % p.kv_heads != 0)
    throw ValidationError(
        fmt::format("heads {} not divisible by kv_heads {}", p.heads, p.kv_heads));
  if (!(p.ffn_multiplier > 0)) throw ValidationError("ffn_multiplier must be > 0");
}

std::int64_t transformer_param_count(const TransformerParams& p) {
  check_params(p);
  const std::int64_t h = p.hidden;
  const std::int64_t kv = p.kv_heads * (h / p.heads);
  const std::int64_t i = ffn_dim(p);
  const std::int64_t attn = 2 * h * h + 2 * h * kv;
  const std::int64_t mlp = 3 * h * i;
  const std::int64_t norms = 2 * h;
  return p.layers * (attn + mlp + norms) + 2 * p.vocab * h + h;
}

namespace {

struct Builder {
  OperatorGraph g;
  Precision prec;
  std::int64_t elem;

  std::int64_t add(OpKind kind, std::int64_t flops, std::int64_t weight_params,
                   std::int64_t in_elems, std::int64_t out_elems) {
    OperatorNode n;
    n.id = static_cast<std::int64_t>(g.nodes.size());
    n.kind = kind;
    n.flops = flops;
    n.weight_bytes = weight_params * elem;
    n.input_bytes = in_elems * elem;
    n.output_bytes = out_elems * elem;
    n.precision = prec;
    g.nodes.push_back(n);
    return n.id;
  }

  void edge(std::int64_t src, std::int64_t dst) {
    g.edges.push_back({src, dst, g.nodes[static_cast<std::size_t>(src)].output_bytes});
  }
};

}  // namespace

OperatorGraph gen_transformer(const TransformerParams& p) {
  check_params(p);
  const std::int64_t s = p.seq_len, h = p.hidden, v = p.vocab;
  const std::int64_t kv = p.kv_heads * (h / p.heads);
  const std::int64_t ff = ffn_dim(p);

  Builder b{{}, p.precision, precision_bytes(p.precision)};

  std::int64_t resid = b.add(OpKind::Embed, s * h, v * h, s, s * h);
  for (std::int64_t l = 0; l < p.layers; ++l) {
    const std::int64_t n1 = b.add(OpKind::Norm, 4 * s * h, h, s * h, s * h);
    b.edge(resid, n1);
    const std::int64_t q = b.add(OpKind::MatMul, 2 * s * h * h, h * h, s * h, s * h);
    const std::int64_t k = b.add(OpKind::MatMul, 2 * s * h * kv, h * kv, s * h, s * kv);
    const std::int64_t vv = b.add(OpKind::MatMul, 2 * s * h * kv, h * kv, s * h, s * kv);
    for (auto id : {q, k, vv}) b.edge(n1, id);
    const std::int64_t att =
        b.add(OpKind::Attention, 4 * s * s * h, 0, s * h + 2 * s * kv, s * h);
    for (auto id : {q, k, vv}) b.edge(id, att);
    const std::int64_t o = b.add(OpKind::MatMul, 2 * s * h * h, h * h, s * h, s * h);
    b.edge(att, o);
    const std::int64_t add1 = b.add(OpKind::Elementwise, s * h, 0, 2 * s * h, s * h);
    b.edge(o, add1);
    b.edge(resid, add1);
    const std::int64_t n2 = b.add(OpKind::Norm, 4 * s * h, h, s * h, s * h);
    b.edge(add1, n2);
    const std::int64_t gate = b.add(OpKind::MatMul, 2 * s * h * ff, h * ff, s * h, s * ff);
    const std::int64_t up = b.add(OpKind::MatMul, 2 * s * h * ff, h * ff, s * h, s * ff);
    b.edge(n2, gate);
    b.edge(n2, up);
    const std::int64_t act = b.add(OpKind::Elementwise, 4 * s * ff, 0, 2 * s * ff, s * ff);
    b.edge(gate, act);
    b.edge(up, act);
    const std::int64_t down = b.add(OpKind::MatMul, 2 * s * ff * h, ff * h, s * ff, s * h);
    b.edge(act, down);
    const std::int64_t add2 = b.add(OpKind::Elementwise, s * h, 0, 2 * s * h, s * h);
    b.edge(down, add2);
    b.edge(add1, add2);
    resid = add2;
  }
  const std::int64_t fn = b.add(OpKind::Norm, 4 * s * h, h, s * h, s * h);
  b.edge(resid, fn);
  const std::int64_t un = b.add(OpKind::MatMul, 2 * s * h * v, h * v, s * h, s * v);
  b.edge(fn, un);
  const std::int64_t sm = b.add(OpKind::Softmax, 3 * s * v, 0, s * v, s * v);
  b.edge(un, sm);

  OperatorGraph g = std::move(b.g);
  for (const auto& n : g.nodes) g.w_total += n.weight_bytes;
  g.p_total = transformer_param_count(p);
  g.shape = {p.layers, p.hidden, p.heads, p.kv_heads, p.vocab, p.seq_len, ff};
  return g;
}

TransformerParams preset(std::string_view name) {
  TransformerParams p;
  if (name == "llama8b") {
    p.layers = 32;
    p.hidden = 4096;
    p.heads = 32;
    p.kv_heads = 8;
    p.vocab = 128256;
    p.seq_len = 2048;
    p.ffn_multiplier = 1.3;
    p.multiple_of = 1024;
    return p;
  }
  if (name == "llama8b-toy") return p;  // defaults are the toy shape
  throw ValidationError(fmt::format("unknown preset '{}' (valid: llama8b, llama8b-toy)", name));
}

std::vector<std::string> preset_names() { return {"llama8b", "llama8b-toy"}; }

// ---------------------------------------------------------------------------
// Validation and ordering

namespace {

struct Adjacency {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> indeg;
};

Adjacency build_adjacency(const OperatorGraph& g) {
  Adjacency a;
  a.out.resize(g.nodes.size());
  a.indeg.assign(g.nodes.size(), 0);
  for (const auto& e : g.edges) {
    const auto s = g.index_of(e.src), d = g.index_of(e.dst);
    a.out[s].push_back(d);
    ++a.indeg[d];
  }
  return a;
}

// Returns an edge lying on some cycle among the nodes Kahn's algorithm could
// not remove.
std::pair<std::size_t, std::size_t> find_cycle_edge(const Adjacency& a,
                                                    const std::vector<char>& removed) {
  const std::size_t n = a.out.size();
  std::vector<int> color(n, 0);
  std::vector<std::pair<std::size_t, std::size_t>> stack;  // (node, next child)
  for (std::size_t root = 0; root < n; ++root) {
    if (removed[root] || color[root] != 0) continue;
    stack.push_back({root, 0});
    color[root] = 1;
    while (!stack.empty()) {
      auto& [u, k] = stack.back();
      if (k < a.out[u].size()) {
        const std::size_t w = a.out[u][k++];
        if (removed[w]) continue;
        if (color[w] == 1) return {u, w};
        if (color[w] == 0) {
          color[w] = 1;
          stack.push_back({w, 0});
        }
      } else {
        color[u] = 2;
        stack.pop_back();
      }
    }
  }
  return {0, 0};
}

}  // namespace

std::vector<std::size_t> topo_order(const OperatorGraph& g) {
  Adjacency a = build_adjacency(g);
  std::vector<std::size_t> indeg = a.indeg, order, queue;
  order.reserve(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (indeg[i] == 0) queue.push_back(i);
  // Process lowest index first so the order is stable across equal graphs.
  std::size_t head = 0;
  while (head < queue.size()) {
    const std::size_t u = queue[head++];
    order.push_back(u);
    for (std::size_t w : a.out[u])
      if (--indeg[w] == 0) queue.push_back(w);
  }
  if (order.size() != g.nodes.size()) {
    std::vector<char> removed(g.nodes.size(), 0);
    for (auto i : order) removed[i] = 1;
    const auto [u, w] = find_cycle_edge(a, removed);
    throw CycleError(fmt::format("graph contains a cycle through edge {} -> {}", g.nodes[u].id,
                                 g.nodes[w].id),
                     g.nodes[u].id, g.nodes[w].id);
  }
  return order;
}

void validate(const OperatorGraph& g) {
  std::unordered_map<std::int64_t, std::size_t> seen;
  std::int64_t w = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    if (!seen.emplace(n.id, i).second)
      throw ValidationError(fmt::format("duplicate node id {}", n.id));
    if (n.flops < 0) throw ValidationError(fmt::format("node {}: negative flops", n.id));
    if (n.weight_bytes < 0)
      throw ValidationError(fmt::format("node {}: negative weight_bytes", n.id));
    if (n.input_bytes < 0 || n.output_bytes < 0)
      throw ValidationError(fmt::format("node {}: negative tensor bytes", n.id));
    w += n.weight_bytes;
  }
  for (const auto& e : g.edges) {
    if (!seen.count(e.src) || !seen.count(e.dst))
      throw ValidationError(fmt::format("edge {} -> {} references unknown node", e.src, e.dst));
    if (e.bytes < 0)
      throw ValidationError(fmt::format("edge {} -> {}: negative bytes", e.src, e.dst));
  }
  if (w != g.w_total)
    throw ValidationError(
        fmt::format("w_total {} does not equal summed weight bytes {}", g.w_total, w));
  if (g.p_total < 0) throw ValidationError("p_total must be >= 0");
  topo_order(g);
}

// ---------------------------------------------------------------------------
// JSON

std::string to_json(const OperatorGraph& g) {
  json j;
  j["nodes"] = json::array();
  for (const auto& n : g.nodes) {
    j["nodes"].push_back({{"id", n.id},
                          {"kind", std::string(to_string(n.kind))},
                          {"flops", n.flops},
                          {"weight_bytes", n.weight_bytes},
                          {"input_bytes", n.input_bytes},
                          {"output_bytes", n.output_bytes},
                          {"precision", std::string(to_string(n.precision))}});
  }
  j["edges"] = json::array();
  for (const auto& e : g.edges) j["edges"].push_back({e.src, e.dst, e.bytes});
  j["meta"] = {{"p_total", g.p_total}, {"w_total", g.w_total}};
  if (g.shape.valid()) {
    const auto& s = g.shape;
    j["meta"]["shape"] = {{"layers", s.layers},     {"hidden", s.hidden},
                          {"heads", s.heads},       {"kv_heads", s.kv_heads},
                          {"vocab", s.vocab},       {"seq_len", s.seq_len},
                          {"ffn_dim", s.ffn_dim}};
  }
  // nlohmann::json stores objects in std::map, so keys come out sorted.
  return j.dump(1) + "\n";
}

namespace {

std::int64_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n');
}

std::int64_t get_int(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw ParseError(fmt::format("{}: missing field '{}'", where, key));
  const json& v = obj.at(key);
  if (!v.is_number_integer())
    throw ParseError(fmt::format("{}.{}: expected integer", where, key));
  return v.get<std::int64_t>();
}

std::string get_str(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(fmt::format("{}: missing field '{}'", where, key));
  const json& v = obj.at(key);
  if (!v.is_string()) throw ParseError(fmt::format("{}.{}: expected string", where, key));
  return v.get<std::string>();
}

}  // namespace

OperatorGraph from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(
        fmt::format("line {}: {}", line_of(text, e.byte > 0 ? e.byte - 1 : 0), e.what()));
  }
  if (!j.is_object()) throw ParseError("top level: expected object");
  OperatorGraph g;
  if (!j.contains("nodes") || !j["nodes"].is_array()) throw ParseError("missing 'nodes' array");
  if (!j.contains("edges") || !j["edges"].is_array()) throw ParseError("missing 'edges' array");
  if (!j.contains("meta") || !j["meta"].is_object()) throw ParseError("missing 'meta' object");
  const auto& nodes = j["nodes"];
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = fmt::format("nodes[{}]", i);
    const json& o = nodes[i];
    if (!o.is_object()) throw ParseError(where + ": expected object");
    OperatorNode n;
    n.id = get_int(o, "id", where);
    try {
      n.kind = parse_op_kind(get_str(o, "kind", where));
      n.precision = parse_precision(get_str(o, "precision", where));
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    n.flops = get_int(o, "flops", where);
    n.weight_bytes = get_int(o, "weight_bytes", where);
    n.input_bytes = get_int(o, "input_bytes", where);
    n.output_bytes = get_int(o, "output_bytes", where);
    g.nodes.push_back(n);
  }
  const auto& edges = j["edges"];
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const json& e = edges[i];
    if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() ||
        !e[1].is_number_integer() || !e[2].is_number_integer())
      throw ParseError(fmt::format("edges[{}]: expected [src, dst, bytes] integers", i));
    g.edges.push_back({e[0].get<std::int64_t>(), e[1].get<std::int64_t>(),
                       e[2].get<std::int64_t>()});
  }
  const json& meta = j["meta"];
  g.p_total = get_int(meta, "p_total", "meta");
  g.w_total = get_int(meta, "w_total", "meta");
  if (meta.contains("shape")) {
    const json& s = meta["shape"];
    g.shape.layers = get_int(s, "layers", "meta.shape");
    g.shape.hidden = get_int(s, "hidden", "meta.shape");
    g.shape.heads = get_int(s, "heads", "meta.shape");
    g.shape.kv_heads = get_int(s, "kv_heads", "meta.shape");
    g.shape.vocab = get_int(s, "vocab", "meta.shape");
    g.shape.seq_len = get_int(s, "seq_len", "meta.shape");
    g.shape.ffn_dim = get_int(s, "ffn_dim", "meta.shape");
  }
  validate(g);
  return g;
}

void save_graph(const OperatorGraph& g, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << to_json(g);
}

OperatorGraph load_graph(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return from_json(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Features

WorkloadFeatures workload_features(const OperatorGraph& g) {
  WorkloadFeatures f;
  if (!g.nodes.empty()) {
    for (const auto& n : g.nodes) f.precision_dist[static_cast<int>(n.precision)] += 1.0;
    for (auto& x : f.precision_dist) x /= static_cast<double>(g.nodes.size());
  } else {
    f.precision_dist[static_cast<int>(Precision::FP16)] = 1.0;
  }
  const double total = static_cast<double>(g.total_flops());
  if (total <= 0) return f;

  double mm = 0, vec = 0, bytes = 0;
  for (const auto& n : g.nodes) {
    const double fl = static_cast<double>(n.flops);
    if (n.kind == OpKind::MatMul) mm += fl;
    if (n.kind == OpKind::MatMul || n.kind == OpKind::Conv || n.kind == OpKind::Elementwise)
      vec += fl;
    bytes += static_cast<double>(n.input_bytes + n.output_bytes + n.weight_bytes);
  }
  f.matmul_ratio = mm / total;
  f.vector_util = vec / total;
  f.memory_intensity = std::clamp(bytes / total, 0.0, 4.0) / 4.0;
  f.instruction_count = total / 64.0;
  f.scalar_vector_ratio = {1.0 - f.vector_util, f.vector_util};

  if (!g.edges.empty()) {
    // Longest path measured in edges.
    const auto order = topo_order(g);
    const Adjacency a = build_adjacency(g);
    std::vector<std::int64_t> depth(g.nodes.size(), 0);
    std::int64_t longest = 0;
    for (auto u : order)
      for (auto w : a.out[u]) {
        depth[w] = std::max(depth[w], depth[u] + 1);
        longest = std::max(longest, depth[w]);
      }
    f.ilp = 1.0 - static_cast<double>(longest) / static_cast<double>(g.edges.size());
  }
  return f;
}

double flops_per_token(const OperatorGraph& g, double phi_decode) {
  if (!(phi_decode > 0.0 && phi_decode <= 1.0))
    throw ValidationError("phi_decode must be in (0, 1]");
  return 2.0 * static_cast<double>(g.p_total) * phi_decode;
}

double comm_ratio(const OperatorGraph& g) {
  if (g.edges.empty()) return 0.0;
  const double fl = static_cast<double>(g.total_flops());
  if (fl <= 0) throw ValidationError("comm_ratio requires total flops > 0");
  double bytes = 0;
  for (const auto& e : g.edges) bytes += static_cast<double>(e.bytes);
  return bytes / fl;
}

}  // namespace tccdse
