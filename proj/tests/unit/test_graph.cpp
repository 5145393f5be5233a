#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tccdse/graph.hpp"

using namespace tccdse;

namespace {

std::int64_t per_tensor_params(const TransformerParams& p) {
  const std::int64_t h = p.hidden, hd = p.hidden / p.heads, f = ffn_dim(p);
  std::int64_t n = p.vocab * h;  // embedding
  for (std::int64_t l = 0; l < p.layers; ++l) {
    n += h;                 // attention norm
    n += h * h;             // q
    n += h * p.kv_heads * hd;  // k
    n += h * p.kv_heads * hd;  // v
    n += h * h;             // o
    n += h;                 // mlp norm
    n += h * f * 3;         // gate, up, down
  }
  n += h;             // final norm
  n += p.vocab * h;   // lm head
  return n;
}

std::filesystem::path tmp_file(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / "tccdse_graph_test";
  std::filesystem::create_directories(d);
  return d / name;
}

}  // namespace

TEST(Graph, ToyParamCountMatchesPerTensorSum) {
  TransformerParams p;  // 2 layers, hidden 64, 4 heads, 2 kv heads, vocab 256
  const auto g = gen_transformer(p);
  EXPECT_EQ(g.p_total, per_tensor_params(p));
  EXPECT_EQ(g.w_total, 2 * g.p_total);
  std::int64_t wsum = 0;
  for (const auto& n : g.nodes) wsum += n.weight_bytes;
  EXPECT_EQ(wsum, g.w_total);
}

TEST(Graph, ParamCountPropertyOverShapes) {
  for (std::int64_t layers : {1, 3}) {
    for (std::int64_t heads : {1, 2, 8}) {
      for (std::int64_t kvh : {1, 2}) {
        if (heads % kvh) continue;
        TransformerParams p;
        p.layers = layers;
        p.heads = heads;
        p.kv_heads = kvh;
        p.hidden = 16 * heads;
        p.vocab = 37;
        EXPECT_EQ(transformer_param_count(p), per_tensor_params(p));
        EXPECT_EQ(gen_transformer(p).p_total, per_tensor_params(p));
      }
    }
  }
}

TEST(Graph, Llama8bShape) {
  const auto p = preset("llama8b");
  const double params = static_cast<double>(transformer_param_count(p));
  EXPECT_NEAR(params / 1e9, 8.03, 0.01);
  EXPECT_NEAR(2.0 * params / (1024.0 * 1024 * 1024), 14.96, 0.01);
}

TEST(Graph, DegenerateShapeIsValid) {
  TransformerParams p;
  p.layers = p.hidden = p.heads = p.kv_heads = p.vocab = p.seq_len = 1;
  const auto g = gen_transformer(p);
  EXPECT_GT(g.w_total, 0);
  EXPECT_NO_THROW(validate(g));
}

TEST(Graph, DivisibilityErrors) {
  TransformerParams p;
  p.hidden = 65;
  EXPECT_THROW(gen_transformer(p), ValidationError);
  p = {};
  p.kv_heads = 3;
  EXPECT_THROW(gen_transformer(p), ValidationError);
}

TEST(Graph, ToposortCoversAllNodes) {
  const auto g = gen_transformer({});
  const auto order = topo_order(g);
  ASSERT_EQ(order.size(), g.nodes.size());
  std::vector<std::size_t> pos(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  for (const auto& e : g.edges) EXPECT_LT(pos[g.index_of(e.src)], pos[g.index_of(e.dst)]);
}

TEST(Graph, SaveLoadRoundTripIsByteIdentical) {
  const auto g = gen_transformer({});
  const auto path = tmp_file("rt.json");
  save_graph(g, path.string());
  const auto g2 = load_graph(path.string());
  EXPECT_EQ(g, g2);
  EXPECT_EQ(to_json(g), to_json(g2));
}

TEST(Graph, CycleIsRejected) {
  OperatorGraph g;
  g.nodes = {{0, OpKind::MatMul, 10, 4, 1, 1, Precision::FP16}, {1, OpKind::MatMul, 10, 4, 1, 1, Precision::FP16}};
  g.edges = {{0, 1, 8}, {1, 0, 8}};
  g.w_total = 8;
  try {
    validate(g);
    FAIL() << "expected CycleError";
  } catch (const CycleError& e) {
    EXPECT_TRUE((e.src == 0 && e.dst == 1) || (e.src == 1 && e.dst == 0));
  }
}

TEST(Graph, NegativeFlopsInFileIsValidationError) {
  auto j = nlohmann::json::parse(to_json(gen_transformer({})));
  j["nodes"][0]["flops"] = -5;
  EXPECT_THROW(from_json(j.dump()), ValidationError);
}

TEST(Graph, MalformedJsonIsParseError) {
  EXPECT_THROW(from_json("{\"nodes\": [ {\"id\": 1,"), ParseError);
  EXPECT_THROW(from_json("{\"edges\": []}"), ParseError);
}

TEST(Graph, MatmulRatio) {
  OperatorGraph g;
  g.nodes = {{0, OpKind::MatMul, 300, 0, 1, 1, Precision::FP16}, {1, OpKind::Elementwise, 100, 0, 1, 1, Precision::FP16}};
  g.edges = {{0, 1, 2}};
  EXPECT_DOUBLE_EQ(workload_features(g).matmul_ratio, 0.75);
  g.nodes.pop_back();
  g.edges.clear();
  EXPECT_DOUBLE_EQ(workload_features(g).matmul_ratio, 1.0);
}

TEST(Graph, FeatureRatiosInRange) {
  const auto f = workload_features(gen_transformer(preset("llama8b-toy")));
  for (double v : {f.ilp, f.memory_intensity, f.vector_util, f.matmul_ratio}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  double s = 0;
  for (double v : f.precision_dist) s += v;
  EXPECT_NEAR(s, 1.0, 1e-9);
}

TEST(Graph, MatmulRatioByBruteForce) {
  const auto g = gen_transformer({});
  double mm = 0, all = 0;
  for (const auto& n : g.nodes) {
    all += static_cast<double>(n.flops);
    if (n.kind == OpKind::MatMul) mm += static_cast<double>(n.flops);
  }
  EXPECT_NEAR(workload_features(g).matmul_ratio, mm / all, 1e-12);
}

TEST(Graph, FlopsPerToken) {
  OperatorGraph g;
  g.p_total = 100;
  EXPECT_DOUBLE_EQ(flops_per_token(g, 1.0), 200.0);
  g.p_total = 0;
  EXPECT_DOUBLE_EQ(flops_per_token(g, 0.97), 0.0);
  g.p_total = 8'030'000'000;
  EXPECT_NEAR(flops_per_token(g, 0.97), 1.558e10, 1e7);
}

TEST(Graph, CommRatio) {
  OperatorGraph g;
  g.nodes = {{0, OpKind::MatMul, 50, 0, 1, 1, Precision::FP16}};
  EXPECT_DOUBLE_EQ(comm_ratio(g), 0.0);
  g.nodes.push_back({1, OpKind::Other, 0, 0, 1, 1, Precision::FP16});
  g.edges = {{0, 1, 100}};
  EXPECT_DOUBLE_EQ(comm_ratio(g), 2.0);
}

TEST(Graph, CommRatioByBruteForce) {
  const auto g = gen_transformer({});
  double b = 0, f = 0;
  for (const auto& e : g.edges) b += static_cast<double>(e.bytes);
  for (const auto& n : g.nodes) f += static_cast<double>(n.flops);
  EXPECT_NEAR(comm_ratio(g), b / f, 1e-12 * b / f);
}
