#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "tccdse/graph.hpp"
#include "tccdse/partition.hpp"
#include "tccdse/rng.hpp"

using namespace tccdse;

namespace {

ChipConfig mesh(int w, int h, int wmem_kb = 4096) {
  ChipConfig c;
  c.mesh_w = w;
  c.mesh_h = h;
  TccConfig t;
  t.wmem_kb = wmem_kb;
  set_uniform_tiles(c, t);
  return c;
}

OperatorNode op(std::int64_t id, OpKind k, std::int64_t flops, std::int64_t wb = 0) {
  return {id, k, flops, wb, 64, 64, Precision::FP16};
}

double gini_pairwise(const std::vector<double>& v) {
  double s = 0, mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double a : v)
    for (double b : v) s += std::abs(a - b);
  const double n = static_cast<double>(v.size());
  return s / (2 * n * n * mean);
}

}  // namespace

TEST(Partition, Ratio) {
  EXPECT_DOUBLE_EQ(partition_ratio(0.3, 0.0), 0.3);
  EXPECT_DOUBLE_EQ(partition_ratio(0.3, 0.9), 1.0);
  EXPECT_DOUBLE_EQ(partition_ratio(0.3, -0.5), 0.0);
}

TEST(Partition, TargetCores) {
  EXPECT_EQ(target_cores(0.3, 10), 3);
  EXPECT_EQ(target_cores(0.0, 10), 1);
  EXPECT_EQ(target_cores(1.0, 7), 7);
  EXPECT_EQ(target_cores(0.31, 10), 4);
}

TEST(Partition, ScoreCenterWinsOnEmptyMesh) {
  const std::vector<double> load(9, 0.0);
  const auto ctx = make_score_context(3, 3, load, 100, {});
  int best = 0;
  for (int t = 1; t < 9; ++t)
    if (placement_score(t, 10, ctx, {}) < placement_score(best, 10, ctx, {})) best = t;
  EXPECT_EQ(best, 4);
}

TEST(Partition, ScoreProducerTileWins) {
  const std::vector<double> load(9, 0.0);
  const std::vector<Share> prod = {{0, 1.0}};
  const auto ctx = make_score_context(3, 3, load, 100, {&prod});
  int best = 0;
  for (int t = 1; t < 9; ++t)
    if (placement_score(t, 10, ctx, {}) < placement_score(best, 10, ctx, {})) best = t;
  EXPECT_EQ(best, 0);
}

TEST(Partition, ScoreLoadedTileLoses) {
  std::vector<double> load(2, 0.0);
  load[0] = 100;
  const auto ctx = make_score_context(2, 1, load, 100, {});
  EXPECT_LT(placement_score(1, 10, ctx, {}), placement_score(0, 10, ctx, {}));
}

TEST(Partition, SingleOpSingleTile) {
  OperatorGraph g;
  g.nodes = {op(0, OpKind::MatMul, 100, 10)};
  g.w_total = 10;
  const auto p = place(g, mesh(1, 1), {});
  ASSERT_EQ(p.ops[0].size(), 1u);
  EXPECT_DOUBLE_EQ(p.ops[0][0].frac, 1.0);
  EXPECT_DOUBLE_EQ(p.stats.balance, 1.0);
}

TEST(Partition, IdenticalMatmulsBalancePerfectly) {
  OperatorGraph g;
  for (int i = 0; i < 4; ++i) g.nodes.push_back(op(i, OpKind::MatMul, 1000, 64));
  g.w_total = 256;
  PartitionKnobs k;
  k.rho_matmul = 1.0;
  const auto p = place(g, mesh(2, 2), k);
  for (const auto& shares : p.ops) {
    EXPECT_EQ(shares.size(), 4u);
    for (const auto& s : shares) EXPECT_DOUBLE_EQ(s.frac, 0.25);
  }
  EXPECT_NEAR(p.stats.variance, 0.0, 1e-24);
}

TEST(Partition, ChainColocatesAtLowRho) {
  OperatorGraph g;
  g.nodes = {op(0, OpKind::MatMul, 100, 8), op(1, OpKind::MatMul, 100, 8), op(2, OpKind::MatMul, 100, 8)};
  g.edges = {{0, 1, 64}, {1, 2, 64}};
  g.w_total = 24;
  PartitionKnobs k;
  k.rho_matmul = 0.0;
  k.weights.hop = 1e6;
  const auto p = place(g, mesh(3, 3), k);
  EXPECT_DOUBLE_EQ(p.cross_bytes, 0.0);
  EXPECT_DOUBLE_EQ(edge_cross_bytes(g, p), 0.0);
}

TEST(Partition, Totality) {
  const auto g = gen_transformer(preset("llama8b-toy"));
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    PartitionKnobs k;
    k.rho_matmul = uniform01(rng);
    k.rho_general = uniform01(rng);
    const auto p = place(g, mesh(1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 4)), k);
    ASSERT_EQ(p.ops.size(), g.nodes.size());
    for (const auto& shares : p.ops) {
      ASSERT_FALSE(shares.empty());
      double s = 0;
      for (const auto& x : shares) s += x.frac;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    for (int t = 0; t < p.n_tiles(); ++t) EXPECT_LE(p.wmem_used[static_cast<std::size_t>(t)], 4096.0 * 1024);
  }
}

TEST(Partition, WmemOverflowThrows) {
  OperatorGraph g;
  g.nodes = {op(0, OpKind::MatMul, 100, 10LL * 1024 * 1024)};
  g.w_total = 10LL * 1024 * 1024;
  EXPECT_THROW(place(g, mesh(2, 1, 256), {}), InfeasiblePlacement);
}

TEST(Partition, HeterogeneousUniformLoad) {
  OperatorGraph g;
  for (int i = 0; i < 4; ++i) g.nodes.push_back(op(i, OpKind::MatMul, 1000, 64));
  g.w_total = 256;
  PartitionKnobs k;
  k.rho_matmul = 1.0;
  const auto c = mesh(2, 2);
  const auto h = derive_heterogeneous(c, place(g, c, k));
  for (const auto& t : h.tiles) EXPECT_EQ(t, h.tiles[0]);
}

TEST(Partition, HeterogeneousKeepsRangesAndWeights) {
  const auto g = gen_transformer(preset("llama8b-toy"));
  const auto c = mesh(3, 3);
  PartitionKnobs k;
  k.rho_matmul = 0.2;
  const auto p = place(g, c, k);
  const auto h = derive_heterogeneous(c, p);
  double wsum = 0;
  for (const auto& t : h.tiles) {
    EXPECT_GE(t.wmem_kb, limits::kWmemMinKb);
    EXPECT_GE(t.fetch_size, limits::kFetchMin);
    EXPECT_LE(t.fetch_size, limits::kFetchMax);
    EXPECT_TRUE(is_pow2(t.vlen_bits));
    EXPECT_GE(t.vlen_bits, limits::kVlenMin);
    EXPECT_LE(t.vlen_bits, limits::kVlenMax);
    EXPECT_EQ(t.stanum, c.tiles[0].stanum);
    wsum += t.wmem_kb * 1024.0;
  }
  EXPECT_EQ(h.dflit_bits, c.dflit_bits);
  EXPECT_GE(wsum, static_cast<double>(g.w_total));
}

TEST(Partition, FetchVariation) {
  EXPECT_NEAR(variation({1, 8, 16}), 15.0 / 16.0, 1e-12);
}

TEST(Partition, Gini) {
  EXPECT_DOUBLE_EQ(gini({5, 5, 5, 5}), 0.0);
  EXPECT_NEAR(gini({0, 0, 0, 10}), 0.75, 1e-12);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(1 + rng() % 30);
    for (auto& x : v) x = uniform(rng, 0, 100);
    EXPECT_NEAR(gini(v), gini_pairwise(v), 1e-12);
  }
}

TEST(Partition, RegionStatsCoverAllTiles) {
  auto c = mesh(5, 4);
  for (std::size_t i = 0; i < c.tiles.size(); ++i) c.tiles[i].wmem_kb = 256 + 16 * static_cast<int>(i);
  const auto r = region_stats(c);
  int n = 0;
  for (const auto& g : r.regions) n += g.tiles;
  EXPECT_EQ(n, 20);
  EXPECT_EQ(std::accumulate(r.hist_counts.begin(), r.hist_counts.end(), 0), 20);
  EXPECT_TRUE(std::is_sorted(r.wmem_sorted.begin(), r.wmem_sorted.end()));
  EXPECT_LE(r.p50, r.p90);
}
