#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "tccdse/graph.hpp"
#include "tccdse/procnode.hpp"
#include "tccdse/rlenv.hpp"
#include "tccdse/rng.hpp"

using namespace tccdse;

namespace {

struct Fixture {
  Workload w = make_workload(gen_transformer(preset("llama8b-toy")));
  ProcessNode node = find_node(builtin_table(), 7);
  Constraints c = default_constraints(node, w);
};

Constraints simple_constraints() {
  Constraints c;
  c.p_max = 100;
  c.a_max = 50;
  c.m_budget = 1000;
  c.ranges = {0, 10, 0, 200, 0, 100};
  return c;
}

PpaEstimate ideal(const Constraints& c) {
  PpaEstimate p;
  p.placed = true;
  p.perf_gops = c.ranges.perf_max;
  p.power_mw = 0;
  p.area_mm2 = 0;
  return p;
}

double sum_parts(const RewardParts& r) {
  return r.perf - r.power - r.area + r.feasible - r.violation - r.memory - r.hazard;
}

}  // namespace

TEST(RlEnv, TableShapes) {
  EXPECT_EQ(state_table().size(), static_cast<std::size_t>(kStateDim));
  EXPECT_EQ(subset_indices().size(), static_cast<std::size_t>(kSubsetDim));
  const std::set<int> dropped = {33, 34, 35, 36, 41, 42, 43, 44, 46, 47, 48, 49,
                                 59, 60, 61, 62, 63, 64, 67, 68, 69};
  for (int i : subset_indices()) EXPECT_EQ(dropped.count(i), 0u) << i;
  for (const auto& r : state_table()) EXPECT_EQ(r.in_subset, dropped.count(r.index) == 0);
  EXPECT_EQ(action_table().size(), static_cast<std::size_t>(kContDim + kDiscDim));
}

TEST(RlEnv, EncodeDeterministicAndBounded) {
  Fixture f;
  DesignEnv e1(f.w, f.node, f.c), e2(f.w, f.node, f.c);
  e1.reset();
  e2.reset();
  EXPECT_EQ(e1.state(), e2.state());
  for (double v : e1.state()) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_GT(e1.state()[45], 0.0);
  EXPECT_LE(e1.state()[45], 1.0);
  EXPECT_DOUBLE_EQ(e1.state()[45], e1.config().f_clk / f.node.f_clk_max);
  const double fp16[6] = {0, 1, 0, 0, 0, 0};
  for (int i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(e1.state()[59 + i], fp16[i]);
  for (int i = 50; i <= 54; ++i) EXPECT_DOUBLE_EQ(e1.state()[static_cast<std::size_t>(i)], 0.0);
}

TEST(RlEnv, StepStatesStayBounded) {
  Fixture f;
  DesignEnv env(f.w, f.node, f.c);
  env.reset();
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    ActionVector a;
    for (auto& x : a.cont) x = uniform(rng, -1, 1);
    for (auto& d : a.disc) d = static_cast<int>(rng() % 5) - 2;
    const auto st = env.step(a);
    for (double v : st.next_state) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
    EXPECT_EQ(st.feasible, feasible(st.eval.ppa, f.c));
  }
}

TEST(RlEnv, DecodeZeroIsIdentity) {
  Fixture f;
  const auto cfg = initial_config(f.w, f.node);
  EXPECT_EQ(decode_action(ActionVector{}, cfg, f.node, f.w), cfg);
}

TEST(RlEnv, DecodeVlenExtremes) {
  Fixture f;
  const auto cfg = initial_config(f.w, f.node);
  ActionVector a;
  a.cont[act::Vlen] = 1.0;
  EXPECT_EQ(decode_action(a, cfg, f.node, f.w).tiles[0].vlen_bits, 2048);
  a.cont[act::Vlen] = -1.0;
  EXPECT_EQ(decode_action(a, cfg, f.node, f.w).tiles[0].vlen_bits, 128);
}

TEST(RlEnv, DecodeMeshClamp) {
  Fixture f;
  auto cfg = initial_config(f.w, f.node);
  cfg.mesh_w = 63;
  set_uniform_tiles(cfg, cfg.tiles[0]);
  ActionVector a;
  a.disc[0] = 2;
  EXPECT_EQ(decode_action(a, cfg, f.node, f.w).mesh_w, 64);
  cfg.mesh_w = 1;
  set_uniform_tiles(cfg, cfg.tiles[0]);
  a.disc[0] = -2;
  EXPECT_EQ(decode_action(a, cfg, f.node, f.w).mesh_w, 1);
}

TEST(RlEnv, DecodedConfigsValidate) {
  Fixture f;
  auto cfg = initial_config(f.w, f.node);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    ActionVector a;
    for (auto& x : a.cont) x = uniform(rng, -1, 1);
    for (auto& d : a.disc) d = static_cast<int>(rng() % 5) - 2;
    cfg = decode_action(a, cfg, f.node, f.w);
    ASSERT_NO_THROW(validate(cfg, f.node, wmem_upper_kb(static_cast<double>(f.w.graph.w_total), cfg.n_tiles())));
  }
}

TEST(RlEnv, Projection) {
  ActionVector a;
  a.cont[3] = 0.25;
  EXPECT_EQ(project_action(a), a);
  a.cont[3] = 1.7;
  a.cont[4] = -9;
  a.cont[5] = NAN;
  a.disc[1] = 3;
  a.disc[2] = -7;
  const auto p = project_action(a);
  EXPECT_EQ(p.cont[3], 1.0);
  EXPECT_EQ(p.cont[4], -1.0);
  EXPECT_EQ(p.cont[5], 0.0);
  EXPECT_EQ(p.disc[1], 2);
  EXPECT_EQ(p.disc[2], -2);
}

TEST(RlEnv, RewardIdealPoint) {
  auto c = simple_constraints();
  const auto r = reward(ideal(c), c);
  EXPECT_NEAR(r.total, 0.4 + 2.0, 1e-12);
}

TEST(RlEnv, RewardBoundaryIsFeasible) {
  auto c = simple_constraints();
  auto p = ideal(c);
  p.power_mw = c.p_max;
  const auto r = reward(p, c);
  EXPECT_EQ(r.violation, 0.0);
  EXPECT_GT(r.feasible, 0.0);
  p.power_mw = 2 * c.p_max;
  const auto r2 = reward(p, c);
  EXPECT_DOUBLE_EQ(r2.v, 1.0);
  EXPECT_DOUBLE_EQ(r2.violation, 2.0);
  EXPECT_EQ(r2.feasible, 0.0);
}

TEST(RlEnv, Feasibility) {
  auto c = simple_constraints();
  auto p = ideal(c);
  EXPECT_TRUE(feasible(p, c));
  p.power_mw = std::nextafter(c.p_max, 1e9);
  EXPECT_FALSE(feasible(p, c));
  p = ideal(c);
  p.mem_used_bytes = c.m_budget + 1;
  EXPECT_FALSE(feasible(p, c));
  p = ideal(c);
  p.placed = false;
  EXPECT_FALSE(feasible(p, c));
}

TEST(RlEnv, RewardProperties) {
  auto c = simple_constraints();
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    PpaEstimate p;
    p.placed = true;
    p.perf_gops = uniform(rng, 0, 10);
    p.power_mw = uniform(rng, 0, 200);
    p.area_mm2 = uniform(rng, 0, 100);
    p.hazard_score = uniform01(rng);
    p.mem_used_bytes = uniform(rng, 0, 1500);
    const auto r = reward(p, c);
    EXPECT_NEAR(r.total, sum_parts(r), 1e-12);

    auto c2 = c;
    const double k = uniform(rng, 0.1, 10);
    c2.weights = {c.weights.perf * k, c.weights.power * k, c.weights.area * k};
    EXPECT_NEAR(reward(p, c2).total, r.total, 1e-12);

    auto q = p;
    q.perf_gops = std::min(10.0, p.perf_gops + 1);
    EXPECT_GE(reward(q, c).total, r.total);
    if (p.power_mw > c.p_max) {
      q = p;
      q.power_mw = p.power_mw + 1;
      EXPECT_LT(reward(q, c).total, r.total);
    }
  }
}
