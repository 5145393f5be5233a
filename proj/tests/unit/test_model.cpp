#include <gtest/gtest.h>

#include <cmath>

#include "tccdse/graph.hpp"
#include "tccdse/model.hpp"
#include "tccdse/procnode.hpp"
#include "tccdse/rlenv.hpp"

using namespace tccdse;

namespace {

Workload toy() { return make_workload(gen_transformer(preset("llama8b-toy"))); }

}  // namespace

TEST(Model, ToyInitialConfigIsFeasibleAndComputeBound) {
  const auto w = toy();
  for (const auto& node : builtin_table()) {
    const auto cfg = initial_config(w, node);
    const auto ev = evaluate(w, cfg, node, {});
    EXPECT_TRUE(ev.ppa.placed) << node.node_nm;
    EXPECT_EQ(ev.ppa.binding, Binding::Compute) << node.node_nm;
    EXPECT_LE(ev.ppa.tok_s, ev.ppa.compute_ceiling);
    EXPECT_LE(ev.ppa.tok_s, ev.ppa.memory_ceiling);
    EXPECT_LE(ev.ppa.tok_s, ev.ppa.noc_ceiling);
  }
}

TEST(Model, BreakdownSumsToTotal) {
  const auto w = toy();
  const auto node = find_node(builtin_table(), 5);
  const auto ev = evaluate(w, initial_config(w, node), node, {});
  const auto& b = ev.ppa.breakdown;
  EXPECT_NEAR(b.total(), ev.ppa.power_mw, 1e-9 * ev.ppa.power_mw);
  const double pct = 100 * (b.compute + b.sram + b.rom_read + b.noc + b.leakage) / ev.ppa.power_mw;
  EXPECT_NEAR(pct, 100, 0.1);
}

TEST(Model, UnplaceableConfigDoesNotThrow) {
  const auto w = make_workload(gen_transformer(preset("llama8b")));
  const auto node = find_node(builtin_table(), 28);
  ChipConfig c;  // 1x1 with 256 KB of WMEM
  Evaluation ev;
  ASSERT_NO_THROW(ev = evaluate(w, c, node, {}));
  EXPECT_FALSE(ev.ppa.placed);
  EXPECT_EQ(ev.ppa.tok_s, 0.0);
  EXPECT_GT(ev.ppa.mem_deficit_bytes, 0.0);
  EXPECT_FALSE(feasible(ev.ppa, default_constraints(node, w)));
}

TEST(Model, InitialMeshCoversWeights) {
  const auto w = toy();
  const auto [mw, mh] = initial_mesh(w);
  EXPECT_GE(static_cast<double>(mw) * mh * limits::kWmemMinKb * 1024, static_cast<double>(w.graph.w_total));
}

TEST(Model, KvSpecFollowsConfig) {
  const auto w = toy();
  ChipConfig c;
  c.kv_strategy = KvStrategy::Quantized;
  auto s = kv_spec_for(w, c);
  EXPECT_EQ(s.n_layers, w.shape.layers);
  EXPECT_EQ(s.n_kv_heads, w.shape.kv_heads);
  EXPECT_LT(s.quant_bits, 16);
  c.kv_strategy = KvStrategy::Windowed;
  c.kv_window = 8;
  s = kv_spec_for(w, c);
  ASSERT_TRUE(s.window.has_value());
  EXPECT_EQ(*s.window, 8);
}

TEST(Model, ClockScalesComputeCeilingAndPower) {
  const auto w = toy();
  const auto node = find_node(builtin_table(), 3);
  auto c = initial_config(w, node);
  const auto a = evaluate(w, c, node, {});
  c.f_clk /= 2;
  const auto b = evaluate(w, c, node, {});
  EXPECT_NEAR(b.ppa.compute_ceiling * 2, a.ppa.compute_ceiling, 1e-9 * a.ppa.compute_ceiling);
  EXPECT_NEAR(b.ppa.breakdown.compute * 2, a.ppa.breakdown.compute, 1e-9 * a.ppa.breakdown.compute);
}

TEST(Model, DeterministicEvaluation) {
  const auto w = toy();
  const auto node = find_node(builtin_table(), 10);
  const auto c = initial_config(w, node);
  const auto a = evaluate(w, c, node, {});
  const auto b = evaluate(w, c, node, {});
  EXPECT_EQ(a.ppa.power_mw, b.ppa.power_mw);
  EXPECT_EQ(a.ppa.tok_s, b.ppa.tok_s);
  EXPECT_EQ(a.ppa.area_mm2, b.ppa.area_mm2);
}

TEST(Model, BudgetMeshFitsBudgetsAndShrinksWithOlderNodes) {
  const auto w = toy();
  int prev = 1 << 30;
  for (const auto& node : builtin_table()) {
    const auto c = default_constraints(node, w);
    const auto cfg = budget_mesh(w, node, c);
    const auto ev = evaluate(w, cfg, node, decode_knobs(ActionVector{}));
    EXPECT_TRUE(ev.ppa.placed) << node.node_nm;
    EXPECT_LE(ev.ppa.power_mw, c.p_max) << node.node_nm;
    EXPECT_LE(ev.ppa.area_mm2, c.a_max) << node.node_nm;
    EXPECT_LE(std::abs(cfg.mesh_w - cfg.mesh_h), 1);
    EXPECT_LE(cfg.n_tiles(), prev) << node.node_nm;
    prev = cfg.n_tiles();
  }
}
