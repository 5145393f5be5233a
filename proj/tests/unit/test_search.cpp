#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <tuple>

#include "oracles.hpp"
#include "tccdse/artifacts.hpp"
#include "tccdse/graph.hpp"
#include "tccdse/procnode.hpp"
#include "tccdse/search.hpp"

using namespace tccdse;

namespace {

using Key = std::tuple<double, double, double>;

Key key(const PpaEstimate& p) { return {p.perf_gops, p.power_mw, p.area_mm2}; }

PpaEstimate point(Rng& rng, bool coarse) {
  PpaEstimate p;
  if (coarse) {
    // Few distinct values so ties and duplicates are common.
    p.perf_gops = static_cast<double>(rng() % 5);
    p.power_mw = static_cast<double>(rng() % 5);
    p.area_mm2 = static_cast<double>(rng() % 5);
  } else {
    p.perf_gops = uniform(rng, 0, 100);
    p.power_mw = uniform(rng, 0, 100);
    p.area_mm2 = uniform(rng, 0, 100);
  }
  return p;
}

// Exhaustive scalarized argmin with the same tie order as select_final.
std::size_t brute_select(const std::vector<ArchiveEntry>& f, const PpaWeights& w) {
  const auto k = normalize_weights(w);
  auto range = [&](auto get) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& e : f) {
      lo = std::min(lo, get(e.ppa));
      hi = std::max(hi, get(e.ppa));
    }
    return std::pair{lo, hi};
  };
  const auto [plo, phi] = range([](const PpaEstimate& p) { return p.perf_gops; });
  const auto [wlo, whi] = range([](const PpaEstimate& p) { return p.power_mw; });
  const auto [alo, ahi] = range([](const PpaEstimate& p) { return p.area_mm2; });
  auto n = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };
  std::vector<std::tuple<double, double, double, std::size_t>> all;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto& p = f[i].ppa;
    const double s = k.beta * n(p.power_mw, wlo, whi) + k.gamma * n(p.area_mm2, alo, ahi) +
                     k.alpha * (1.0 - n(p.perf_gops, plo, phi));
    all.emplace_back(s, p.power_mw, p.area_mm2, i);
  }
  return std::get<3>(*std::min_element(all.begin(), all.end()));
}

}  // namespace

TEST(Pareto, DominanceAgreesWithOracle) {
  Rng rng(1);
  for (int i = 0; i < 5000; ++i) {
    const auto a = point(rng, true), b = point(rng, true);
    EXPECT_EQ(dominates(a, b), oracle::dominates(a, b));
  }
  PpaEstimate a;
  EXPECT_FALSE(dominates(a, a));
}

TEST(Pareto, ArchiveEqualsBruteForce) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PpaEstimate> pts;
    ParetoArchive ar;
    for (int i = 0; i < 100; ++i) {
      pts.push_back(point(rng, trial % 2 == 0));
      ar.insert({ChipConfig{}, {}, pts.back(), i});
    }
    std::vector<Key> got, want;
    for (const auto& e : ar.entries()) got.push_back(key(e.ppa));
    for (const auto& p : oracle::pareto_filter(pts)) want.push_back(key(p));
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    ASSERT_EQ(got, want) << trial;
  }
}

TEST(Pareto, SelectFinalEqualsExhaustiveArgmin) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ArchiveEntry> f;
    const int n = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) f.push_back({ChipConfig{}, {}, point(rng, trial % 3 == 0), i});
    const PpaWeights w{uniform(rng, 0.05, 1), uniform(rng, 0.05, 1), uniform(rng, 0.05, 1)};
    EXPECT_EQ(select_final(f, w), brute_select(f, w)) << trial;
  }
  EXPECT_THROW(select_final({}, {}), std::invalid_argument);
}

TEST(Search, StrategyNames) {
  for (auto s : {Strategy::Sac, Strategy::Random, Strategy::Grid}) EXPECT_EQ(parse_strategy(to_string(s)), s);
  EXPECT_THROW(parse_strategy("anneal"), ValidationError);
}

TEST(Search, Convergence) {
  const double inf = INFINITY;
  std::vector<double> b = {inf, inf, 0.9, 0.5, 0.5, 0.5, 0.5};
  EXPECT_FALSE(convergence_check(b, 10, 1e-4));
  EXPECT_TRUE(convergence_check(b, 3, 1e-4));
  EXPECT_FALSE(convergence_check(b, 4, 1e-4));
  EXPECT_EQ(convergence_episode(b, 3, 1e-4), 6);
  EXPECT_EQ(convergence_episode(b, 1, 1e-4), 1);
}

TEST(Search, ConfigKeyDistinguishesTiles) {
  ChipConfig a;
  a.mesh_w = 2;
  set_uniform_tiles(a, TccConfig{});
  auto b = a;
  EXPECT_EQ(config_key(a), config_key(b));
  b.tiles[1].vlen_bits = 1024;
  EXPECT_NE(config_key(a), config_key(b));
}

namespace {

struct Toy {
  Workload w = make_workload(gen_transformer(preset("llama8b-toy")));
  ProcessNode node = find_node(builtin_table(), 7);
  Constraints c = default_constraints(node, w);
};

void expect_monotone(const NodeResult& r) {
  ASSERT_FALSE(r.log.empty());
  for (std::size_t i = 1; i < r.log.size(); ++i) EXPECT_LE(r.log[i].best_score, r.log[i - 1].best_score) << i;
  EXPECT_EQ(r.log.back().best_score, r.best_score);
}

}  // namespace

TEST(Search, SacRunIsMonotoneAndDeterministic) {
  Toy t;
  const auto cfg = default_search_config(60);
  const auto a = run_node(t.w, t.node, t.c, cfg, 11);
  const auto b = run_node(t.w, t.node, t.c, cfg, 11);
  EXPECT_EQ(a.log.size(), 60u);
  EXPECT_EQ(a.evaluations, 60);
  expect_monotone(a);
  EXPECT_EQ(training_log_csv(a), training_log_csv(b));
  EXPECT_EQ(episodes_csv(a), episodes_csv(b));
  EXPECT_EQ(archive_json(a), archive_json(b));
  EXPECT_EQ(best_config_json(a), best_config_json(b));
  EXPECT_LE(a.feasible_count, 60);
  EXPECT_LE(a.unique_feasible, a.unique_configs);
  if (a.feasible_found) {
    EXPECT_FALSE(a.archive.empty());
    EXPECT_TRUE(feasible(a.best.ppa, t.c));
  }
  const auto c = run_node(t.w, t.node, t.c, cfg, 12);
  EXPECT_NE(training_log_csv(a), training_log_csv(c));
}

TEST(Search, BaselinesAreMonotoneAndDeterministic) {
  Toy t;
  const auto r1 = random_search(t.w, t.node, t.c, 40, 5);
  const auto r2 = random_search(t.w, t.node, t.c, 40, 5);
  expect_monotone(r1);
  EXPECT_EQ(r1.strategy, Strategy::Random);
  EXPECT_EQ(episodes_csv(r1), episodes_csv(r2));
  const auto g = grid_search(t.w, t.node, t.c, 40);
  expect_monotone(g);
  EXPECT_EQ(g.strategy, Strategy::Grid);
  EXPECT_LE(g.evaluations, 40);
}

TEST(Search, RunAllIndependentOfJobs) {
  Toy t;
  std::vector<ProcessNode> nodes = {find_node(builtin_table(), 3), find_node(builtin_table(), 28)};
  std::vector<Constraints> cs = {default_constraints(nodes[0], t.w), default_constraints(nodes[1], t.w)};
  auto cfg = default_search_config(25);
  const auto a = run_all(t.w, nodes, cs, cfg, 3, 1);
  const auto b = run_all(t.w, nodes, cs, cfg, 3, 2);
  ASSERT_EQ(a.nodes.size(), 2u);
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(ppa_by_node_csv(a.nodes), ppa_by_node_csv(b.nodes));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(training_log_csv(a.nodes[i]), training_log_csv(b.nodes[i]));
}
