#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tccdse/graph.hpp"
#include "tccdse/procnode.hpp"

using namespace tccdse;

TEST(ProcNode, ClockAnchors) {
  const auto t = builtin_table();
  ASSERT_EQ(t.size(), 7u);
  EXPECT_DOUBLE_EQ(find_node(t, 3).f_clk_max, 1.0e9);
  EXPECT_DOUBLE_EQ(find_node(t, 5).f_clk_max, 820e6);
  EXPECT_DOUBLE_EQ(find_node(t, 28).f_clk_max, 250e6);
  EXPECT_DOUBLE_EQ(find_node(t, 28).a_scale, 1.0);
}

TEST(ProcNode, Monotone) {
  const auto t = builtin_table();
  for (std::size_t i = 1; i < t.size(); ++i) {
    EXPECT_GT(t[i].node_nm, t[i - 1].node_nm);
    EXPECT_GT(t[i].a_scale, t[i - 1].a_scale);
    EXPECT_LT(t[i].f_clk_max, t[i - 1].f_clk_max);
    EXPECT_GT(power_scale(t[i]), power_scale(t[i - 1]));
  }
}

TEST(ProcNode, PowerScaleValues) {
  ProcessNode n;
  n.a_scale = 1.0;
  n.v_dd = 0.9;
  EXPECT_NEAR(power_scale(n), 0.81, 1e-12);
  n.a_scale = 0.04;
  n.v_dd = 0.55;
  EXPECT_NEAR(power_scale(n), 0.0605, 1e-12);
  n.a_scale = 0.25;
  n.v_dd = 0.65;
  EXPECT_NEAR(power_scale(n), 0.21125, 1e-12);
}

TEST(ProcNode, TwoNodeAdvanceRatio) {
  const auto t = builtin_table();
  const double r = power_scale(interpolate(t, 6.0)) / power_scale(find_node(t, 3));
  EXPECT_GE(r, 1.7);
  EXPECT_LE(r, 2.3);
}

TEST(ProcNode, UnknownNodeListsValid) {
  try {
    find_node(builtin_table(), 4);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("28"), std::string::npos);
  }
}

TEST(ProcNode, CsvRoundTrip) {
  const auto t = builtin_table();
  const auto dir = std::filesystem::temp_directory_path() / "tccdse_pn";
  std::filesystem::create_directories(dir);
  const auto p = dir / "t.csv";
  std::ofstream(p) << table_to_csv(t);
  const auto t2 = load_table_csv(p.string());
  ASSERT_EQ(t2.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(t2[i].node_nm, t[i].node_nm);
    EXPECT_NEAR(t2[i].f_clk_max, t[i].f_clk_max, 1e-3);
    EXPECT_DOUBLE_EQ(t2[i].a_scale, t[i].a_scale);
  }
}
