#include "tccdse/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace tccdse {

namespace fs = std::filesystem;

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.10g}", v);
}

std::string training_log_csv(const NodeResult& r) {
  std::string s = "episode,epsilon,reward,ppa_score,feasible,alpha,critic_loss,actor_loss,buffer_size\n";
  for (const auto& x : r.log)
    s += fmt::format("{},{},{},{},{},{},{},{},{}\n", x.episode, num(x.epsilon), num(x.reward),
                     num(x.ppa_score), x.feasible ? 1 : 0, num(x.alpha), num(x.critic_loss),
                     num(x.actor_loss), x.buffer_size);
  return s;
}

std::string episodes_csv(const NodeResult& r) {
  std::string s =
      "episode,strategy,reward,ppa_score,best_score,feasible,power_mw,perf_gops,area_mm2,tok_s,cores,"
      "binding,mpc,screened,new_config\n";
  for (const auto& x : r.log)
    s += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", x.episode, to_string(r.strategy),
                     num(x.reward), num(x.ppa_score), num(x.best_score), x.feasible ? 1 : 0,
                     num(x.power_mw), num(x.perf_gops), num(x.area_mm2), num(x.tok_s), x.cores,
                     to_string(x.binding), x.mpc ? 1 : 0, x.screened ? 1 : 0, x.new_config ? 1 : 0);
  return s;
}

namespace {

nlohmann::json ppa_json(const PpaEstimate& p) {
  return {{"power_mw", p.power_mw},
          {"perf_gops", p.perf_gops},
          {"area_mm2", p.area_mm2},
          {"tok_s", p.tok_s},
          {"score", p.score},
          {"feasible", p.feasible},
          {"binding", std::string(to_string(p.binding))},
          {"compute_ceiling", p.compute_ceiling},
          {"memory_ceiling", p.memory_ceiling},
          {"noc_ceiling", std::isinf(p.noc_ceiling) ? nlohmann::json("inf") : nlohmann::json(p.noc_ceiling)},
          {"cores", p.cores},
          {"power_breakdown",
           {{"compute", p.breakdown.compute},
            {"sram", p.breakdown.sram},
            {"rom_read", p.breakdown.rom_read},
            {"noc", p.breakdown.noc},
            {"leakage", p.breakdown.leakage}}}};
}

nlohmann::json knobs_json(const PartitionKnobs& k) {
  return {{"rho_matmul", k.rho_matmul}, {"rho_conv", k.rho_conv},   {"rho_general", k.rho_general},
          {"f_in", k.f_in},             {"f_out", k.f_out},         {"stream_in", k.stream_in},
          {"stream_out", k.stream_out}, {"sub_matmul", k.sub_matmul}, {"allreduce", k.allreduce}};
}

// Uniform configs only need one tile entry in summaries.
nlohmann::json compact_config(const ChipConfig& c) {
  auto j = nlohmann::json::parse(to_json(c));
  return j;
}

}  // namespace

std::string archive_json(const NodeResult& r) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : r.archive.entries()) {
    ChipConfig c = e.cfg;
    j.push_back({{"episode", e.episode},
                 {"mesh", fmt::format("{}x{}", c.mesh_w, c.mesh_h)},
                 {"tile", nlohmann::json::parse(to_json(c))["tiles"][0]},
                 {"knobs", knobs_json(e.knobs)},
                 {"ppa", ppa_json(e.ppa)}});
  }
  return j.dump(1) + "\n";
}

std::string best_config_json(const NodeResult& r) {
  nlohmann::json j;
  j["process_node_nm"] = r.node_nm;
  j["strategy"] = std::string(to_string(r.strategy));
  j["feasible_found"] = r.feasible_found;
  j["episode"] = r.best.episode;
  j["config"] = compact_config(r.best.cfg);
  j["knobs"] = knobs_json(r.best.knobs);
  j["ppa"] = ppa_json(r.best_eval.ppa);
  return j.dump(1) + "\n";
}

std::string ppa_by_node_csv(const std::vector<NodeResult>& rs) {
  std::string s = ppa_csv_header() + ",feasible,binding\n";
  for (const auto& r : rs)
    s += ppa_csv_row(r.node_nm, r.best.cfg, r.best_eval.ppa) +
         fmt::format(",{},{}\n", r.best_eval.ppa.feasible ? 1 : 0, to_string(r.best_eval.ppa.binding));
  return s;
}

std::string mesh_scaling_csv(const std::vector<NodeResult>& rs) {
  std::string s =
      "process_node,mesh_w,mesh_h,cores,wmem_total_mb,wmem_gini,wmem_variation,dmem_variation,"
      "hazard_score\n";
  for (const auto& r : rs) {
    const auto& h = r.heterogeneous;
    std::vector<double> wm, dm;
    for (const auto& t : h.tiles) {
      wm.push_back(t.wmem_kb);
      dm.push_back(t.dmem_kb);
    }
    double total = 0;
    for (double x : wm) total += x;
    s += fmt::format("{}nm,{},{},{},{},{},{},{},{}\n", r.node_nm, h.mesh_w, h.mesh_h, h.n_tiles(),
                     num(total / 1024.0), num(wm.empty() ? 0.0 : gini(wm)),
                     num(wm.empty() ? 0.0 : variation(wm)), num(dm.empty() ? 0.0 : variation(dm)),
                     num(r.best_eval.ppa.hazard_score));
  }
  return s;
}

std::string training_stats_csv(const std::vector<NodeResult>& rs) {
  std::string s =
      "process_node,strategy,episodes,feasible_count,unique_configs,unique_feasible,best_score,"
      "convergence_episode,wm_forwards,pareto_size\n";
  for (const auto& r : rs) {
    std::vector<double> best;
    for (const auto& x : r.log) best.push_back(x.best_score);
    const long conv = convergence_episode(best, std::max<int>(10, static_cast<int>(best.size()) / 10), 1e-4);
    s += fmt::format("{}nm,{},{},{},{},{},{},{},{},{}\n", r.node_nm, to_string(r.strategy), r.evaluations,
                     r.feasible_count, r.unique_configs, r.unique_feasible, num(r.best_score), conv,
                     r.wm_forwards, r.archive.size());
  }
  return s;
}

BaselineRow baseline_row(const NodeResult& r, std::uint64_t seed) {
  BaselineRow b;
  b.strategy = r.strategy;
  b.seed = seed;
  b.best_score = r.best_score;
  b.feasible_count = r.feasible_count;
  b.unique_feasible = r.unique_feasible;
  b.tok_s = r.best_eval.ppa.tok_s;
  b.power_mw = r.best_eval.ppa.power_mw;
  b.area_mm2 = r.best_eval.ppa.area_mm2;
  b.perf_gops = r.best_eval.ppa.perf_gops;
  return b;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string search_comparison_csv(const std::vector<BaselineRow>& rows) {
  std::string s = "strategy,seed,best_score,feasible_count,unique_feasible,tok_s,power_mw,area_mm2,perf_gops\n";
  for (const auto& r : rows)
    s += fmt::format("{},{},{},{},{},{},{},{},{}\n", to_string(r.strategy), r.seed, num(r.best_score),
                     r.feasible_count, r.unique_feasible, num(r.tok_s), num(r.power_mw),
                     num(r.area_mm2), num(r.perf_gops));
  for (Strategy st : {Strategy::Sac, Strategy::Random, Strategy::Grid}) {
    std::vector<double> b, f, u, t, p, a, g;
    for (const auto& r : rows) {
      if (r.strategy != st) continue;
      b.push_back(r.best_score);
      f.push_back(r.feasible_count);
      u.push_back(r.unique_feasible);
      t.push_back(r.tok_s);
      p.push_back(r.power_mw);
      a.push_back(r.area_mm2);
      g.push_back(r.perf_gops);
    }
    if (b.empty()) continue;
    s += fmt::format("{},median,{},{},{},{},{},{},{}\n", to_string(st), num(median(b)), num(median(f)),
                     num(median(u)), num(median(t)), num(median(p)), num(median(a)), num(median(g)));
  }
  return s;
}

void write_text(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << content;
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ValidationError("cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string run_id(std::uint64_t seed, const std::string& resolved_config) {
  return fmt::format("s{}-{:08x}", seed, static_cast<std::uint32_t>(fnv1a64(resolved_config)));
}

void write_node_artifacts(const fs::path& dir, const NodeResult& r) {
  write_text(dir / "training_log.csv", training_log_csv(r));
  write_text(dir / "episodes.csv", episodes_csv(r));
  write_text(dir / "archive.json", archive_json(r));
  write_text(dir / "best_config.json", best_config_json(r));
  write_text(dir / "tiles" / "homogeneous.json", tiles_json(r.best.cfg));
  write_text(dir / "tiles" / "heterogeneous.json", tiles_json(r.heterogeneous));
  const RegionReport rep = region_stats(r.heterogeneous);
  std::string s = "region,tiles,wmem_mean_kb,wmem_std_kb,dflit_mean,dflit_std,fetch_mean,fetch_std\n";
  for (std::size_t i = 0; i < rep.regions.size(); ++i) {
    const auto& g = rep.regions[i];
    s += fmt::format("{},{},{},{},{},{},{},{}\n", i, g.tiles, num(g.wmem_mean), num(g.wmem_std),
                     num(g.dflit_mean), num(g.dflit_std), num(g.fetch_mean), num(g.fetch_std));
  }
  write_text(dir / "wmem_regions.csv", s);
  std::string h = "bin_lo_kb,bin_hi_kb,count\n";
  for (std::size_t i = 0; i < rep.hist_counts.size(); ++i)
    h += fmt::format("{},{},{}\n", num(rep.hist_edges[i]), num(rep.hist_edges[i + 1]), rep.hist_counts[i]);
  h += fmt::format("# p50={} p90={} gini={}\n", num(rep.p50), num(rep.p90), num(rep.gini));
  write_text(dir / "wmem_hist.csv", h);
}

std::vector<NodeMetrics> parse_ppa_by_node(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("ppa_by_node.csv is empty");
  std::vector<NodeMetrics> rows;
  int ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() < 9) throw ParseError(fmt::format("ppa_by_node.csv line {}: expected >= 9 fields", ln));
    try {
      NodeMetrics m;
      m.node_nm = std::stoi(f[0]);
      m.power_mw = std::stod(f[4]);
      m.perf_gops = std::stod(f[5]);
      m.area_mm2 = std::stod(f[6]);
      m.score = std::stod(f[7]);
      m.tok_s = std::stod(f[8]);
      rows.push_back(m);
    } catch (const std::exception&) {
      throw ParseError(fmt::format("ppa_by_node.csv line {}: bad number", ln));
    }
  }
  if (rows.empty()) throw ValidationError("ppa_by_node.csv has no rows");
  return rows;
}

void write_analysis(const fs::path& dir) {
  const fs::path in = dir / "ppa_by_node.csv";
  if (!fs::exists(in)) throw ValidationError(fmt::format("{} not found", in.string()));
  const auto rows = parse_ppa_by_node(read_text(in));

  std::string stats = "metric,k,c,r2,degenerate,points\n";
  for (int j = 0; j < kMetricCount; ++j) {
    std::vector<double> x, y;
    for (const auto& r : rows) {
      x.push_back(r.node_nm);
      y.push_back(r.values()[static_cast<std::size_t>(j)]);
    }
    const auto& name = kMetricNames[static_cast<std::size_t>(j)];
    try {
      const auto f = powerlaw_fit(x, y);
      stats += fmt::format("{},{},{},{},{},{}\n", name, num(f.k), num(f.c), num(f.r2), f.degenerate ? 1 : 0,
                           x.size());
    } catch (const ValidationError&) {
      stats += fmt::format("{},,,,,{}\n", name, x.size());
    }
  }
  write_text(dir / "statistical_analysis.csv", stats);

  std::string eff = "process_node,perf_per_power,tok_s_per_power,perf_per_area\n";
  for (const auto& r : rows) {
    try {
      const auto e = efficiency(r);
      eff += fmt::format("{}nm,{},{},{}\n", r.node_nm, num(e.perf_per_power), num(e.tok_s_per_power),
                         num(e.perf_per_area));
    } catch (const ValidationError&) {
      eff += fmt::format("{}nm,,,\n", r.node_nm);
    }
  }
  write_text(dir / "efficiency_metrics.csv", eff);

  const auto m = pearson_matrix(rows);
  std::string corr = "metric";
  for (const auto& n : kMetricNames) corr += "," + n;
  corr += "\n";
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    corr += kMetricNames[i];
    for (std::size_t j = 0; j < kMetricCount; ++j) corr += "," + num(m[i][j]);
    corr += "\n";
  }
  write_text(dir / "correlation_matrix.csv", corr);

  const auto rep = cross_node_report(rows);
  write_text(dir / "baseline_comparison.csv",
             fmt::format("best_node,worst_node,perf_ratio,tok_s_ratio,power_ratio,area_ratio\n"
                         "{}nm,{}nm,{},{},{},{}\n",
                         rep.best_nm, rep.worst_nm, num(rep.perf_ratio), num(rep.tok_s_ratio),
                         num(rep.power_ratio), num(rep.area_ratio)));
}

}  // namespace tccdse
