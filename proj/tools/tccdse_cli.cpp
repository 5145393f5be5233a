#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tccdse/artifacts.hpp"
#include "tccdse/graph.hpp"
#include "tccdse/procnode.hpp"
#include "tccdse/rlenv.hpp"
#include "tccdse/search.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tccdse;

namespace {

constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Values that may come from flags, a --config file, or built-in defaults.
struct RunFlags {
  std::string config;
  std::string workload;
  std::vector<int> nodes;
  int budget = 500;
  std::uint64_t seed = 0;
  std::string constraints;
  std::string out = "out";
  std::string mode = "hp";
  int jobs = 1;
  std::string table;
  bool no_mpc = false;
  bool no_surrogate = false;
};

struct Given {
  CLI::Option* workload = nullptr;
  CLI::Option* nodes = nullptr;
  CLI::Option* budget = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* constraints = nullptr;
  CLI::Option* out = nullptr;
  CLI::Option* mode = nullptr;
  CLI::Option* jobs = nullptr;
  CLI::Option* table = nullptr;
};

bool set_on_cli(CLI::Option* o) { return o && o->count() > 0; }

void add_run_flags(CLI::App* sc, RunFlags& f, Given& g, bool multi_node) {
  sc->add_option("--config", f.config, "JSON file with default values for these flags")
      ->check(CLI::ExistingFile);
  g.workload = sc->add_option("--workload", f.workload, "Operator graph JSON (from gen-workload)");
  if (multi_node)
    g.nodes = sc->add_option("--nodes", f.nodes, "Process nodes in nm, e.g. 3,7,28")->delimiter(',');
  else
    g.nodes = sc->add_option("--node", f.nodes, "Process node in nm")->expected(1);
  g.budget = sc->add_option("--budget", f.budget, "Episodes per node")->check(CLI::PositiveNumber);
  g.seed = sc->add_option("--seed", f.seed, "Master seed");
  g.constraints = sc->add_option("--constraints", f.constraints, "Constraints JSON")->check(CLI::ExistingFile);
  g.out = sc->add_option("--out", f.out, "Output root directory");
  g.mode = sc->add_option("--mode", f.mode, "Objective weights: hp or lp")->check(CLI::IsMember({"hp", "lp"}));
  g.jobs = sc->add_option("--jobs", f.jobs, "Nodes evaluated concurrently")->check(CLI::PositiveNumber);
  g.table = sc->add_option("--node-table", f.table, "Process-node CSV overriding the built-in table")
                ->check(CLI::ExistingFile);
  sc->add_flag("--no-mpc", f.no_mpc, "Disable model-predictive planning");
  sc->add_flag("--no-surrogate", f.no_surrogate, "Disable the surrogate pre-filter");
}

// Fills values that were not given on the command line from the config file.
void apply_config_file(RunFlags& f, const Given& g) {
  if (f.config.empty()) return;
  json j;
  try {
    j = json::parse(read_text(f.config));
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("{}: {}", f.config, e.what()));
  }
  if (!j.is_object()) throw UsageError(fmt::format("{}: expected a JSON object", f.config));
  try {
    if (!set_on_cli(g.workload) && j.contains("workload")) f.workload = j["workload"].get<std::string>();
    if (!set_on_cli(g.nodes) && j.contains("nodes")) f.nodes = j["nodes"].get<std::vector<int>>();
    if (!set_on_cli(g.budget) && j.contains("budget")) f.budget = j["budget"].get<int>();
    if (!set_on_cli(g.seed) && j.contains("seed")) f.seed = j["seed"].get<std::uint64_t>();
    if (!set_on_cli(g.constraints) && j.contains("constraints"))
      f.constraints = j["constraints"].get<std::string>();
    if (!set_on_cli(g.out) && j.contains("out")) f.out = j["out"].get<std::string>();
    if (!set_on_cli(g.mode) && j.contains("mode")) f.mode = j["mode"].get<std::string>();
    if (!set_on_cli(g.jobs) && j.contains("jobs")) f.jobs = j["jobs"].get<int>();
    if (!set_on_cli(g.table) && j.contains("node_table")) f.table = j["node_table"].get<std::string>();
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("{}: {}", f.config, e.what()));
  }
  if (f.mode != "hp" && f.mode != "lp") throw UsageError(fmt::format("mode must be hp or lp, got '{}'", f.mode));
  if (f.budget <= 0) throw UsageError("budget must be positive");
  if (f.jobs <= 0) throw UsageError("jobs must be positive");
}

std::string valid_node_list() {
  std::string s;
  for (int n : valid_nodes()) s += (s.empty() ? "" : ", ") + std::to_string(n);
  return s;
}

void check_nodes(const std::vector<int>& nodes) {
  if (nodes.empty()) throw UsageError(fmt::format("no process node given (valid: {})", valid_node_list()));
  for (int n : nodes) {
    bool ok = false;
    for (int v : valid_nodes()) ok = ok || v == n;
    if (!ok) throw UsageError(fmt::format("unknown process node {} (valid: {})", n, valid_node_list()));
  }
}

struct Prepared {
  Workload workload;
  std::vector<ProcessNode> nodes;
  std::vector<Constraints> constraints;
  SearchConfig search;
  json resolved;
};

Prepared prepare(const RunFlags& f, const Given& g) {
  if (f.workload.empty()) throw UsageError("--workload is required");
  check_nodes(f.nodes);
  Prepared p;
  const auto graph = load_graph(f.workload);
  p.workload = make_workload(graph);
  const auto table = f.table.empty() ? builtin_table() : load_table_csv(f.table);
  const Mode mode = f.mode == "lp" ? Mode::LowPower : Mode::HighPerformance;
  const std::string ctext = f.constraints.empty() ? std::string() : read_text(f.constraints);
  json cj = json::object();
  for (int nm : f.nodes) {
    const ProcessNode& node = find_node(table, nm);
    p.nodes.push_back(node);
    Constraints c = default_constraints(node, p.workload, mode);
    if (!ctext.empty()) {
      c = constraints_from_json(ctext, c);
      // An explicit --mode beats weights from the constraints file.
      if (set_on_cli(g.mode)) c.weights = mode_weights(mode);
    }
    p.constraints.push_back(c);
    cj[fmt::format("{}nm", nm)] = json::parse(to_json(c));
  }
  p.search = default_search_config(f.budget);
  p.search.use_mpc = !f.no_mpc;
  p.search.use_surrogate = !f.no_surrogate;

  // Everything that affects results; out and jobs are left out on purpose.
  p.resolved = {{"workload", f.workload},
                {"workload_hash", fmt::format("{:016x}", fnv1a64(to_json(graph)))},
                {"nodes", f.nodes},
                {"budget", f.budget},
                {"seed", f.seed},
                {"mode", f.mode},
                {"node_table", f.table.empty() ? json("builtin") : json(table_to_csv(table))},
                {"use_mpc", p.search.use_mpc},
                {"use_surrogate", p.search.use_surrogate},
                {"warmup", p.search.sac.warmup},
                {"constraints", cj}};
  return p;
}

int cmd_explore(const RunFlags& f, const Given& g) {
  Prepared p = prepare(f, g);
  const std::string resolved = p.resolved.dump(1);
  const fs::path dir = fs::path(f.out) / run_id(f.seed, resolved);
  fs::create_directories(dir);
  write_text(dir / "resolved_config.json", resolved + "\n");

  const auto res = run_all(p.workload, p.nodes, p.constraints, p.search, f.seed, f.jobs);
  bool any = false;
  for (const auto& r : res.nodes) {
    write_node_artifacts(dir / fmt::format("{}nm", r.node_nm), r);
    any = any || r.feasible_found;
    std::cerr << fmt::format("{:>2}nm  feasible={:<4} best_score={}  evals={}\n", r.node_nm, r.feasible_count,
                             num(r.best_score), r.evaluations);
  }
  write_text(dir / "ppa_by_node.csv", ppa_by_node_csv(res.nodes));
  write_text(dir / "mesh_scaling.csv", mesh_scaling_csv(res.nodes));
  write_text(dir / "training_stats.csv", training_stats_csv(res.nodes));
  std::cout << dir.string() << "\n";
  if (!any) std::cerr << "no feasible configuration found\n";
  return any ? 0 : 1;
}

int cmd_baseline(const RunFlags& f, const Given& g, const std::vector<std::string>& strategies, int seeds) {
  if (f.nodes.size() != 1) throw UsageError("baseline takes exactly one --node");
  Prepared p = prepare(f, g);
  std::vector<Strategy> ss;
  for (const auto& s : strategies) ss.push_back(parse_strategy(s));
  p.resolved["strategies"] = strategies;
  p.resolved["seeds"] = seeds;
  const std::string resolved = p.resolved.dump(1);
  const fs::path dir = fs::path(f.out) / ("baseline-" + run_id(f.seed, resolved));
  fs::create_directories(dir);
  write_text(dir / "resolved_config.json", resolved + "\n");

  std::vector<BaselineRow> rows;
  for (Strategy st : ss) {
    for (int i = 0; i < seeds; ++i) {
      const std::uint64_t s = f.seed + static_cast<std::uint64_t>(i);
      NodeResult r;
      if (st == Strategy::Grid)
        r = grid_search(p.workload, p.nodes[0], p.constraints[0], f.budget, p.search.model);
      else
        r = run_node(p.workload, p.nodes[0], p.constraints[0], p.search, s, st);
      rows.push_back(baseline_row(r, s));
      std::cerr << fmt::format("{:<6} seed={} best_score={} feasible={}\n", to_string(st), s, num(r.best_score),
                               r.feasible_count);
    }
  }
  write_text(dir / "search_comparison.csv", search_comparison_csv(rows));
  std::cout << dir.string() << "\n";
  return 0;
}

void print_state_table() {
  std::cout << "index,group,name,normalization,in_subset\n";
  for (const auto& r : state_table())
    std::cout << fmt::format("{},{},{},\"{}\",{}\n", r.index, r.group, r.name, r.scheme, r.in_subset ? 1 : 0);
}

void print_action_table() {
  std::cout << "index,group,name,mapping\n";
  for (const auto& r : action_table())
    std::cout << fmt::format("{},{},{},\"{}\"\n", r.index, r.group, r.name, r.mapping);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design-space exploration for token-streaming accelerators"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto* gen = app.add_subcommand("gen-workload", "Write a transformer operator graph as JSON");
  TransformerParams tp;
  std::string preset_name, precision = "fp16", gen_out;
  auto* o_layers = gen->add_option("--layers", tp.layers)->check(CLI::PositiveNumber);
  auto* o_hidden = gen->add_option("--hidden", tp.hidden)->check(CLI::PositiveNumber);
  auto* o_heads = gen->add_option("--heads", tp.heads)->check(CLI::PositiveNumber);
  auto* o_kv = gen->add_option("--kv-heads", tp.kv_heads)->check(CLI::PositiveNumber);
  auto* o_vocab = gen->add_option("--vocab", tp.vocab)->check(CLI::PositiveNumber);
  auto* o_seq = gen->add_option("--seq-len", tp.seq_len)->check(CLI::PositiveNumber);
  auto* o_ffn = gen->add_option("--ffn-multiplier", tp.ffn_multiplier)->check(CLI::PositiveNumber);
  auto* o_mult = gen->add_option("--multiple-of", tp.multiple_of)->check(CLI::PositiveNumber);
  auto* o_prec = gen->add_option("--precision", precision, "int4|int8|fp8|fp16|bf16|fp32");
  gen->add_option("--preset", preset_name, "Named shape: llama8b or llama8b-toy")
      ->check(CLI::IsMember(preset_names()));
  gen->add_option("--out", gen_out, "Output JSON path")->required();

  auto* explore = app.add_subcommand("explore", "Run the search on one or more process nodes");
  RunFlags ef;
  Given eg;
  add_run_flags(explore, ef, eg, true);

  auto* baseline = app.add_subcommand("baseline", "Compare search strategies on one node");
  RunFlags bf;
  Given bg;
  add_run_flags(baseline, bf, bg, false);
  std::vector<std::string> strategies = {"sac", "random", "grid"};
  int seeds = 1;
  baseline->add_option("--strategy", strategies, "Comma-separated subset of sac,random,grid")
      ->delimiter(',')
      ->check(CLI::IsMember({"sac", "random", "grid"}));
  baseline->add_option("--seeds", seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);

  auto* analyze = app.add_subcommand("analyze", "Cross-node statistics for an explore run");
  std::string in_dir;
  analyze->add_option("--in", in_dir, "Run directory produced by explore")->required();

  app.add_subcommand("describe-state", "Print the state index table as CSV");
  app.add_subcommand("describe-actions", "Print the action index table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) {
      const bool shaped = o_layers->count() && o_hidden->count();
      if (preset_name.empty() && !shaped) throw UsageError("gen-workload needs --preset or both --layers and --hidden");
      if (!preset_name.empty()) {
        TransformerParams base = preset(preset_name);
        // Explicit flags refine the preset.
        if (o_layers->count()) base.layers = tp.layers;
        if (o_hidden->count()) base.hidden = tp.hidden;
        if (o_heads->count()) base.heads = tp.heads;
        if (o_kv->count()) base.kv_heads = tp.kv_heads;
        if (o_vocab->count()) base.vocab = tp.vocab;
        if (o_seq->count()) base.seq_len = tp.seq_len;
        if (o_ffn->count()) base.ffn_multiplier = tp.ffn_multiplier;
        if (o_mult->count()) base.multiple_of = tp.multiple_of;
        if (o_prec->count()) base.precision = parse_precision(precision);
        tp = base;
      } else {
        tp.precision = parse_precision(precision);
      }
      const auto g = gen_transformer(tp);
      save_graph(g, gen_out);
      std::cout << fmt::format("{}: {} ops, {} params\n", gen_out, g.nodes.size(), transformer_param_count(tp));
      return 0;
    }
    if (*explore) {
      apply_config_file(ef, eg);
      return cmd_explore(ef, eg);
    }
    if (*baseline) {
      apply_config_file(bf, bg);
      if (bf.nodes.empty()) bf.nodes = {3};
      return cmd_baseline(bf, bg, strategies, seeds);
    }
    if (*analyze) {
      write_analysis(in_dir);
      std::cout << in_dir << "\n";
      return 0;
    }
    if (app.got_subcommand("describe-state")) {
      print_state_table();
      return 0;
    }
    if (app.got_subcommand("describe-actions")) {
      print_action_table();
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
