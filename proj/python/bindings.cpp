// Python bindings: workload generation, analytical evaluation, KV-cache
// arithmetic, scaling fits and single-node search.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tccdse/analysis.hpp"
#include "tccdse/arch.hpp"
#include "tccdse/artifacts.hpp"
#include "tccdse/graph.hpp"
#include "tccdse/kvcache.hpp"
#include "tccdse/procnode.hpp"
#include "tccdse/rlenv.hpp"
#include "tccdse/search.hpp"

namespace py = pybind11;
using namespace tccdse;

namespace {

py::dict ppa_dict(const PpaEstimate& p) {
  py::dict d;
  d["power_mw"] = p.power_mw;
  d["perf_gops"] = p.perf_gops;
  d["area_mm2"] = p.area_mm2;
  d["tok_s"] = p.tok_s;
  d["compute_ceiling"] = p.compute_ceiling;
  d["memory_ceiling"] = p.memory_ceiling;
  d["noc_ceiling"] = p.noc_ceiling;
  d["binding"] = std::string(to_string(p.binding));
  d["score"] = p.score;
  d["feasible"] = p.feasible;
  d["placed"] = p.placed;
  d["cores"] = p.cores;
  return d;
}

Workload workload_from(const std::string& graph_json) { return make_workload(from_json(graph_json)); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Analytical PPA model and RL-driven design-space search for tiled transformer accelerators";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def("presets", &preset_names);
  m.def(
      "gen_workload",
      [](const std::string& name) { return to_json(gen_transformer(preset(name))); },
      py::arg("preset") = "llama8b-toy", "Operator graph JSON for a named transformer preset.");
  m.def("process_nodes", [] {
    std::vector<int> out;
    for (const auto& n : builtin_table()) out.push_back(n.node_nm);
    return out;
  });

  m.def("kv_bytes_per_token", [](std::int64_t layers, std::int64_t kv_heads, std::int64_t d_head,
                                 std::int64_t elem_bytes) {
    KvSpec s;
    s.n_layers = layers;
    s.n_kv_heads = kv_heads;
    s.d_head = d_head;
    s.elem_bytes = elem_bytes;
    return kv_bytes_per_token(s);
  });
  m.def("compaction_factor", &compaction_factor, py::arg("b_orig"), py::arg("b_quant"), py::arg("seq_len"),
        py::arg("mean_window"));
  m.def("page_count", &page_count);

  m.def(
      "evaluate_initial",
      [](const std::string& graph_json, int node_nm) {
        const auto w = workload_from(graph_json);
        const auto node = find_node(builtin_table(), node_nm);
        const auto c = default_constraints(node, w);
        const auto cfg = initial_config(w, node);
        auto ev = evaluate(w, cfg, node, decode_knobs(ActionVector{}));
        ev.ppa.score = ppa_score(ev.ppa, c.ranges, c.weights);
        ev.ppa.feasible = feasible(ev.ppa, c);
        py::dict d = ppa_dict(ev.ppa);
        d["config"] = to_json(cfg);
        return d;
      },
      py::arg("graph_json"), py::arg("node_nm"), "PPA of the default starting configuration at one node.");

  m.def(
      "powerlaw_fit",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto f = powerlaw_fit(x, y);
        return py::make_tuple(f.k, f.c, f.r2);
      },
      "Fit y = c * x^k; returns (k, c, r2).");

  m.def(
      "run_node",
      [](const std::string& graph_json, int node_nm, int budget, std::uint64_t seed, const std::string& strategy) {
        const auto w = workload_from(graph_json);
        const auto node = find_node(builtin_table(), node_nm);
        const auto c = default_constraints(node, w);
        NodeResult r;
        {
          py::gil_scoped_release release;
          r = run_node(w, node, c, default_search_config(budget), seed, parse_strategy(strategy));
        }
        py::dict d;
        d["best_score"] = r.best_score;
        d["feasible_found"] = r.feasible_found;
        d["feasible_count"] = r.feasible_count;
        d["evaluations"] = r.evaluations;
        d["pareto_size"] = r.archive.size();
        d["best"] = ppa_dict(r.best.ppa);
        d["best_config"] = best_config_json(r);
        d["training_log"] = training_log_csv(r);
        std::vector<double> best;
        for (const auto& row : r.log) best.push_back(row.best_score);
        d["best_so_far"] = best;
        return d;
      },
      py::arg("graph_json"), py::arg("node_nm"), py::arg("budget") = 200, py::arg("seed") = 0,
      py::arg("strategy") = "sac", "Search one process node and summarize the result.");
}
