#include "tccdse/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>

namespace tccdse {

using nn::Mat;
using nn::Vec;

bool dominates(const PpaEstimate& a, const PpaEstimate& b) {
  const bool ge = a.perf_gops >= b.perf_gops && a.power_mw <= b.power_mw && a.area_mm2 <= b.area_mm2;
  const bool strict = a.perf_gops > b.perf_gops || a.power_mw < b.power_mw || a.area_mm2 < b.area_mm2;
  return ge && strict;
}

bool ParetoArchive::insert(const ArchiveEntry& e) {
  for (const auto& m : entries_) {
    if (dominates(m.ppa, e.ppa)) return false;
    if (m.ppa.perf_gops == e.ppa.perf_gops && m.ppa.power_mw == e.ppa.power_mw &&
        m.ppa.area_mm2 == e.ppa.area_mm2)
      return false;
  }
  std::erase_if(entries_, [&](const ArchiveEntry& m) { return dominates(e.ppa, m.ppa); });
  entries_.push_back(e);
  return true;
}

std::size_t select_final(const std::vector<ArchiveEntry>& f, const PpaWeights& w) {
  if (f.empty()) throw std::invalid_argument("select_final: empty frontier");
  const auto k = normalize_weights(w);
  double pmin = f[0].ppa.perf_gops, pmax = pmin, wmin = f[0].ppa.power_mw, wmax = wmin;
  double amin = f[0].ppa.area_mm2, amax = amin;
  for (const auto& e : f) {
    pmin = std::min(pmin, e.ppa.perf_gops);
    pmax = std::max(pmax, e.ppa.perf_gops);
    wmin = std::min(wmin, e.ppa.power_mw);
    wmax = std::max(wmax, e.ppa.power_mw);
    amin = std::min(amin, e.ppa.area_mm2);
    amax = std::max(amax, e.ppa.area_mm2);
  }
  // A constant objective normalizes to 0 for every entry.
  auto n = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };
  std::size_t best = 0;
  double best_s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto& p = f[i].ppa;
    const double s = k.beta * n(p.power_mw, wmin, wmax) + k.gamma * n(p.area_mm2, amin, amax) +
                     k.alpha * (1.0 - n(p.perf_gops, pmin, pmax));
    if (i == 0) {
      best_s = s;
      continue;
    }
    const auto& b = f[best].ppa;
    if (s < best_s || (s == best_s && (p.power_mw < b.power_mw ||
                                        (p.power_mw == b.power_mw && p.area_mm2 < b.area_mm2)))) {
      best = i;
      best_s = s;
    }
  }
  return best;
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Sac: return "sac";
    case Strategy::Random: return "random";
    case Strategy::Grid: return "grid";
  }
  return "?";
}

Strategy parse_strategy(std::string_view s) {
  if (s == "sac") return Strategy::Sac;
  if (s == "random") return Strategy::Random;
  if (s == "grid") return Strategy::Grid;
  throw ValidationError(fmt::format("unknown strategy '{}' (expected sac, random or grid)", s));
}

SearchConfig default_search_config(int budget) {
  SearchConfig c;
  c.budget = budget;
  c.sac.warmup = std::clamp(budget / 5, 1, 1000);
  c.sac.eps_horizon = std::max(budget, 1);
  return c;
}

std::string config_key(const ChipConfig& c) {
  std::string k = fmt::format("{}x{}|{}x{}|{}|{:.6g}|{}|{}|{}|{}", c.mesh_w, c.mesh_h, c.sc_x, c.sc_y,
                              c.dflit_bits, c.f_clk, static_cast<int>(c.precision_mode),
                              static_cast<int>(c.kv_strategy), c.kv_window, c.batch);
  const bool uniform = std::all_of(c.tiles.begin(), c.tiles.end(),
                                   [&](const TccConfig& t) { return t == c.tiles.front(); });
  const std::size_t n = uniform ? std::min<std::size_t>(c.tiles.size(), 1) : c.tiles.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = c.tiles[i];
    k += fmt::format("|{},{},{},{},{},{},{},{},{},{}", t.fetch_size, t.stanum, t.vlen_bits, t.dmem_kb,
                     t.wmem_kb, t.imem_kb, t.xr_wp, t.vr_wp, t.xdpnum, t.vdpnum);
  }
  return k;
}

namespace {

Vec to_vec(const SubsetVector& s) {
  Vec v(kSubsetDim);
  for (int i = 0; i < kSubsetDim; ++i) v[i] = s[static_cast<std::size_t>(i)];
  return v;
}

Vec ppa_target(const PpaEstimate& p, const Constraints& c) {
  const auto m = normalize(p, c.ranges);
  Vec y(3);
  y[kHeadPower] = m.power;
  y[kHeadPerf] = m.perf;
  y[kHeadArea] = m.area;
  return y;
}

// Shared bookkeeping for every strategy.
struct Tracker {
  const Constraints& c;
  NodeResult& res;
  std::unordered_set<std::string> seen, seen_feasible;
  double best_reward = -std::numeric_limits<double>::infinity();
  int since_improve = 0;

  void record(long ep, const ChipConfig& cfg, const PartitionKnobs& knobs, const Evaluation& ev,
              const RewardParts& r, LogRow row) {
    const auto& p = ev.ppa;
    ++res.evaluations;
    const std::string key = config_key(cfg);
    row.new_config = seen.insert(key).second;
    if (p.feasible) {
      ++res.feasible_count;
      if (seen_feasible.insert(key).second) ++res.unique_feasible;
      res.feasible_found = true;
      res.archive.insert({cfg, knobs, p, ep});
      if (p.score < res.best_score) {
        res.best_score = p.score;
        since_improve = 0;
      } else {
        ++since_improve;
      }
    } else {
      ++since_improve;
    }
    if (!res.feasible_found && r.total > best_reward) {
      best_reward = r.total;
      res.best = {cfg, knobs, p, ep};
    }
    row.episode = ep;
    row.reward = r.total;
    row.ppa_score = p.score;
    row.feasible = p.feasible;
    row.best_score = res.best_score;
    row.power_mw = p.power_mw;
    row.perf_gops = p.perf_gops;
    row.area_mm2 = p.area_mm2;
    row.tok_s = p.tok_s;
    row.cores = p.cores;
    row.binding = p.binding;
    res.log.push_back(row);
    res.unique_configs = static_cast<int>(seen.size());
  }
};

void finalize(NodeResult& res, const Workload& w, const ProcessNode& node, const Constraints& c,
              const ModelOptions& opt) {
  if (!res.archive.empty()) res.best = res.archive.entries()[select_final(res.archive.entries(), c.weights)];
  if (res.evaluations == 0) return;
  res.best_eval = evaluate(w, res.best.cfg, node, res.best.knobs, opt);
  res.best_eval.ppa.feasible = feasible(res.best_eval.ppa, c);
  res.best_eval.ppa.score = ppa_score(res.best_eval.ppa, c.ranges, c.weights);
  res.heterogeneous =
      res.best_eval.ppa.placed ? derive_heterogeneous(res.best.cfg, res.best_eval.placement) : res.best.cfg;
}

// Uniformly sampled minibatch of replay indices.
std::vector<std::size_t> uniform_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(k);
  for (auto& i : idx) i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return idx;
}

}  // namespace

NodeResult run_node(const Workload& w, const ProcessNode& node, const Constraints& c,
                    const SearchConfig& cfg, std::uint64_t seed, Strategy strategy) {
  if (strategy == Strategy::Grid) return grid_search(w, node, c, cfg.budget, cfg.model);
  if (cfg.budget < 1) throw ValidationError("budget must be >= 1");
  const std::uint64_t nseed = mix64(seed ^ static_cast<std::uint64_t>(node.node_nm));
  NodeResult res;
  res.node_nm = node.node_nm;
  res.strategy = strategy;
  Tracker tr{c, res, {}, {}};

  DesignEnv env(w, node, c, cfg.model);
  SacConfig sc = cfg.sac;
  sc.state_dim = kSubsetDim;
  sc.cont_dim = kContDim;
  sc.disc_heads = kDiscDim;
  sc.disc_choices = kDiscChoices;
  SacAgent agent(sc, nseed);
  WorldModel wm(kSubsetDim, kContDim, nseed);
  SurrogateModel sur(cfg.surrogate, nseed);
  Rng rng_policy = substream(nseed, "policy");
  Rng rng_buffer = substream(nseed, "buffer");
  Rng rng_mpc = substream(nseed, "mpc");
  Rng rng_model = substream(nseed, "models");
  Rng rng_random = substream(nseed, "baseline.random");
  const int ni = node_index(node.node_nm);
  const PpaSlice slice = subset_ppa_slice();
  const double p_lim = (c.p_max - c.ranges.power_min) / (c.ranges.power_max - c.ranges.power_min);
  const double a_lim = (c.a_max - c.ranges.area_min) / (c.ranges.area_max - c.ranges.area_min);
  std::vector<Vec> sur_x, sur_y;
  SacStats last;

  const PolicyMean policy_mean = [&](const Mat& s) -> Mat {
    return agent.heads(s).mu.array().tanh().matrix();
  };
  const StateReward sr = [&](const Vec& s) {
    return surrogate_reward(s[slice.perf], s[slice.power], s[slice.area]);
  };

  for (long t = 0; t < cfg.budget; ++t) {
    const Vec s = to_vec(subset(env.state()));
    LogRow row;
    PolicyAction pa = strategy == Strategy::Random ? agent.uniform_action(rng_random)
                                                   : agent.select_action(s, rng_policy, t);
    if (strategy == Strategy::Sac && cfg.use_mpc && t >= sc.warmup &&
        mpc_active(agent.epsilon().eps, wm, cfg.mpc)) {
      const auto plan = mpc_plan(policy_mean, wm, s, sr, cfg.mpc, rng_mpc);
      res.wm_forwards += plan.wm_forwards;
      pa.cont = blend(plan.action, pa.cont, kTccBegin, kTccEnd);
      row.mpc = true;
    }
    if (strategy == Strategy::Sac && cfg.use_surrogate && sur.gate_open(ni)) {
      const Vec pred = sur.predict(s, pa.cont, ni);
      if (pred[kHeadPower] > p_lim || pred[kHeadArea] > a_lim) {
        // Predicted violation: fall back to the deterministic policy with no mesh growth.
        pa = agent.act(s, rng_policy, true);
        for (auto& d : pa.disc) d = std::min(d, kDiscChoices / 2);
        row.screened = true;
      }
    }
    ActionVector av;
    for (int i = 0; i < kContDim; ++i) av.cont[static_cast<std::size_t>(i)] = pa.cont[i];
    for (int i = 0; i < kDiscDim; ++i)
      av.disc[static_cast<std::size_t>(i)] = pa.disc[static_cast<std::size_t>(i)] - kDiscChoices / 2;

    const EnvStep st = env.step(av);
    const Vec s2 = to_vec(subset(st.next_state));

    if (strategy == Strategy::Sac) {
      const Vec truth = ppa_target(st.eval.ppa, c);
      sur.observe_residual(ni, sur.predict(s, pa.cont, ni), truth);
      sur_x.push_back(sur.features(s, pa.cont, ni));
      sur_y.push_back(truth);
      agent.store({s, pa.cont, pa.disc, st.reward.total, s2, t + 1 == cfg.budget});

      const auto n = agent.buffer().size();
      const auto mb = static_cast<std::size_t>(cfg.model_batch);
      if (n >= std::min<std::size_t>(mb, 8)) {
        const auto idx = uniform_indices(n, mb, rng_model);
        Mat S(kSubsetDim, static_cast<Eigen::Index>(mb)), A(kContDim, static_cast<Eigen::Index>(mb)),
            S2(kSubsetDim, static_cast<Eigen::Index>(mb));
        Mat X(sur.input_dim(), static_cast<Eigen::Index>(mb)), Y(3, static_cast<Eigen::Index>(mb));
        const auto sidx = uniform_indices(sur_x.size(), mb, rng_model);
        for (std::size_t k = 0; k < mb; ++k) {
          const auto& trn = agent.buffer().at(idx[k]);
          S.col(static_cast<Eigen::Index>(k)) = trn.s;
          A.col(static_cast<Eigen::Index>(k)) = trn.a;
          S2.col(static_cast<Eigen::Index>(k)) = trn.s2;
          X.col(static_cast<Eigen::Index>(k)) = sur_x[sidx[k]];
          Y.col(static_cast<Eigen::Index>(k)) = sur_y[sidx[k]];
        }
        wm.train_step(S, A, S2);
        sur.train_step(X, Y);
      }
      if (t >= sc.warmup) last = agent.update(rng_buffer);
    }

    row.epsilon = strategy == Strategy::Sac ? agent.epsilon().eps : 1.0;
    row.alpha = last.alpha;
    row.critic_loss = last.critic_loss;
    row.actor_loss = last.actor_loss;
    row.buffer_size = agent.buffer().size();
    tr.record(t, st.cfg, st.knobs, st.eval, st.reward, row);
    if (strategy == Strategy::Sac)
      agent.epsilon().step(res.feasible_found, tr.since_improve >= cfg.stuck_window);
  }
  finalize(res, w, node, c, cfg.model);
  return res;
}

NodeResult random_search(const Workload& w, const ProcessNode& node, const Constraints& c,
                         int budget, std::uint64_t seed) {
  SearchConfig cfg = default_search_config(budget);
  // The random walk never trains, so keep the unused networks small.
  cfg.sac.hidden = {8};
  return run_node(w, node, c, cfg, seed, Strategy::Random);
}

NodeResult grid_search(const Workload& w, const ProcessNode& node, const Constraints& c, int budget,
                       const ModelOptions& opt) {
  if (budget < 1) throw ValidationError("budget must be >= 1");
  NodeResult res;
  res.node_nm = node.node_nm;
  res.strategy = Strategy::Grid;
  Tracker tr{c, res, {}, {}};
  static const int sides[] = {1, 2, 4, 8, 16, 32, 64};
  static const int vlens[] = {128, 256, 512, 1024, 2048};
  static const int dmems[] = {16, 128, 256, 384, 512};
  static const int fetches[] = {1, 4, 8, 12, 16};
  const long n_side = 7, n_v = 5, n_d = 5, n_f = 5;
  const long total = n_side * n_side * n_v * n_d * n_f;
  const long count = std::min<long>(budget, total);
  const PartitionKnobs knobs = decode_knobs(ActionVector{});
  for (long e = 0; e < count; ++e) {
    // Evenly strided walk through the mixed-radix lattice.
    long i = count < total ? e * total / count : e;
    const int f = fetches[i % n_f];
    i /= n_f;
    const int d = dmems[i % n_d];
    i /= n_d;
    const int v = vlens[i % n_v];
    i /= n_v;
    const int mh = sides[i % n_side];
    i /= n_side;
    const int mw = sides[i % n_side];
    ChipConfig cfg;
    cfg.mesh_w = mw;
    cfg.mesh_h = mh;
    cfg.sc_x = (mw + 1) / 2;
    cfg.sc_y = (mh + 1) / 2;
    cfg.dflit_bits = 1024;
    cfg.f_clk = node.f_clk_max / 2;
    cfg.precision_mode = Precision::FP16;
    TccConfig t;
    t.fetch_size = f;
    t.vlen_bits = v;
    t.dmem_kb = d;
    t.stanum = 16;
    t.imem_kb = 64;
    t.xr_wp = t.vr_wp = t.xdpnum = t.vdpnum = 8;
    const int wmax = wmem_upper_kb(static_cast<double>(w.graph.w_total), cfg.n_tiles());
    t.wmem_kb = (256 + wmax) / 2 / limits::kBankKb * limits::kBankKb;
    set_uniform_tiles(cfg, t);
    Evaluation ev = evaluate(w, cfg, node, knobs, opt);
    ev.ppa.feasible = feasible(ev.ppa, c);
    ev.ppa.score = ppa_score(ev.ppa, c.ranges, c.weights);
    LogRow row;
    row.epsilon = 0;
    tr.record(e, cfg, knobs, ev, reward(ev.ppa, c), row);
  }
  finalize(res, w, node, c, opt);
  return res;
}

RunAllResult run_all(const Workload& w, const std::vector<ProcessNode>& nodes,
                     const std::vector<Constraints>& constraints, const SearchConfig& cfg,
                     std::uint64_t seed, int jobs, Strategy strategy) {
  if (constraints.size() != nodes.size())
    throw ValidationError("run_all: one constraint set per node is required");
  RunAllResult out;
  out.nodes.resize(nodes.size());
  auto work = [&](std::size_t i) {
    out.nodes[i] = run_node(w, nodes[i], constraints[i], cfg, seed, strategy);
  };
  const std::size_t nj = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, nodes.size());
  if (nj <= 1) {
    for (std::size_t i = 0; i < nodes.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t j = 0; j < nj; ++j)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < nodes.size(); i = next++) work(i);
      });
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < out.nodes.size(); ++i)
    if (out.nodes[i].feasible_found &&
        (out.best < 0 || out.nodes[i].best_score < out.nodes[static_cast<std::size_t>(out.best)].best_score))
      out.best = static_cast<int>(i);
  return out;
}

bool convergence_check(const std::vector<double>& b, int window, double tol) {
  if (window < 1 || b.size() <= static_cast<std::size_t>(window)) return false;
  const double then = b[b.size() - 1 - static_cast<std::size_t>(window)];
  const double now = b.back();
  if (std::isinf(then) && std::isinf(now)) return true;
  return then - now < tol;
}

long convergence_episode(const std::vector<double>& b, int window, double tol) {
  for (std::size_t n = 1; n <= b.size(); ++n)
    if (convergence_check(std::vector<double>(b.begin(), b.begin() + static_cast<long>(n)), window, tol))
      return static_cast<long>(n) - 1;
  return -1;
}

}  // namespace tccdse
