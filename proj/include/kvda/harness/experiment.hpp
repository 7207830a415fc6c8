#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "kvda/envs/registry.hpp"
#include "kvda/harness/csv.hpp"
#include "kvda/harness/stats.hpp"
#include "kvda/search/search.hpp"

namespace kvda {

struct AlgorithmSpec {
  std::string name;
  AbstractionMode mode;
  bool uses_eps_a;
  bool uses_eps_t;
};

inline AlgorithmSpec algorithm_spec(const std::string& name) {
  if (name == "uct") return {name, AbstractionMode::none, false, false};
  if (name == "oga") return {name, AbstractionMode::oga, false, false};
  if (name == "eps-oga") return {name, AbstractionMode::oga, true, true};
  if (name == "kvda") return {name, AbstractionMode::kvda, false, false};
  if (name == "eps-kvda") return {name, AbstractionMode::kvda, false, true};
  throw ConfigError("unknown algorithm '" + name + "' (expected uct, oga, eps-oga, kvda or eps-kvda)");
}

/// Parsed sweep description. Lists span a Cartesian grid; eps lists apply
/// only to the algorithms that take them, the others run with zero.
struct ExperimentConfig {
  nlohmann::json environment;  // registry object
  std::string base_dir = ".";  // for relative paths inside `environment`
  std::vector<std::string> algorithms;
  std::vector<std::size_t> budgets;
  std::vector<double> c_values{2.0};
  std::vector<double> eps_a_values{0.0};
  std::vector<double> eps_t_values{0.0};
  std::size_t episodes = 200;
  std::uint64_t seed = 0;
  std::uint32_t recency_threshold = 3;
  std::size_t threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct Cell {
  std::string algorithm;
  std::size_t budget = 0;
  double c = 2.0;
  double eps_a = 0.0;
  double eps_t = 0.0;
};

namespace detail {

inline double json_real(const nlohmann::json& v, const char* what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return INFINITY;
  }
  throw ConfigError(std::string(what) + " entries must be numbers or \"inf\"");
}

inline std::vector<double> json_reals(const nlohmann::json& v, const char* what) {
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& x : v) out.push_back(json_real(x, what));
  } else {
    out.push_back(json_real(v, what));
  }
  if (out.empty()) throw ConfigError(std::string(what) + " must not be empty");
  return out;
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  if (algorithms.empty()) throw ConfigError("no algorithms configured");
  if (budgets.empty()) throw ConfigError("no iteration budgets configured");
  if (episodes == 0) throw ConfigError("episodes must be at least 1");
  SearchParams p;
  p.recency_threshold = recency_threshold;
  for (const auto& a : algorithms) algorithm_spec(a);
  for (auto b : budgets) {
    p.iterations = b;
    p.validate();
  }
  for (double c : c_values) {
    p.exploration = c;
    p.validate();
  }
  for (double e : eps_a_values) {
    p.eps_a = e;
    p.validate();
  }
  for (double e : eps_t_values) {
    p.eps_t = e;
    p.validate();
  }
  make_environment(environment, base_dir);
}

/// Keys: environment (registry object or path to one), horizon and
/// search_horizon (override the environment's), algorithm or algorithms,
/// budgets, C, eps_a, eps_t (number, "inf" or list), episodes, seed,
/// recency_threshold, threads.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::string& base_dir = ".") {
  static const std::set<std::string> known{"environment", "horizon", "search_horizon", "algorithm",
                                           "algorithms", "budgets", "C", "eps_a", "eps_t", "episodes",
                                           "seed", "recency_threshold", "threads"};
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown experiment key '" + key + "'");
  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    if (!j.contains("environment")) throw ConfigError("experiment config needs 'environment'");
    const auto& e = j.at("environment");
    if (e.is_string()) {
      const std::string path = base_dir + "/" + e.get<std::string>();
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot open environment file '" + path + "'");
      c.environment = nlohmann::json::parse(in);
      const auto slash = path.find_last_of('/');
      c.base_dir = path.substr(0, slash);
    } else {
      c.environment = e;
    }
    if (j.contains("horizon")) c.environment["horizon"] = j.at("horizon");
    if (j.contains("search_horizon")) c.environment["search_horizon"] = j.at("search_horizon");
    if (j.contains("algorithm")) c.algorithms.push_back(j.at("algorithm").get<std::string>());
    if (j.contains("algorithms")) {
      for (const auto& a : j.at("algorithms")) c.algorithms.push_back(a.get<std::string>());
    }
    if (j.contains("budgets")) {
      const auto& b = j.at("budgets");
      if (b.is_array()) {
        for (const auto& x : b) c.budgets.push_back(x.get<std::size_t>());
      } else {
        c.budgets.push_back(b.get<std::size_t>());
      }
    }
    if (j.contains("C")) c.c_values = detail::json_reals(j.at("C"), "C");
    if (j.contains("eps_a")) c.eps_a_values = detail::json_reals(j.at("eps_a"), "eps_a");
    if (j.contains("eps_t")) c.eps_t_values = detail::json_reals(j.at("eps_t"), "eps_t");
    if (j.contains("episodes")) c.episodes = j.at("episodes").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("recency_threshold")) c.recency_threshold = j.at("recency_threshold").get<std::uint32_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<std::size_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("experiment config: ") + ex.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("experiment config '" + path + "': " + e.what());
  }
  const auto slash = path.find_last_of('/');
  return parse_experiment_config(j, slash == std::string::npos ? "." : path.substr(0, slash));
}

/// Grid in the order algorithm, budget, C, eps_a, eps_t.
inline std::vector<Cell> expand_grid(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (const auto& name : cfg.algorithms) {
    const auto spec = algorithm_spec(name);
    const std::vector<double> zero{0.0};
    const auto& ea = spec.uses_eps_a ? cfg.eps_a_values : zero;
    const auto& et = spec.uses_eps_t ? cfg.eps_t_values : zero;
    for (auto b : cfg.budgets)
      for (double c : cfg.c_values)
        for (double a : ea)
          for (double t : et) cells.push_back({name, b, c, a, t});
  }
  return cells;
}

inline SearchParams cell_params(const Cell& cell, const Environment& env, std::uint32_t recency_threshold) {
  SearchParams p;
  p.iterations = cell.budget;
  p.exploration = cell.c;
  p.mode = algorithm_spec(cell.algorithm).mode;
  p.eps_a = cell.eps_a;
  p.eps_t = cell.eps_t;
  p.recency_threshold = recency_threshold;
  p.rollout_horizon = env.search_horizon;
  p.validate();
  return p;
}

/// Seed of one episode: a hash of the master seed, the cell's coordinate
/// values and the episode index. Independent of grid order and of the other
/// cells in the sweep.
inline std::uint64_t episode_seed(std::uint64_t master, const std::string& env_id, const Cell& cell,
                                  std::size_t episode) {
  std::uint64_t h = hash_bytes(master, env_id);
  h = hash_bytes(h, cell.algorithm);
  h = hash_combine(h, cell.budget);
  h = hash_combine(h, std::bit_cast<std::uint64_t>(cell.c));
  h = hash_combine(h, std::bit_cast<std::uint64_t>(cell.eps_a));
  h = hash_combine(h, std::bit_cast<std::uint64_t>(cell.eps_t));
  return hash_combine(h, episode);
}

struct EpisodeOutcome {
  double episode_return = 0.0;
  double ratio_sum = 0.0;
  std::size_t decisions = 0;
  std::uint64_t q_refreshes = 0;
  std::uint64_t state_refreshes = 0;
  double wall_ms = 0.0;
};

inline EpisodeOutcome run_cell_episode(const Environment& env, const SearchParams& params, std::uint64_t seed) {
  EpisodeOutcome out;
  const auto start = std::chrono::steady_clock::now();
  const auto model = env.episode_model(seed);
  const Agent agent = make_search_agent(params, [&out](const SearchStats& s) {
    out.ratio_sum += s.abstraction_ratio;
    ++out.decisions;
    out.q_refreshes += s.q_refreshes;
    out.state_refreshes += s.state_refreshes;
  });
  out.episode_return = run_episode(*model, agent, hash_combine(seed, 1)).episode_return;
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Runs `count` independent jobs on a worker pool. The first exception stops
/// the remaining jobs and is rethrown.
inline void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& job) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Runs every cell of the grid and returns one record per cell in grid
/// order. Episodes of all cells share one worker pool; each cell aggregates
/// its episodes in index order, so results do not depend on scheduling.
inline std::vector<ExperimentRecord> run_sweep(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  const Environment env = make_environment(cfg.environment, cfg.base_dir);
  const auto cells = expand_grid(cfg);
  std::vector<SearchParams> params;
  for (const auto& c : cells) params.push_back(cell_params(c, env, cfg.recency_threshold));

  const std::size_t total = cells.size() * cfg.episodes;
  std::vector<EpisodeOutcome> outcomes(total);
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(total, cfg.threads, [&](std::size_t job) {
    const std::size_t cell = job / cfg.episodes, ep = job % cfg.episodes;
    outcomes[job] = run_cell_episode(env, params[cell], episode_seed(cfg.seed, env.id, cells[cell], ep));
    const std::size_t d = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(d, total);
    }
  });

  std::vector<ExperimentRecord> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::vector<double> returns;
    double ratio_sum = 0.0, wall = 0.0, q_ref = 0.0, s_ref = 0.0;
    std::size_t decisions = 0;
    for (std::size_t e = 0; e < cfg.episodes; ++e) {
      const auto& o = outcomes[i * cfg.episodes + e];
      returns.push_back(o.episode_return);
      ratio_sum += o.ratio_sum;
      decisions += o.decisions;
      wall += o.wall_ms;
      q_ref += static_cast<double>(o.q_refreshes);
      s_ref += static_cast<double>(o.state_refreshes);
    }
    const auto s = summarize(returns);
    ExperimentRecord r;
    r.environment = env.id;
    r.algorithm = cells[i].algorithm;
    r.budget = cells[i].budget;
    r.c = cells[i].c;
    r.eps_a = cells[i].eps_a;
    r.eps_t = cells[i].eps_t;
    r.episodes = s.n;
    r.mean_return = s.mean;
    r.se = s.se;
    r.ci_halfwidth = s.ci_halfwidth;
    r.abs_ratio = decisions ? ratio_sum / static_cast<double>(decisions) : 1.0;
    r.wall_ms = wall;
    r.mean_q_refreshes = decisions ? q_ref / static_cast<double>(decisions) : 0.0;
    r.mean_state_refreshes = decisions ? s_ref / static_cast<double>(decisions) : 0.0;
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace kvda
