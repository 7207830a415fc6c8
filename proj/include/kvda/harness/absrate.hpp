#pragma once

#include "kvda/harness/experiment.hpp"

namespace kvda {

struct AbsRateOptions {
  std::size_t probes = 30;
  std::size_t probe_iterations = 500;    // probe-collecting OGA agent
  std::size_t measure_iterations = 1000; // tree built at every probe
  double c = 2.0;
  std::size_t stride = 5;  // keep every stride-th decision state of an episode
  std::uint32_t recency_threshold = 3;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

struct ProbeState {
  std::shared_ptr<const Mdp> model;  // the episode's (possibly determinized) model
  StateHandle state;
};

/// Decision states of episodes played by an OGA-UCT agent, in episode order.
inline std::vector<ProbeState> collect_probe_states(const Environment& env, const AbsRateOptions& opt) {
  if (opt.probes == 0 || opt.stride == 0) throw ConfigError("probe count and stride must be positive");
  SearchParams agent_params;
  agent_params.mode = AbstractionMode::oga;
  agent_params.iterations = opt.probe_iterations;
  agent_params.exploration = opt.c;
  agent_params.recency_threshold = opt.recency_threshold;
  agent_params.rollout_horizon = env.search_horizon;
  const Agent agent = make_search_agent(agent_params);

  std::vector<ProbeState> probes;
  const std::size_t batch = std::max<std::size_t>(1, opt.threads ? opt.threads : std::thread::hardware_concurrency());
  for (std::size_t first = 0; probes.size() < opt.probes; first += batch) {
    if (first > 100 * opt.probes) throw MdpError("episodes yield too few probe states");
    std::vector<std::vector<ProbeState>> found(batch);
    parallel_for(batch, opt.threads, [&](std::size_t i) {
      const std::uint64_t seed = hash_combine(hash_bytes(opt.seed, "probe:" + env.id), first + i);
      auto model = env.episode_model(seed);
      const auto r = run_episode(*model, agent, hash_combine(seed, 1));
      for (std::size_t k = 0; k < r.trajectory.size(); k += opt.stride) found[i].push_back({model, r.trajectory[k].state});
    });
    for (auto& f : found)
      for (auto& p : f)
        if (probes.size() < opt.probes) probes.push_back(std::move(p));
  }
  return probes;
}

struct AbsRateResult {
  std::string algorithm;
  double mean_ratio = 1.0;
  std::vector<double> ratios;  // one per probe
};

/// Builds a fresh tree per probe state for each algorithm and averages the
/// abstract/eligible Q-node ratio.
inline std::vector<AbsRateResult> measure_abstraction_ratio(const Environment& env,
                                                            const std::vector<std::pair<std::string, SearchParams>>& algorithms,
                                                            const AbsRateOptions& opt) {
  const auto probes = collect_probe_states(env, opt);
  std::vector<AbsRateResult> results;
  for (const auto& [name, p] : algorithms) results.push_back({name, 1.0, std::vector<double>(probes.size(), 1.0)});
  parallel_for(algorithms.size() * probes.size(), opt.threads, [&](std::size_t job) {
    const std::size_t a = job / probes.size(), k = job % probes.size();
    SearchParams p = algorithms[a].second;
    p.iterations = opt.measure_iterations;
    p.exploration = opt.c;
    p.recency_threshold = opt.recency_threshold;
    p.rollout_horizon = env.search_horizon;
    p.seed = hash_combine(opt.seed, k);
    SearchTree tree(*probes[k].model, probes[k].state, p);
    tree.run();
    results[a].ratios[k] = tree.abstraction_ratio();
  });
  for (auto& r : results) r.mean_ratio = summarize(r.ratios).mean;
  return results;
}

}  // namespace kvda
