#pragma once

#include <vector>

#include "kvda/core/episode.hpp"
#include "kvda/search/search_tree.hpp"

namespace kvda {

struct RootActionStats {
  ActionId action = 0;
  std::uint64_t visits = 0;           // ground visits
  std::uint64_t estimate_visits = 0;  // aggregate visits under abstraction
  double q = 0.0;                     // value used by the final decision
  double ground_mean = 0.0;

  friend bool operator==(const RootActionStats&, const RootActionStats&) = default;
};

struct SearchStats {
  ActionId chosen = 0;
  std::size_t iterations = 0;
  std::vector<RootActionStats> root_actions;  // expanded root actions, ascending
  std::size_t decision_nodes = 0;
  std::size_t q_nodes = 0;
  std::size_t abstract_q_nodes = 0;
  std::size_t abstract_states = 0;
  std::size_t refreshed_q_nodes = 0;
  std::uint64_t q_refreshes = 0;
  std::uint64_t state_refreshes = 0;
  double abstraction_ratio = 1.0;
  double lambda = 0.0;

  friend bool operator==(const SearchStats&, const SearchStats&) = default;
};

inline SearchStats collect_stats(const SearchTree& tree, ActionId chosen) {
  SearchStats st;
  st.chosen = chosen;
  st.iterations = tree.iterations();
  const auto& root = tree.node(tree.root());
  for (ActionId a = 0; a < root.actions.size(); ++a) {
    const std::size_t q = root.actions[a];
    if (q == kNone) continue;
    st.root_actions.push_back(
        {a, tree.qnode(q).visits, tree.estimate_visits(q), tree.estimate(q), tree.qnode(q).mean()});
  }
  st.decision_nodes = tree.nodes().size();
  st.q_nodes = tree.qnodes().size();
  st.abstract_q_nodes = tree.live_abstract_q_count();
  st.abstract_states = tree.live_abstract_state_count();
  st.refreshed_q_nodes = tree.refreshed_q_count();
  st.q_refreshes = tree.q_refreshes();
  st.state_refreshes = tree.state_refreshes();
  st.abstraction_ratio = tree.abstraction_ratio();
  st.lambda = tree.exploration_lambda();
  return st;
}

struct SearchResult {
  ActionId action = 0;
  SearchStats stats;
};

/// Runs exactly params.iterations iterations from `root` and returns the
/// greedy root action.
inline SearchResult search(const Mdp& model, const StateHandle& root, const SearchParams& params) {
  SearchTree tree(model, root, params);
  tree.run();
  const ActionId a = tree.decide();
  return {a, collect_stats(tree, a)};
}

/// Agent that plans every decision with a fresh tree. The per-decision seed
/// is drawn from the episode stream. `on_decision`, when set, sees every
/// decision's statistics.
inline Agent make_search_agent(SearchParams params,
                               std::function<void(const SearchStats&)> on_decision = {}) {
  params.validate();
  return [params, on_decision](const Mdp& model, const StateHandle& s, Rng& rng) {
    SearchParams p = params;
    p.seed = rng();
    SearchResult r = search(model, s, p);
    if (on_decision) on_decision(r.stats);
    return r.action;
  };
}

}  // namespace kvda
