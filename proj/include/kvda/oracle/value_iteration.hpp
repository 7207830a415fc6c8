#pragma once

#include <limits>
#include <numeric>

#include "kvda/oracle/explicit_mdp.hpp"

namespace kvda {

struct ValueTable {
  std::vector<double> v;  // by state index
  std::vector<double> q;  // by pair index (ExplicitMdp::pair_index)
};

/// Exact backward induction, deepest layer first.
inline ValueTable value_iteration(const ExplicitMdp& mdp) {
  ValueTable t;
  t.v.assign(mdp.size(), 0.0);
  t.q.assign(mdp.num_pairs(), 0.0);
  std::vector<std::size_t> order(mdp.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return mdp.state(a).layer > mdp.state(b).layer;
  });
  const double gamma = mdp.discount();
  for (std::size_t s : order) {
    const auto& st = mdp.state(s);
    if (st.terminal) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < st.actions.size(); ++a) {
      const auto& act = st.actions[a];
      double q = act.reward;
      for (const auto& o : act.outcomes) q += gamma * o.probability * t.v[o.next];
      t.q[mdp.pair_index(s, a)] = q;
      best = std::max(best, q);
    }
    t.v[s] = best;
  }
  return t;
}

}  // namespace kvda
