#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "kvda/oracle/value_iteration.hpp"
#include "kvda/search/search_tree.hpp"

namespace kvda {

struct SearchVerification {
  std::size_t q_pairs_checked = 0;
  std::size_t state_pairs_checked = 0;
  double conservation_error = 0.0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

/// Checks a search graph built on `mdp` against its exact values. Every
/// member of an abstract node is compared with the representative:
///   offset(q) - offset(rep) = Q*(rep) - Q*(q)   and likewise for states,
/// which under OGA (all offsets 0) says same-node members have equal values.
/// Also checks statistics conservation. The search limit must reach the
/// MDP horizon for the depth-limited leaf group to be meaningful.
inline SearchVerification verify_search_against_oracle(const ExplicitMdp& mdp, const SearchTree& tree,
                                                       double tol = 1e-9) {
  SearchVerification out;
  if (!tree.abstracting()) return out;
  const ValueTable values = value_iteration(mdp);
  auto q_star = [&](std::size_t q) {
    const QNode& n = tree.qnode(q);
    return values.q[mdp.pair_index(ExplicitMdp::index_of(tree.node(n.parent).state), n.action)];
  };
  auto v_star = [&](std::size_t s) { return values.v[ExplicitMdp::index_of(tree.node(s).state)]; };

  const auto& aq = tree.abstract_qnodes();
  for (std::size_t id = 0; id < aq.size(); ++id) {
    const auto& a = aq[id];
    if (!a.alive) continue;
    const std::size_t rep = a.representative;
    for (std::size_t m : a.members) {
      if (m == rep) continue;
      ++out.q_pairs_checked;
      const double claimed = tree.qnode(m).offset - tree.qnode(rep).offset;
      const double truth = q_star(rep) - q_star(m);
      if (std::abs(claimed - truth) > tol) {
        std::ostringstream msg;
        msg << "abstract Q " << id << ": member q" << m << " (state "
            << ExplicitMdp::index_of(tree.node(tree.qnode(m).parent).state) << ", action "
            << tree.qnode(m).action << ") vs representative q" << rep << ": offset difference "
            << claimed << ", exact " << truth;
        out.violations.push_back(msg.str());
      }
    }
  }
  const auto& as = tree.abstract_states();
  for (std::size_t id = 0; id < as.size(); ++id) {
    const auto& a = as[id];
    if (!a.alive) continue;
    const std::size_t rep = a.representative;
    for (std::size_t m : a.members) {
      if (m == rep) continue;
      ++out.state_pairs_checked;
      const double claimed = tree.node(m).offset - tree.node(rep).offset;
      const double truth = v_star(rep) - v_star(m);
      if (std::abs(claimed - truth) > tol) {
        std::ostringstream msg;
        msg << "abstract state " << id << ": member n" << m << " (state "
            << ExplicitMdp::index_of(tree.node(m).state) << ") vs representative n" << rep
            << ": offset difference " << claimed << ", exact " << truth;
        out.violations.push_back(msg.str());
      }
    }
  }
  out.conservation_error = tree.conservation_error();
  if (out.conservation_error > 1e-6) {
    out.violations.push_back("statistics conservation off by " + std::to_string(out.conservation_error));
  }
  return out;
}

}  // namespace kvda
