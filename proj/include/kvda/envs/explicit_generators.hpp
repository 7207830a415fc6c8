#pragma once

#include <algorithm>
#include <array>
#include <numeric>

#include "kvda/oracle/explicit_mdp.hpp"

namespace kvda {

/// The four-state example: root (0) with actions A -> 1 (reward 1) and
/// B -> 2 (reward 0); states 1 and 2 each have a single action into the
/// terminal state 3 with rewards 0 and 1. Q*(root, A) = Q*(root, B) = 1 and
/// V*(2) - V*(1) = 1, so a value-difference abstraction groups both root
/// actions, both middle actions and both middle states while no pair has
/// equal immediate reward.
inline ExplicitMdp make_four_state_mdp() {
  std::vector<ExplicitState> s(4);
  s[0] = {0, false, {{1.0, {{1, 1.0}}}, {0.0, {{2, 1.0}}}}};
  s[1] = {1, false, {{0.0, {{3, 1.0}}}}};
  s[2] = {1, false, {{1.0, {{3, 1.0}}}}};
  s[3] = {2, true, {}};
  return ExplicitMdp(std::move(s), 0, "four_state");
}

struct RandomMdpOptions {
  std::uint64_t seed = 0;
  std::size_t n_states = 12;
  std::size_t max_actions = 3;
  bool stochastic = false;
  /// Rewards are drawn from {0, 1, ..., reward_levels - 1}; 1 gives a
  /// constant-reward MDP.
  std::size_t reward_levels = 3;
  std::size_t max_layers = 10;
  double early_terminal_probability = 0.1;
};

/// Layered random MDP with few distinct rewards and narrow layers so that
/// abstraction opportunities are common. Unreachable states are pruned, so
/// the result can have fewer than `n_states` states; it always has a terminal
/// deepest layer and every state is reachable from state 0.
inline ExplicitMdp random_explicit_mdp(const RandomMdpOptions& opt) {
  if (opt.n_states < 2) throw PreconditionError("random_explicit_mdp needs at least 2 states");
  if (opt.max_actions < 1 || opt.reward_levels < 1) {
    throw PreconditionError("random_explicit_mdp needs max_actions >= 1 and reward_levels >= 1");
  }
  Rng rng(splitmix64(opt.seed));

  const std::size_t layer_cap = std::max<std::size_t>(2, std::min(opt.max_layers, opt.n_states));
  const std::size_t n_layers = 2 + uniform_index(rng, layer_cap - 1);

  // Root alone on layer 0, every other layer non-empty.
  std::vector<std::size_t> width(n_layers, 1);
  const std::size_t spare = opt.n_states > n_layers ? opt.n_states - n_layers : 0;
  for (std::size_t i = 0; i < spare; ++i) ++width[1 + uniform_index(rng, n_layers - 1)];

  std::vector<std::size_t> first(n_layers + 1, 0);
  for (std::size_t l = 0; l < n_layers; ++l) first[l + 1] = first[l] + width[l];
  const std::size_t total = first[n_layers];

  std::vector<ExplicitState> states(total);
  for (std::size_t l = 0; l < n_layers; ++l) {
    bool any_open = false;
    for (std::size_t i = first[l]; i < first[l + 1]; ++i) {
      states[i].layer = static_cast<std::uint32_t>(l);
      const bool last = l + 1 == n_layers;
      states[i].terminal = last || (l > 0 && bernoulli(rng, opt.early_terminal_probability));
      any_open |= !states[i].terminal;
    }
    if (l + 1 < n_layers && !any_open) states[first[l]].terminal = false;
  }

  static constexpr std::array<std::pair<double, double>, 3> kSplits{
      {{0.5, 0.5}, {0.25, 0.75}, {0.75, 0.25}}};
  for (std::size_t i = 0; i < total; ++i) {
    auto& s = states[i];
    if (s.terminal) continue;
    const std::size_t lo = first[s.layer + 1];
    const std::size_t w = width[s.layer + 1];
    const std::size_t k = 1 + uniform_index(rng, opt.max_actions);
    for (std::size_t a = 0; a < k; ++a) {
      ExplicitAction act;
      act.reward = static_cast<double>(uniform_index(rng, opt.reward_levels));
      const std::size_t t1 = lo + uniform_index(rng, w);
      if (opt.stochastic && w >= 2 && bernoulli(rng, 0.5)) {
        std::size_t t2 = lo + uniform_index(rng, w - 1);
        if (t2 >= t1) ++t2;
        const auto [p1, p2] = kSplits[uniform_index(rng, kSplits.size())];
        act.outcomes = {{t1, p1}, {t2, p2}};
      } else {
        act.outcomes = {{t1, 1.0}};
      }
      s.actions.push_back(std::move(act));
    }
  }

  // Keep only what the root reaches.
  std::vector<bool> reached(total, false);
  reached[0] = true;
  for (std::size_t i = 0; i < total; ++i) {
    if (!reached[i]) continue;
    for (const auto& a : states[i].actions)
      for (const auto& o : a.outcomes) reached[o.next] = true;
  }
  std::vector<std::size_t> remap(total, 0);
  std::vector<ExplicitState> kept;
  for (std::size_t i = 0; i < total; ++i) {
    if (!reached[i]) continue;
    remap[i] = kept.size();
    kept.push_back(states[i]);
  }
  for (auto& s : kept)
    for (auto& a : s.actions)
      for (auto& o : a.outcomes) o.next = remap[o.next];

  return ExplicitMdp(std::move(kept), 0, "random-" + std::to_string(opt.seed));
}

}  // namespace kvda
