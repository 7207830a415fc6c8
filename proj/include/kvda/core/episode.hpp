#pragma once

#include <functional>
#include <vector>

#include "kvda/core/mdp.hpp"

namespace kvda {

struct Step {
  StateHandle state;
  ActionId action = 0;
  double reward = 0.0;
};

struct EpisodeResult {
  double episode_return = 0.0;
  std::vector<Step> trajectory;
  StateHandle final_state;
};

/// Maps the current state to a legal action. The Rng is the episode's stream.
using Agent = std::function<ActionId(const Mdp&, const StateHandle&, Rng&)>;

/// Runs one episode from a sampled initial state until a terminal state (the
/// horizon is part of the terminal predicate). Returns sum of gamma^t r_t.
inline EpisodeResult run_episode(const Mdp& model, const Agent& agent, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  EpisodeResult result;
  StateHandle s = model.initial_state(rng);
  double weight = 1.0;
  const double gamma = model.discount();
  while (!model.is_terminal(s)) {
    const ActionId a = agent(model, s, rng);
    if (a >= model.num_actions(s)) {
      throw PreconditionError(model.name() + ": agent chose illegal action " + std::to_string(a) +
                              " at layer " + std::to_string(s.layer));
    }
    Outcome o = model.sample(s, a, rng);
    if (o.successor.layer != s.layer + 1) {
      throw MdpError(model.name() + ": transition did not advance the layer by one");
    }
    result.episode_return += weight * o.reward;
    weight *= gamma;
    result.trajectory.push_back({s, a, o.reward});
    s = std::move(o.successor);
  }
  result.final_state = std::move(s);
  return result;
}

inline Agent uniform_random_agent() {
  return [](const Mdp& m, const StateHandle& s, Rng& rng) {
    return uniform_index(rng, m.num_actions(s));
  };
}

}  // namespace kvda
