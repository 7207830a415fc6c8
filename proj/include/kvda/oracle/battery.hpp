#pragma once

#include "kvda/envs/explicit_generators.hpp"

namespace kvda {

/// Random explicit MDPs with at most 30 states, 4 actions per state and 10
/// layers; odd indices are stochastic.
inline std::vector<ExplicitMdp> oracle_battery(std::size_t count, std::uint64_t first_seed = 0) {
  std::vector<ExplicitMdp> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RandomMdpOptions opt;
    opt.seed = first_seed + i;
    opt.n_states = 30;
    opt.max_actions = 4;
    opt.max_layers = 10;
    opt.stochastic = i % 2 == 1;
    opt.reward_levels = 3;
    out.push_back(random_explicit_mdp(opt));
  }
  return out;
}

}  // namespace kvda
