#pragma once

#include <vector>

#include "kvda/oracle/explicit_mdp.hpp"

namespace kvda::testing {

/// Root with one action per reward, each leading to a shared terminal state.
inline ExplicitMdp bandit(const std::vector<double>& rewards) {
  std::vector<ExplicitState> s(2);
  s[0].layer = 0;
  for (double r : rewards) s[0].actions.push_back({r, {{1, 1.0}}});
  s[1] = {1, true, {}};
  return ExplicitMdp(std::move(s), 0, "bandit");
}

/// States 0..length on layers 0..length, one action each, last one terminal.
inline ExplicitMdp chain(std::size_t length, double reward) {
  std::vector<ExplicitState> s(length + 1);
  for (std::size_t i = 0; i <= length; ++i) {
    s[i].layer = static_cast<std::uint32_t>(i);
    s[i].terminal = i == length;
    if (i < length) s[i].actions.push_back({reward, {{i + 1, 1.0}}});
  }
  return ExplicitMdp(std::move(s), 0, "chain");
}

/// One coin flip (0.3 heads) then a single step paying 1 on heads.
inline ExplicitMdp coin() {
  std::vector<ExplicitState> s(4);
  s[0] = {0, false, {{0.0, {{1, 0.3}, {2, 0.7}}}}};
  s[1] = {1, false, {{1.0, {{3, 1.0}}}}};
  s[2] = {1, false, {{0.0, {{3, 1.0}}}}};
  s[3] = {2, true, {}};
  return ExplicitMdp(std::move(s), 0, "coin");
}

/// root -A(r_a)-> 1 -(r1)-> T,  root -B(r_b)-> 2 -(r2)-> T.
inline ExplicitMdp two_branches(double r_a, double r_b, double r1, double r2) {
  std::vector<ExplicitState> s(4);
  s[0] = {0, false, {{r_a, {{1, 1.0}}}, {r_b, {{2, 1.0}}}}};
  s[1] = {1, false, {{r1, {{3, 1.0}}}}};
  s[2] = {1, false, {{r2, {{3, 1.0}}}}};
  s[3] = {2, true, {}};
  return ExplicitMdp(std::move(s), 0, "two-branches");
}

}  // namespace kvda::testing
