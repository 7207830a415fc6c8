#pragma once

#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <unordered_map>

#include "kvda/oracle/explicit_mdp.hpp"
#include "kvda/oracle/value_iteration.hpp"

namespace kvda {

enum class Framework { asap, kvda };

inline constexpr double kOracleTolerance = 1e-9;

/// Partitions of states and state-action pairs. Each element is labelled by
/// its class representative; offsets are differences to that representative:
///   state_offset[s] = d_s(s, rep(s)),   q_offset[p] = d_a(p, rep(p)),
/// so for two members of one class d(x, y) = offset[x] - offset[y].
struct AbstractionResult {
  std::vector<std::size_t> state_class;
  std::vector<double> state_offset;
  std::vector<std::size_t> q_class;
  std::vector<double> q_offset;
  std::size_t iterations = 0;
  bool converged = false;

  double d_s(std::size_t s1, std::size_t s2) const { return state_offset[s1] - state_offset[s2]; }
  double d_a(std::size_t p1, std::size_t p2) const { return q_offset[p1] - q_offset[p2]; }
};

/// Number of classes with more than one member.
inline std::size_t count_non_trivial(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::size_t> sizes;
  for (auto l : labels) ++sizes[l];
  std::size_t n = 0;
  for (const auto& [label, size] : sizes) n += size > 1;
  return n;
}

/// True when every class of `fine` lies inside a single class of `coarse`.
inline bool refines(const std::vector<std::size_t>& fine, const std::vector<std::size_t>& coarse) {
  if (fine.size() != coarse.size()) return false;
  std::unordered_map<std::size_t, std::size_t> image;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    auto [it, inserted] = image.emplace(fine[i], coarse[i]);
    if (!inserted && it->second != coarse[i]) return false;
  }
  return true;
}

inline bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return refines(a, b) && refines(b, a);
}

namespace detail {

using Profile = std::vector<std::pair<std::size_t, double>>;

inline Profile class_profile(const ExplicitAction& act, const std::vector<std::size_t>& state_class) {
  std::map<std::size_t, double> mass;
  for (const auto& o : act.outcomes) mass[state_class[o.next]] += o.probability;
  return {mass.begin(), mass.end()};
}

inline bool profiles_equal(const Profile& a, const Profile& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].first != b[i].first || std::abs(a[i].second - b[i].second) > kOracleTolerance) return false;
  }
  return true;
}

/// Matches two non-terminal states under a pair partition.
/// Returns d with d_a((s1, a1), (s2, a2)) = d for every matched pair, or
/// nothing. ASAP offsets are all zero, so the same routine yields d = 0 there.
inline std::optional<double> match_states(const ExplicitMdp& mdp, std::size_t s1, std::size_t s2,
                                          const std::vector<std::size_t>& q_class,
                                          const std::vector<double>& q_offset) {
  const std::size_t n1 = mdp.state(s1).actions.size();
  const std::size_t n2 = mdp.state(s2).actions.size();
  auto covers = [&](double d) {
    for (std::size_t a1 = 0; a1 < n1; ++a1) {
      const std::size_t p1 = mdp.pair_index(s1, a1);
      bool found = false;
      for (std::size_t a2 = 0; a2 < n2 && !found; ++a2) {
        const std::size_t p2 = mdp.pair_index(s2, a2);
        found = q_class[p1] == q_class[p2] &&
                std::abs(q_offset[p1] - q_offset[p2] - d) <= kOracleTolerance;
      }
      if (!found) return false;
    }
    for (std::size_t a2 = 0; a2 < n2; ++a2) {
      const std::size_t p2 = mdp.pair_index(s2, a2);
      bool found = false;
      for (std::size_t a1 = 0; a1 < n1 && !found; ++a1) {
        const std::size_t p1 = mdp.pair_index(s1, a1);
        found = q_class[p1] == q_class[p2] &&
                std::abs(q_offset[p1] - q_offset[p2] - d) <= kOracleTolerance;
      }
      if (!found) return false;
    }
    return true;
  };
  const std::size_t p0 = mdp.pair_index(s1, 0);
  for (std::size_t a2 = 0; a2 < n2; ++a2) {
    const std::size_t p2 = mdp.pair_index(s2, a2);
    if (q_class[p0] != q_class[p2]) continue;
    const double d = q_offset[p0] - q_offset[p2];
    if (covers(d)) return d;
  }
  return std::nullopt;
}

}  // namespace detail

/// Exact ASAP or KVDA abstraction of an explicit MDP, recomputed from scratch
/// at every alternation until both partitions and all offsets are stable.
///
/// `priority` orders states for representative selection (a class's
/// representative is its first member in that order); empty means ascending
/// state index. Pairs inherit the order of their states.
inline AbstractionResult abstraction_fixed_point(const ExplicitMdp& mdp, Framework framework,
                                                 std::vector<std::size_t> priority = {}) {
  const std::size_t n = mdp.size();
  const std::size_t np = mdp.num_pairs();
  if (priority.empty()) {
    priority.resize(n);
    std::iota(priority.begin(), priority.end(), 0);
  }
  std::vector<std::size_t> pair_order;
  for (std::size_t s : priority)
    for (std::size_t a = 0; a < mdp.state(s).actions.size(); ++a) pair_order.push_back(mdp.pair_index(s, a));

  AbstractionResult r;
  r.state_class.resize(n);
  r.state_offset.assign(n, 0.0);
  r.q_class.assign(np, 0);
  r.q_offset.assign(np, 0.0);

  // Base case: terminals of one layer share a class, the rest are singletons.
  std::map<std::uint32_t, std::size_t> terminal_rep;
  for (std::size_t s : priority) {
    const auto& st = mdp.state(s);
    if (st.terminal) {
      r.state_class[s] = terminal_rep.try_emplace(st.layer, s).first->second;
    } else {
      r.state_class[s] = s;
    }
  }

  const bool use_reward = framework == Framework::asap;
  const bool use_offsets = framework == Framework::kvda;
  const std::size_t cap = n + np + 2;

  for (r.iterations = 1; r.iterations <= cap; ++r.iterations) {
    // State-action pairs from the current state abstraction.
    std::vector<std::size_t> q_class(np, 0);
    std::vector<double> q_offset(np, 0.0);
    std::vector<double> base(np, 0.0);
    std::vector<detail::Profile> profile(np);
    std::vector<std::size_t> reps;
    for (std::size_t p : pair_order) {
      const auto& act = mdp.pair(p);
      profile[p] = detail::class_profile(act, r.state_class);
      base[p] = act.reward;
      if (use_offsets) {
        for (const auto& o : act.outcomes) base[p] -= o.probability * r.state_offset[o.next];
      }
      std::size_t label = p;
      for (std::size_t rep : reps) {
        if (mdp.state(mdp.pair_state(rep)).layer != mdp.state(mdp.pair_state(p)).layer) continue;
        if (use_reward && std::abs(mdp.pair(rep).reward - act.reward) > kOracleTolerance) continue;
        if (!detail::profiles_equal(profile[rep], profile[p])) continue;
        label = rep;
        break;
      }
      if (label == p) reps.push_back(p);
      q_class[p] = label;
      q_offset[p] = use_offsets ? base[label] - base[p] : 0.0;
    }

    // States from the new pair abstraction; terminal classes stay fixed.
    std::vector<std::size_t> state_class = r.state_class;
    std::vector<double> state_offset(n, 0.0);
    std::vector<std::size_t> state_reps;
    for (std::size_t s : priority) {
      if (mdp.state(s).terminal) continue;
      state_class[s] = s;
      for (std::size_t rep : state_reps) {
        if (mdp.state(rep).layer != mdp.state(s).layer) continue;
        if (auto d = detail::match_states(mdp, s, rep, q_class, q_offset)) {
          state_class[s] = rep;
          state_offset[s] = *d;
          break;
        }
      }
      if (state_class[s] == s) state_reps.push_back(s);
    }

    auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > 1e-12) return false;
      return true;
    };
    const bool stable = q_class == r.q_class && state_class == r.state_class &&
                        close(q_offset, r.q_offset) && close(state_offset, r.state_offset) &&
                        r.iterations > 1;
    r.q_class = std::move(q_class);
    r.q_offset = std::move(q_offset);
    r.state_class = std::move(state_class);
    r.state_offset = std::move(state_offset);
    if (stable) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged) r.iterations = cap;
  return r;
}

inline AbstractionResult asap_fixed_point(const ExplicitMdp& mdp) {
  return abstraction_fixed_point(mdp, Framework::asap);
}

inline AbstractionResult kvda_fixed_point(const ExplicitMdp& mdp) {
  return abstraction_fixed_point(mdp, Framework::kvda);
}

struct SoundnessReport {
  std::size_t state_pairs_checked = 0;
  std::size_t q_pairs_checked = 0;
  std::size_t violations = 0;
  double max_error = 0.0;
};

/// Checks d(x, y) against the optimal values for every same-class pair:
/// d_a(p1, p2) = Q*(p2) - Q*(p1) and d_s(s1, s2) = V*(s2) - V*(s1).
inline SoundnessReport check_soundness(const ExplicitMdp& mdp, const AbstractionResult& abs,
                                       const ValueTable& values, double tol = kOracleTolerance) {
  SoundnessReport rep;
  auto record = [&](double err) {
    rep.max_error = std::max(rep.max_error, err);
    if (err > tol) ++rep.violations;
  };
  for (std::size_t i = 0; i < mdp.size(); ++i)
    for (std::size_t j = i + 1; j < mdp.size(); ++j) {
      if (abs.state_class[i] != abs.state_class[j]) continue;
      ++rep.state_pairs_checked;
      record(std::abs(abs.d_s(i, j) - (values.v[j] - values.v[i])));
    }
  for (std::size_t i = 0; i < mdp.num_pairs(); ++i)
    for (std::size_t j = i + 1; j < mdp.num_pairs(); ++j) {
      if (abs.q_class[i] != abs.q_class[j]) continue;
      ++rep.q_pairs_checked;
      record(std::abs(abs.d_a(i, j) - (values.q[j] - values.q[i])));
    }
  return rep;
}

}  // namespace kvda
