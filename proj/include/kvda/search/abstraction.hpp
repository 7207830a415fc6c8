#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

namespace kvda {

inline constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

/// Tolerance for reward, mass and offset comparisons when matching nodes.
inline constexpr double kMatchTolerance = 1e-9;
/// Offset moves below this size do not count as a change worth propagating.
inline constexpr double kOffsetChangeTolerance = 1e-12;

/// Sorted (abstract state id, probability mass) over a Q-node's sampled
/// successors; successors sharing an abstract state have their masses summed.
using SuccessorProfile = std::vector<std::pair<std::size_t, double>>;

inline void normalize_profile(SuccessorProfile& p) {
  std::sort(p.begin(), p.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (out > 0 && p[out - 1].first == p[i].first) {
      p[out - 1].second += p[i].second;
    } else {
      p[out++] = p[i];
    }
  }
  p.resize(out);
}

/// L1 distance between two profiles over the union of their supports. Masses
/// come from sampled successors only and are not renormalized.
inline double transition_error(const SuccessorProfile& a, const SuccessorProfile& b) {
  double err = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
      err += std::abs(a[i++].second);
    } else if (i == a.size() || b[j].first < a[i].first) {
      err += std::abs(b[j++].second);
    } else {
      err += std::abs(a[i++].second - b[j++].second);
    }
  }
  return err;
}

inline bool same_support(const SuccessorProfile& a, const SuccessorProfile& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].first != b[i].first) return false;
  return true;
}

struct QSignature {
  double reward = 0.0;
  SuccessorProfile profile;
};

/// Equivalence class of Q-nodes. The aggregate estimates the representative's
/// value: every member backup contributes v + offset(member).
struct AbstractQNode {
  std::vector<std::size_t> members;  // in admission order
  std::size_t representative = kNone;
  std::uint64_t visits = 0;
  double total = 0.0;
  std::uint32_t depth = 0;
  /// Unkeyed nodes hold one never-refreshed Q-node and are not match targets.
  bool keyed = false;
  bool alive = true;
  /// Representative's signature and base value at its last refresh.
  QSignature signature;
  double anchor = 0.0;

  double mean() const { return visits == 0 ? 0.0 : total / static_cast<double>(visits); }
};

/// Equivalence class of decision nodes. Key: sorted multiset of the child
/// abstract Q ids; `relative` holds the offsets of each distinct id relative
/// to the first one, which must agree between members.
struct AbstractStateNode {
  std::vector<std::size_t> members;
  std::size_t representative = kNone;
  std::uint32_t depth = 0;
  bool keyed = false;
  bool alive = true;
  /// Terminal or depth-limited nodes of one depth; never refreshed.
  bool leaf_group = false;
  std::vector<std::size_t> key;
  std::vector<double> relative;
  double anchor = 0.0;
};

/// Sorted id lists keyed by a canonical description, so the first compatible
/// entry in a bucket is the oldest compatible node.
class BucketIndex {
 public:
  using Key = std::vector<std::size_t>;

  void insert(const Key& key, std::size_t id) {
    auto& v = buckets_[key];
    v.insert(std::lower_bound(v.begin(), v.end(), id), id);
  }

  void erase(const Key& key, std::size_t id) {
    auto it = buckets_.find(key);
    if (it == buckets_.end()) return;
    auto& v = it->second;
    auto pos = std::lower_bound(v.begin(), v.end(), id);
    if (pos != v.end() && *pos == id) v.erase(pos);
    if (v.empty()) buckets_.erase(it);
  }

  const std::vector<std::size_t>* find(const Key& key) const {
    auto it = buckets_.find(key);
    return it == buckets_.end() ? nullptr : &it->second;
  }

 private:
  std::map<Key, std::vector<std::size_t>> buckets_;
};

}  // namespace kvda
