#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>
#include <vector>

#include "kvda/core/mdp.hpp"
#include "kvda/search/abstraction.hpp"
#include "kvda/search/global_std.hpp"
#include "kvda/search/params.hpp"

namespace kvda {

struct QChild {
  std::size_t node = kNone;
  double probability = 0.0;
};

struct DecisionNode {
  StateHandle state;
  std::uint32_t depth = 0;  // layer below the root
  /// Terminal in the model or at the search depth limit.
  bool leaf = false;
  std::vector<std::size_t> actions;  // Q-node id per action, kNone while untried
  std::vector<ActionId> untried;
  std::vector<std::size_t> parents;  // incoming Q-nodes
  std::size_t abstract = kNone;
  /// d_s(this, representative) = V(rep) - V(this).
  double offset = 0.0;
  /// Offset of the child in the smallest child abstract Q id, at last refresh.
  double coord = 0.0;

  std::size_t incoming_edges() const { return parents.size(); }
  bool fully_expanded() const { return untried.empty(); }
};

struct QNode {
  std::size_t parent = kNone;
  ActionId action = 0;
  double reward = 0.0;
  std::uint32_t depth = 0;
  std::vector<QChild> children;
  std::uint64_t visits = 0;
  double total = 0.0;
  std::uint32_t recency = 0;
  std::size_t abstract = kNone;
  /// d_a(this, representative) = Q(rep) - Q(this).
  double offset = 0.0;
  /// Reward minus the probability-weighted successor offsets, at last refresh.
  double base = 0.0;
  bool refreshed = false;

  double mean() const { return visits == 0 ? 0.0 : total / static_cast<double>(visits); }
};

struct PathStep {
  std::size_t qnode = kNone;
  double reward = 0.0;
};

struct Descent {
  std::vector<PathStep> path;
  std::size_t last = kNone;  // decision node where descent stopped
  bool created = false;      // `last` was created by this descent
};

/// Exploration-term UCB score. `n_hat` is the (aggregate) visit count of the
/// queried action and `sibling_visits` the sum over the state's actions.
inline double ucb_value(double q_hat, double n_hat, double sibling_visits, double lambda) {
  if (!(n_hat > 0.0)) throw PreconditionError("ucb_value requires a visited action");
  if (lambda == 0.0) return q_hat;
  return q_hat + lambda * std::sqrt(std::log(std::max(sibling_visits, 1.0)) / n_hat);
}

/// One search graph: a layered DAG with transpositions merged by state handle,
/// plus the incremental abstraction maintained over it. Single-threaded.
class SearchTree {
 public:
  SearchTree(const Mdp& model, const StateHandle& root, SearchParams params)
      : model_(model), params_(params), rng_(splitmix64(params.seed)) {
    params_.validate();
    if (model_.is_terminal(root)) throw TerminalStateError("search requires a non-terminal root");
    root_layer_ = root.layer;
    limit_layer_ = root.layer + params_.rollout_horizon;
    root_ = get_or_create_node(root).first;
  }

  SearchTree(const SearchTree&) = delete;
  SearchTree& operator=(const SearchTree&) = delete;

  // ---- driving the search ----------------------------------------------

  void run() {
    for (std::size_t i = 0; i < params_.iterations; ++i) iterate();
  }

  void iterate() {
    Descent d = select_and_expand();
    const double leaf_value = d.created && !nodes_[d.last].leaf ? rollout(d.last) : 0.0;
    backup(d.path, leaf_value);
    ++iterations_;
  }

  Descent select_and_expand() {
    Descent d;
    const double lambda = exploration_lambda();
    std::size_t n = root_;
    while (true) {
      d.last = n;
      if (nodes_[n].leaf) return d;
      const ActionId a = choose_action(n, lambda);
      std::size_t q = nodes_[n].actions[a];
      if (q == kNone) q = create_qnode(n, a);
      Outcome o = model_.sample(nodes_[n].state, a, rng_);
      auto [child, created] = get_or_create_node(o.successor);
      link(q, child, o.probability, o.reward);
      d.path.push_back({q, o.reward});
      n = child;
      if (created) {
        d.last = n;
        d.created = true;
        return d;
      }
    }
  }

  /// Uniformly random actions from the node's state until a terminal state
  /// or the depth limit; undiscounted reward sum.
  double rollout(std::size_t node) { return rollout_from(nodes_[node].state); }

  double rollout_from(StateHandle s) {
    double value = 0.0;
    while (!model_.is_terminal(s) && s.layer < limit_layer_) {
      const ActionId a = uniform_index(rng_, model_.num_actions(s));
      Outcome o = model_.sample(s, a, rng_);
      value += o.reward;
      s = std::move(o.successor);
    }
    return value;
  }

  void backup(const std::vector<PathStep>& path, double leaf_value) {
    double v = leaf_value;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      v = it->reward + v;
      QNode& q = qnodes_[it->qnode];
      if (q.visits > 0) spread_.remove(q.mean());
      q.visits += 1;
      q.total += v;
      spread_.add(q.mean());
      if (abstracting()) {
        AbstractQNode& a = abs_q_[q.abstract];
        a.visits += 1;
        a.total += v + q.offset;
        if (++q.recency >= params_.recency_threshold) {
          q.recency = 0;
          stage_q(it->qnode);
        }
      }
    }
    process_refreshes();
  }

  /// Greedy root action by (offset-corrected) mean; exact ties broken
  /// uniformly at random.
  ActionId decide() {
    const auto& root = nodes_[root_];
    ActionId best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    std::size_t ties = 0;
    for (ActionId a = 0; a < root.actions.size(); ++a) {
      const std::size_t q = root.actions[a];
      if (q == kNone || estimate_visits(q) == 0) continue;
      const double value = estimate(q);
      if (ties == 0 || value > best_value) {
        best = a;
        best_value = value;
        ties = 1;
      } else if (value == best_value && uniform_index(rng_, ++ties) == 0) {
        best = a;
      }
    }
    if (ties == 0) throw PreconditionError("no root action has been visited");
    return best;
  }

  // ---- statistics -------------------------------------------------------

  bool abstracting() const { return params_.mode != AbstractionMode::none; }

  /// Q-hat: ground mean without abstraction, otherwise the abstract
  /// aggregate mean minus the member's offset.
  double estimate(std::size_t q) const {
    const QNode& n = qnodes_[q];
    if (!abstracting()) return n.mean();
    return abs_q_[n.abstract].mean() - n.offset;
  }

  std::uint64_t estimate_visits(std::size_t q) const {
    return abstracting() ? abs_q_[qnodes_[q].abstract].visits : qnodes_[q].visits;
  }

  double ucb(std::size_t q, double lambda) const {
    const auto& parent = nodes_[qnodes_[q].parent];
    double siblings = 0.0;
    for (std::size_t c : parent.actions)
      if (c != kNone) siblings += static_cast<double>(estimate_visits(c));
    return ucb_value(estimate(q), static_cast<double>(estimate_visits(q)), siblings, lambda);
  }

  /// Population std of ground means over visited Q-nodes; 1 with fewer than
  /// two visited Q-nodes.
  double sigma() const { return spread_.count() < 2 ? 1.0 : spread_.population_std(); }

  double exploration_lambda() const { return params_.exploration * sigma(); }

  /// Direct two-pass recomputation of sigma, for cross-checking.
  double sigma_two_pass() const {
    std::vector<double> means;
    for (const auto& q : qnodes_)
      if (q.visits > 0) means.push_back(q.mean());
    if (means.size() < 2) return 1.0;
    double mu = 0.0;
    for (double m : means) mu += m;
    mu /= static_cast<double>(means.size());
    double var = 0.0;
    for (double m : means) var += (m - mu) * (m - mu);
    return std::sqrt(var / static_cast<double>(means.size()));
  }

  /// Largest violation of: aggregate visits = sum of member visits and
  /// aggregate return = sum of (member return + visits * offset).
  double conservation_error() const {
    double worst = 0.0;
    if (!abstracting()) return worst;
    for (const auto& a : abs_q_) {
      if (!a.alive) continue;
      std::uint64_t n = 0;
      double total = 0.0;
      for (std::size_t m : a.members) {
        n += qnodes_[m].visits;
        total += qnodes_[m].total + static_cast<double>(qnodes_[m].visits) * qnodes_[m].offset;
      }
      worst = std::max(worst, static_cast<double>(n > a.visits ? n - a.visits : a.visits - n));
      worst = std::max(worst, std::abs(total - a.total));
    }
    return worst;
  }

  // ---- abstraction maintenance ------------------------------------------

  void stage_q(std::size_t q) { staged_[qnodes_[q].depth].q.insert(q); }
  void stage_state(std::size_t s) {
    if (!nodes_[s].leaf) staged_[nodes_[s].depth].s.insert(s);
  }

  /// Runs staged refreshes bottom-up: at each depth the Q-nodes (by id), then
  /// the decision nodes; changes stage parents one level up.
  void process_refreshes() {
    while (!staged_.empty()) {
      auto it = staged_.begin();
      Batch& batch = it->second;
      while (!batch.q.empty()) {
        const std::size_t q = *batch.q.begin();
        batch.q.erase(batch.q.begin());
        refresh_q(q);
      }
      while (!batch.s.empty()) {
        const std::size_t s = *batch.s.begin();
        batch.s.erase(batch.s.begin());
        refresh_state(s);
      }
      staged_.erase(it);
    }
  }

  /// Recomputes one Q-node's abstraction and offset. Returns whether its
  /// abstract node or offset changed (a first refresh always counts).
  bool refresh_q(std::size_t q) {
    ++q_refreshes_;
    QNode& n = qnodes_[q];
    n.recency = 0;
    const bool first = !n.refreshed;
    n.refreshed = true;
    const QDescription desc = describe_q(q);
    const std::size_t old_abs = n.abstract;
    const double old_offset = n.offset;
    AbstractQNode& a = abs_q_[old_abs];

    if (a.representative == q) {
      if (a.members.size() == 1) {
        n.base = desc.base;
        const std::size_t target = find_q_match(desc.signature, n.depth, old_abs);
        if (target != kNone) {
          kill_q_node(old_abs);
          join_q(q, target);
        } else {
          rekey_q(old_abs, desc);
        }
      } else if (q_compatible(desc.signature, a, n.depth)) {
        n.base = desc.base;
        rekey_q(old_abs, desc);
        rebase_q_members(old_abs);
      } else {
        leave_q(q);
        n.base = desc.base;
        place_q(q, desc);
      }
    } else if (q_compatible(desc.signature, a, n.depth)) {
      n.base = desc.base;
      set_q_offset(q, kvda() ? a.anchor - n.base : 0.0);
    } else {
      leave_q(q);
      n.base = desc.base;
      place_q(q, desc);
    }

    const bool changed = first || n.abstract != old_abs ||
                         std::abs(n.offset - old_offset) > kOffsetChangeTolerance;
    if (changed) stage_state(n.parent);
    return changed;
  }

  /// Recomputes one decision node's abstraction and offset.
  bool refresh_state(std::size_t s) {
    DecisionNode& n = nodes_[s];
    if (n.leaf) return false;
    ++state_refreshes_;
    const StateDescription desc = describe_state(s);
    const std::size_t old_abs = n.abstract;
    const double old_offset = n.offset;
    AbstractStateNode& a = abs_s_[old_abs];

    if (!desc.eligible) {
      if (a.members.size() == 1) {
        unkey_state(old_abs);
        n.coord = 0.0;
        n.offset = 0.0;
        a.anchor = 0.0;
      } else {
        leave_state(s);
        found_state(s, nullptr);
      }
    } else if (a.representative == s) {
      if (a.members.size() == 1) {
        n.coord = desc.coord;
        const std::size_t target = find_state_match(desc, old_abs);
        if (target != kNone) {
          kill_state_node(old_abs);
          join_state(s, target);
        } else {
          rekey_state(old_abs, desc);
          n.offset = 0.0;
        }
      } else if (state_compatible(desc, a)) {
        n.coord = desc.coord;
        rekey_state(old_abs, desc);
        rebase_state_members(old_abs);
      } else {
        leave_state(s);
        n.coord = desc.coord;
        place_state(s, desc);
      }
    } else if (state_compatible(desc, a)) {
      n.coord = desc.coord;
      n.offset = n.coord - a.anchor;
    } else {
      leave_state(s);
      n.coord = desc.coord;
      place_state(s, desc);
    }

    const bool changed =
        n.abstract != old_abs || std::abs(n.offset - old_offset) > kOffsetChangeTolerance;
    if (changed)
      for (std::size_t p : n.parents) stage_q(p);
    return changed;
  }

  /// Makes `new_rep` the representative of abstract Q-node `abs`. Member
  /// offsets are rebased onto it and the aggregate gains n * d_a(old, new),
  /// so every member's corrected mean is unchanged.
  void change_q_representative(std::size_t abs, std::size_t new_rep) {
    AbstractQNode& a = abs_q_[abs];
    if (std::find(a.members.begin(), a.members.end(), new_rep) == a.members.end()) {
      throw PreconditionError("new representative is not a member");
    }
    a.representative = new_rep;
    a.anchor = qnodes_[new_rep].base;
    rebase_q_members(abs);
  }

  void change_state_representative(std::size_t abs, std::size_t new_rep) {
    AbstractStateNode& a = abs_s_[abs];
    if (std::find(a.members.begin(), a.members.end(), new_rep) == a.members.end()) {
      throw PreconditionError("new representative is not a member");
    }
    a.representative = new_rep;
    a.anchor = nodes_[new_rep].coord;
    rebase_state_members(abs);
  }

  /// Reward and abstract successor profile over the sampled children.
  QSignature signature_of(std::size_t q) const { return describe_q(q).signature; }

  /// Fault injection for verifier tests: overwrites a member offset while
  /// keeping the aggregate consistent with it.
  void debug_set_q_offset(std::size_t q, double offset) { set_q_offset(q, offset); }
  /// Moves an abstract aggregate without touching its members; test hook for
  /// the conservation check.
  void debug_shift_aggregate(std::size_t abs, double delta) { abs_q_[abs].total += delta; }

  // ---- accessors --------------------------------------------------------

  const Mdp& model() const { return model_; }
  const SearchParams& params() const { return params_; }
  std::size_t root() const { return root_; }
  std::size_t iterations() const { return iterations_; }
  const std::vector<DecisionNode>& nodes() const { return nodes_; }
  const std::vector<QNode>& qnodes() const { return qnodes_; }
  const DecisionNode& node(std::size_t i) const { return nodes_.at(i); }
  const QNode& qnode(std::size_t i) const { return qnodes_.at(i); }
  const std::vector<AbstractQNode>& abstract_qnodes() const { return abs_q_; }
  const std::vector<AbstractStateNode>& abstract_states() const { return abs_s_; }
  std::size_t find_node(const StateHandle& s) const {
    auto it = index_.find(s);
    return it == index_.end() ? kNone : it->second;
  }
  std::uint64_t q_refreshes() const { return q_refreshes_; }
  std::uint64_t state_refreshes() const { return state_refreshes_; }
  Rng& rng() { return rng_; }

  std::size_t live_abstract_q_count() const {
    std::size_t n = 0;
    for (const auto& a : abs_q_) n += a.alive;
    return n;
  }
  std::size_t live_abstract_state_count() const {
    std::size_t n = 0;
    for (const auto& a : abs_s_) n += a.alive;
    return n;
  }
  std::size_t refreshed_q_count() const {
    std::size_t n = 0;
    for (const auto& q : qnodes_) n += q.refreshed;
    return n;
  }

  /// Abstract Q-nodes holding a refreshed member over refreshed ground
  /// Q-nodes; Q-nodes that never reached their first refresh are excluded.
  /// 1 means nothing was grouped.
  double abstraction_ratio() const {
    if (!abstracting()) return 1.0;
    std::size_t ground = refreshed_q_count();
    if (ground == 0) return 1.0;
    std::size_t abstract = 0;
    for (const auto& a : abs_q_) abstract += a.alive && a.keyed;
    return static_cast<double>(abstract) / static_cast<double>(ground);
  }

 private:
  struct Batch {
    std::set<std::size_t> q;
    std::set<std::size_t> s;
  };

  struct QDescription {
    QSignature signature;
    double base = 0.0;
  };

  struct StateDescription {
    bool eligible = false;
    std::vector<std::size_t> key;
    std::vector<double> relative;
    double coord = 0.0;
  };

  bool kvda() const { return params_.mode == AbstractionMode::kvda; }

  // ---- graph construction -----------------------------------------------

  std::pair<std::size_t, bool> get_or_create_node(const StateHandle& s) {
    auto [it, inserted] = index_.try_emplace(s, nodes_.size());
    if (!inserted) return {it->second, false};
    DecisionNode n;
    n.state = s;
    n.depth = s.layer - root_layer_;
    n.leaf = model_.is_terminal(s) || s.layer >= limit_layer_;
    if (!n.leaf) {
      const std::size_t k = model_.num_actions(s);
      if (k == 0) throw MdpError(model_.name() + ": non-terminal state without actions");
      n.actions.assign(k, kNone);
      n.untried.resize(k);
      for (std::size_t a = 0; a < k; ++a) n.untried[a] = a;
    }
    const std::size_t id = nodes_.size();
    nodes_.push_back(std::move(n));
    if (abstracting()) {
      if (nodes_[id].leaf) {
        join_leaf_group(id);
      } else {
        found_state(id, nullptr);
      }
    }
    return {id, true};
  }

  std::size_t create_qnode(std::size_t parent, ActionId a) {
    QNode q;
    q.parent = parent;
    q.action = a;
    q.depth = nodes_[parent].depth;
    const std::size_t id = qnodes_.size();
    qnodes_.push_back(std::move(q));
    nodes_[parent].actions[a] = id;
    if (abstracting()) {
      AbstractQNode node;
      node.members = {id};
      node.representative = id;
      node.depth = qnodes_[id].depth;
      qnodes_[id].abstract = abs_q_.size();
      abs_q_.push_back(std::move(node));
    }
    return id;
  }

  void link(std::size_t q, std::size_t child, double probability, double reward) {
    QNode& n = qnodes_[q];
    if (n.children.empty()) n.reward = reward;
    for (const auto& c : n.children)
      if (c.node == child) return;
    n.children.push_back({child, probability});
    nodes_[child].parents.push_back(q);
  }

  ActionId choose_action(std::size_t node, double lambda) {
    DecisionNode& n = nodes_[node];
    if (!n.untried.empty()) {
      const std::size_t i = uniform_index(rng_, n.untried.size());
      const ActionId a = n.untried[i];
      n.untried.erase(n.untried.begin() + static_cast<std::ptrdiff_t>(i));
      return a;
    }
    ActionId best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    std::size_t ties = 0;
    double siblings = 0.0;
    for (std::size_t c : n.actions) siblings += static_cast<double>(estimate_visits(c));
    for (ActionId a = 0; a < n.actions.size(); ++a) {
      const std::size_t q = n.actions[a];
      const double value =
          ucb_value(estimate(q), static_cast<double>(estimate_visits(q)), siblings, lambda);
      if (ties == 0 || value > best_value) {
        best = a;
        best_value = value;
        ties = 1;
      } else if (value == best_value && uniform_index(rng_, ++ties) == 0) {
        best = a;
      }
    }
    return best;
  }

  // ---- Q-node abstraction -----------------------------------------------

  QDescription describe_q(std::size_t q) const {
    const QNode& n = qnodes_[q];
    QDescription d;
    d.signature.reward = n.reward;
    d.signature.profile.reserve(n.children.size());
    double base = n.reward;
    for (const auto& c : n.children) {
      const DecisionNode& child = nodes_[c.node];
      d.signature.profile.emplace_back(child.abstract, c.probability);
      base -= c.probability * child.offset;
    }
    normalize_profile(d.signature.profile);
    d.base = kvda() ? base : 0.0;
    return d;
  }

  BucketIndex::Key q_key(const QSignature& sig, std::uint32_t depth) const {
    if (params_.eps_t > 0.0) return {kNone, depth};
    BucketIndex::Key key;
    key.reserve(sig.profile.size());
    for (const auto& [id, mass] : sig.profile) key.push_back(id);
    return key;
  }

  bool q_compatible(const QSignature& sig, const AbstractQNode& a, std::uint32_t depth) const {
    if (!a.alive || !a.keyed || a.depth != depth) return false;
    if (!kvda() && !(std::abs(sig.reward - a.signature.reward) <= params_.eps_a + kMatchTolerance)) {
      return false;
    }
    if (params_.eps_t == 0.0 && !same_support(sig.profile, a.signature.profile)) return false;
    return transition_error(sig.profile, a.signature.profile) <= params_.eps_t + kMatchTolerance;
  }

  std::size_t find_q_match(const QSignature& sig, std::uint32_t depth, std::size_t exclude) const {
    const auto* bucket = q_buckets_.find(q_key(sig, depth));
    if (bucket == nullptr) return kNone;
    for (std::size_t id : *bucket)
      if (id != exclude && q_compatible(sig, abs_q_[id], depth)) return id;
    return kNone;
  }

  void rekey_q(std::size_t abs, const QDescription& desc) {
    AbstractQNode& a = abs_q_[abs];
    if (a.keyed) q_buckets_.erase(q_key(a.signature, a.depth), abs);
    a.signature = desc.signature;
    a.anchor = qnodes_[a.representative].base;
    a.keyed = true;
    q_buckets_.insert(q_key(a.signature, a.depth), abs);
  }

  void kill_q_node(std::size_t abs) {
    AbstractQNode& a = abs_q_[abs];
    if (a.keyed) q_buckets_.erase(q_key(a.signature, a.depth), abs);
    a = AbstractQNode{};
    a.alive = false;
  }

  /// Moves the aggregate to match a new member offset; returns whether the
  /// offset moved by more than the change tolerance.
  bool set_q_offset(std::size_t q, double offset) {
    QNode& n = qnodes_[q];
    const double delta = offset - n.offset;
    abs_q_[n.abstract].total += static_cast<double>(n.visits) * delta;
    n.offset = offset;
    return std::abs(delta) > kOffsetChangeTolerance;
  }

  /// Recomputes every member offset from the node's anchor, staging the
  /// parents of members other than the representative whose offset moved.
  void rebase_q_members(std::size_t abs) {
    AbstractQNode& a = abs_q_[abs];
    for (std::size_t m : a.members) {
      const double offset = kvda() ? a.anchor - qnodes_[m].base : 0.0;
      if (set_q_offset(m, offset)) stage_state(qnodes_[m].parent);
    }
  }

  void leave_q(std::size_t q) {
    QNode& n = qnodes_[q];
    const std::size_t abs = n.abstract;
    AbstractQNode& a = abs_q_[abs];
    a.members.erase(std::find(a.members.begin(), a.members.end(), q));
    a.visits -= n.visits;
    a.total -= n.total + static_cast<double>(n.visits) * n.offset;
    n.abstract = kNone;
    n.offset = 0.0;
    if (a.members.empty()) {
      kill_q_node(abs);
      return;
    }
    if (a.representative == q) {
      change_q_representative(abs, a.members[uniform_index(rng_, a.members.size())]);
    }
    if (a.members.size() == 1) {
      // Drop accumulated rounding so a singleton reads its ground mean exactly.
      const QNode& m = qnodes_[a.members.front()];
      a.visits = m.visits;
      a.total = m.total + static_cast<double>(m.visits) * m.offset;
    }
  }

  void join_q(std::size_t q, std::size_t abs) {
    QNode& n = qnodes_[q];
    AbstractQNode& a = abs_q_[abs];
    a.members.push_back(q);
    n.abstract = abs;
    n.offset = kvda() ? a.anchor - n.base : 0.0;
    a.visits += n.visits;
    a.total += n.total + static_cast<double>(n.visits) * n.offset;
  }

  /// Joins the oldest compatible abstract node or founds a new one.
  void place_q(std::size_t q, const QDescription& desc) {
    const std::size_t target = find_q_match(desc.signature, qnodes_[q].depth, kNone);
    if (target != kNone) {
      join_q(q, target);
      return;
    }
    AbstractQNode a;
    a.members = {q};
    a.representative = q;
    a.depth = qnodes_[q].depth;
    a.visits = qnodes_[q].visits;
    a.total = qnodes_[q].total;
    const std::size_t id = abs_q_.size();
    abs_q_.push_back(std::move(a));
    qnodes_[q].abstract = id;
    qnodes_[q].offset = 0.0;
    rekey_q(id, desc);
  }

  // ---- state abstraction ------------------------------------------------

  StateDescription describe_state(std::size_t s) const {
    const DecisionNode& n = nodes_[s];
    StateDescription d;
    if (!n.fully_expanded()) return d;
    std::vector<std::pair<std::size_t, double>> kids;
    kids.reserve(n.actions.size());
    for (std::size_t q : n.actions) kids.emplace_back(qnodes_[q].abstract, qnodes_[q].offset);
    std::sort(kids.begin(), kids.end());
    d.key.reserve(kids.size());
    for (std::size_t i = 0; i < kids.size(); ++i) {
      d.key.push_back(kids[i].first);
      if (i > 0 && kids[i].first == kids[i - 1].first) {
        // Actions sharing an abstract node must have the same value.
        if (std::abs(kids[i].second - kids[i - 1].second) > kMatchTolerance) return StateDescription{};
        continue;
      }
      d.relative.push_back(kids[i].second - kids[0].second);
    }
    d.coord = kids[0].second;
    d.eligible = true;
    return d;
  }

  bool state_compatible(const StateDescription& d, const AbstractStateNode& a) const {
    if (!a.alive || !a.keyed || a.leaf_group || a.key != d.key) return false;
    for (std::size_t i = 0; i < d.relative.size(); ++i)
      if (std::abs(d.relative[i] - a.relative[i]) > kMatchTolerance) return false;
    return true;
  }

  std::size_t find_state_match(const StateDescription& d, std::size_t exclude) const {
    const auto* bucket = s_buckets_.find(d.key);
    if (bucket == nullptr) return kNone;
    for (std::size_t id : *bucket)
      if (id != exclude && state_compatible(d, abs_s_[id])) return id;
    return kNone;
  }

  void rekey_state(std::size_t abs, const StateDescription& d) {
    AbstractStateNode& a = abs_s_[abs];
    if (a.keyed) s_buckets_.erase(a.key, abs);
    a.key = d.key;
    a.relative = d.relative;
    a.anchor = nodes_[a.representative].coord;
    a.keyed = true;
    s_buckets_.insert(a.key, abs);
  }

  void unkey_state(std::size_t abs) {
    AbstractStateNode& a = abs_s_[abs];
    if (a.keyed) s_buckets_.erase(a.key, abs);
    a.keyed = false;
    a.key.clear();
    a.relative.clear();
  }

  void kill_state_node(std::size_t abs) {
    unkey_state(abs);
    abs_s_[abs] = AbstractStateNode{};
    abs_s_[abs].alive = false;
  }

  void rebase_state_members(std::size_t abs) {
    const AbstractStateNode& a = abs_s_[abs];
    for (std::size_t m : a.members) {
      DecisionNode& n = nodes_[m];
      const double offset = n.coord - a.anchor;
      const bool moved = std::abs(offset - n.offset) > kOffsetChangeTolerance;
      n.offset = offset;
      if (moved)
        for (std::size_t p : n.parents) stage_q(p);
    }
  }

  void leave_state(std::size_t s) {
    DecisionNode& n = nodes_[s];
    const std::size_t abs = n.abstract;
    AbstractStateNode& a = abs_s_[abs];
    a.members.erase(std::find(a.members.begin(), a.members.end(), s));
    n.abstract = kNone;
    n.offset = 0.0;
    if (a.members.empty()) {
      kill_state_node(abs);
    } else if (a.representative == s) {
      change_state_representative(abs, a.members[uniform_index(rng_, a.members.size())]);
    }
  }

  void join_state(std::size_t s, std::size_t abs) {
    abs_s_[abs].members.push_back(s);
    nodes_[s].abstract = abs;
    nodes_[s].offset = nodes_[s].coord - abs_s_[abs].anchor;
  }

  /// New singleton; keyed by `d` when given, otherwise unkeyed.
  void found_state(std::size_t s, const StateDescription* d) {
    AbstractStateNode a;
    a.members = {s};
    a.representative = s;
    a.depth = nodes_[s].depth;
    const std::size_t id = abs_s_.size();
    abs_s_.push_back(std::move(a));
    nodes_[s].abstract = id;
    nodes_[s].offset = 0.0;
    if (d != nullptr) {
      rekey_state(id, *d);
    } else {
      nodes_[s].coord = 0.0;
    }
  }

  void place_state(std::size_t s, const StateDescription& d) {
    const std::size_t target = find_state_match(d, kNone);
    if (target != kNone) {
      join_state(s, target);
    } else {
      found_state(s, &d);
    }
  }

  void join_leaf_group(std::size_t s) {
    const std::uint32_t depth = nodes_[s].depth;
    auto [it, inserted] = leaf_groups_.try_emplace(depth, abs_s_.size());
    if (inserted) {
      AbstractStateNode a;
      a.representative = s;
      a.depth = depth;
      a.leaf_group = true;
      abs_s_.push_back(std::move(a));
    }
    abs_s_[it->second].members.push_back(s);
    nodes_[s].abstract = it->second;
    nodes_[s].offset = 0.0;
  }

  const Mdp& model_;
  SearchParams params_;
  Rng rng_;
  std::uint32_t root_layer_ = 0;
  std::uint32_t limit_layer_ = 0;
  std::size_t root_ = kNone;
  std::size_t iterations_ = 0;

  std::vector<DecisionNode> nodes_;
  std::vector<QNode> qnodes_;
  std::unordered_map<StateHandle, std::size_t> index_;

  std::vector<AbstractQNode> abs_q_;
  std::vector<AbstractStateNode> abs_s_;
  BucketIndex q_buckets_;
  BucketIndex s_buckets_;
  std::map<std::uint32_t, std::size_t> leaf_groups_;
  std::map<std::uint32_t, Batch, std::greater<>> staged_;

  RunningSpread spread_;
  std::uint64_t q_refreshes_ = 0;
  std::uint64_t state_refreshes_ = 0;
};

}  // namespace kvda
