#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kvda/core/mdp.hpp"

namespace kvda {

struct ExplicitOutcome {
  std::size_t next = 0;
  double probability = 1.0;
  friend bool operator==(const ExplicitOutcome&, const ExplicitOutcome&) = default;
};

struct ExplicitAction {
  double reward = 0.0;
  std::vector<ExplicitOutcome> outcomes;
  friend bool operator==(const ExplicitAction&, const ExplicitAction&) = default;
};

struct ExplicitState {
  std::uint32_t layer = 0;
  bool terminal = false;
  std::vector<ExplicitAction> actions;
  friend bool operator==(const ExplicitState&, const ExplicitState&) = default;
};

/// Fully enumerated layered MDP. Every transition goes from layer l to l + 1;
/// states on the deepest layer are terminal. State i is encoded as its
/// big-endian 32-bit index.
class ExplicitMdp final : public Mdp {
 public:
  ExplicitMdp() = default;
  ExplicitMdp(std::vector<ExplicitState> states, std::size_t initial, std::string name = "explicit",
              double discount = 1.0)
      : states_(std::move(states)), initial_(initial), name_(std::move(name)), discount_(discount) {
    validate();
    index_pairs();
  }

  std::string name() const override { return name_; }
  StateHandle initial_state(Rng&) const override { return handle(initial_); }
  bool is_terminal(const StateHandle& s) const override { return states_.at(index_of(s)).terminal; }
  std::size_t num_actions(const StateHandle& s) const override {
    return states_.at(index_of(s)).actions.size();
  }
  std::uint32_t horizon() const override { return horizon_; }
  double discount() const override { return discount_; }

  std::vector<Outcome> outcomes(const StateHandle& s, ActionId a) const override {
    const auto& act = states_.at(index_of(s)).actions.at(a);
    std::vector<Outcome> out;
    out.reserve(act.outcomes.size());
    for (const auto& o : act.outcomes) out.push_back({handle(o.next), o.probability, act.reward});
    return out;
  }

  StateHandle handle(std::size_t i) const {
    StateHandle h;
    append_u32(h.encoding, static_cast<std::uint32_t>(i));
    h.layer = states_.at(i).layer;
    return h;
  }

  static std::size_t index_of(const StateHandle& s) {
    if (s.encoding.size() != 4) throw PreconditionError("not an explicit-MDP state handle");
    return read_u32(s.encoding, 0);
  }

  const std::vector<ExplicitState>& states() const { return states_; }
  const ExplicitState& state(std::size_t i) const { return states_.at(i); }
  std::size_t size() const { return states_.size(); }
  std::size_t initial() const { return initial_; }

  /// State-action pairs are numbered state-major: pair_index(s, 0..k-1).
  std::size_t num_pairs() const { return pair_offset_.empty() ? 0 : pair_offset_.back(); }
  std::size_t pair_index(std::size_t s, ActionId a) const { return pair_offset_[s] + a; }
  std::size_t pair_state(std::size_t p) const { return pair_state_[p]; }
  ActionId pair_action(std::size_t p) const { return p - pair_offset_[pair_state_[p]]; }
  const ExplicitAction& pair(std::size_t p) const {
    return states_[pair_state_[p]].actions[pair_action(p)];
  }

  friend bool operator==(const ExplicitMdp& a, const ExplicitMdp& b) {
    return a.states_ == b.states_ && a.initial_ == b.initial_ && a.discount_ == b.discount_;
  }

 private:
  void validate() {
    if (states_.empty()) throw MdpError("explicit MDP has no states");
    if (initial_ >= states_.size()) throw MdpError("initial state out of range");
    horizon_ = 0;
    for (const auto& s : states_) horizon_ = std::max(horizon_, s.layer);
    for (std::size_t i = 0; i < states_.size(); ++i) {
      const auto& s = states_[i];
      const std::string where = "state " + std::to_string(i);
      if (s.terminal != s.actions.empty()) {
        throw MdpError(where + ": terminal states list no actions, others at least one");
      }
      if (s.layer == horizon_ && !s.terminal) throw MdpError(where + ": deepest layer must be terminal");
      for (const auto& a : s.actions) {
        double total = 0.0;
        if (a.outcomes.empty()) throw MdpError(where + ": action without outcomes");
        for (const auto& o : a.outcomes) {
          if (o.next >= states_.size()) throw MdpError(where + ": successor out of range");
          if (states_[o.next].layer != s.layer + 1) {
            throw MdpError(where + ": successor is not on the next layer");
          }
          if (!(o.probability > 0.0 && o.probability <= 1.0)) {
            throw MdpError(where + ": probability outside (0, 1]");
          }
          total += o.probability;
        }
        if (std::abs(total - 1.0) > kProbabilityTolerance) {
          throw MdpError(where + ": probabilities do not sum to 1");
        }
      }
    }
  }

  void index_pairs() {
    pair_offset_.assign(1, 0);
    pair_state_.clear();
    for (std::size_t i = 0; i < states_.size(); ++i) {
      for (std::size_t a = 0; a < states_[i].actions.size(); ++a) pair_state_.push_back(i);
      pair_offset_.push_back(pair_offset_.back() + states_[i].actions.size());
    }
  }

  std::vector<ExplicitState> states_;
  std::size_t initial_ = 0;
  std::string name_ = "explicit";
  double discount_ = 1.0;
  std::uint32_t horizon_ = 0;
  std::vector<std::size_t> pair_offset_;
  std::vector<std::size_t> pair_state_;
};

namespace detail {

inline std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_real(const std::string& token) {
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw MdpError("malformed number '" + token + "'");
  }
  return v;
}

}  // namespace detail

// Text format, one record per line, '#' starts a comment:
//
//   kvda-explicit-mdp 1
//   name <identifier>
//   discount <real>
//   initial <state index>
//   states <count>
//   state <i> layer <l> terminal
//   state <i> layer <l> actions <k>
//   action <a> reward <r> outcomes <m> <successor> <probability> ...
//
// `action` lines follow their `state` line in order 0..k-1. Reals use the
// shortest round-trip decimal form.

inline void write_explicit_mdp(std::ostream& os, const ExplicitMdp& mdp) {
  using detail::format_real;
  os << "kvda-explicit-mdp 1\n";
  os << "name " << mdp.name() << "\n";
  os << "discount " << format_real(mdp.discount()) << "\n";
  os << "initial " << mdp.initial() << "\n";
  os << "states " << mdp.size() << "\n";
  for (std::size_t i = 0; i < mdp.size(); ++i) {
    const auto& s = mdp.state(i);
    os << "state " << i << " layer " << s.layer;
    if (s.terminal) {
      os << " terminal\n";
      continue;
    }
    os << " actions " << s.actions.size() << "\n";
    for (std::size_t a = 0; a < s.actions.size(); ++a) {
      const auto& act = s.actions[a];
      os << "action " << a << " reward " << format_real(act.reward) << " outcomes "
         << act.outcomes.size();
      for (const auto& o : act.outcomes) os << " " << o.next << " " << format_real(o.probability);
      os << "\n";
    }
  }
}

inline ExplicitMdp read_explicit_mdp(std::istream& is) {
  using detail::parse_real;
  std::vector<std::vector<std::string>> lines;
  for (std::string raw; std::getline(is, raw);) {
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tokens;
    for (std::string t; ls >> t;) tokens.push_back(t);
    if (!tokens.empty()) lines.push_back(std::move(tokens));
  }
  auto expect = [](bool ok, const std::string& what) {
    if (!ok) throw MdpError("explicit MDP parse error: " + what);
  };
  auto to_index = [&](const std::string& t) {
    std::size_t v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    expect(res.ec == std::errc{} && res.ptr == t.data() + t.size(), "bad integer '" + t + "'");
    return v;
  };

  std::size_t pos = 0;
  expect(!lines.empty() && lines[0].size() == 2 && lines[0][0] == "kvda-explicit-mdp" &&
             lines[0][1] == "1",
         "missing header 'kvda-explicit-mdp 1'");
  ++pos;
  std::string name = "explicit";
  double discount = 1.0;
  std::size_t initial = 0;
  std::size_t count = 0;
  bool have_count = false;
  while (pos < lines.size() && lines[pos][0] != "state") {
    const auto& l = lines[pos++];
    expect(l.size() == 2, "header records take one value");
    if (l[0] == "name") name = l[1];
    else if (l[0] == "discount") discount = parse_real(l[1]);
    else if (l[0] == "initial") initial = to_index(l[1]);
    else if (l[0] == "states") { count = to_index(l[1]); have_count = true; }
    else expect(false, "unknown record '" + l[0] + "'");
  }
  expect(have_count, "missing 'states' record");

  std::vector<ExplicitState> states(count);
  for (std::size_t i = 0; i < count; ++i) {
    expect(pos < lines.size(), "fewer state records than declared");
    const auto& l = lines[pos++];
    expect(l.size() >= 5 && l[0] == "state" && to_index(l[1]) == i && l[2] == "layer",
           "expected 'state " + std::to_string(i) + " layer ...'");
    auto& s = states[i];
    s.layer = static_cast<std::uint32_t>(to_index(l[3]));
    if (l[4] == "terminal") {
      expect(l.size() == 5, "trailing tokens after 'terminal'");
      s.terminal = true;
      continue;
    }
    expect(l.size() == 6 && l[4] == "actions", "expected 'terminal' or 'actions <k>'");
    const std::size_t k = to_index(l[5]);
    for (std::size_t a = 0; a < k; ++a) {
      expect(pos < lines.size(), "missing action record");
      const auto& al = lines[pos++];
      expect(al.size() >= 6 && al[0] == "action" && to_index(al[1]) == a && al[2] == "reward" &&
                 al[4] == "outcomes",
             "expected 'action " + std::to_string(a) + " reward <r> outcomes <m> ...'");
      ExplicitAction act;
      act.reward = parse_real(al[3]);
      const std::size_t m = to_index(al[5]);
      expect(al.size() == 6 + 2 * m, "outcome count mismatch");
      for (std::size_t j = 0; j < m; ++j) {
        act.outcomes.push_back({to_index(al[6 + 2 * j]), parse_real(al[7 + 2 * j])});
      }
      s.actions.push_back(std::move(act));
    }
  }
  expect(pos == lines.size(), "trailing records after the last state");
  return ExplicitMdp(std::move(states), initial, name, discount);
}

inline std::string to_text(const ExplicitMdp& mdp) {
  std::ostringstream os;
  write_explicit_mdp(os, mdp);
  return os.str();
}

inline ExplicitMdp explicit_mdp_from_text(const std::string& text) {
  std::istringstream is(text);
  return read_explicit_mdp(is);
}

}  // namespace kvda
