#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kvda/core/rng.hpp"
#include "kvda/core/types.hpp"

namespace kvda {

/// Finite-horizon MDP. Implementations fold the horizon into `is_terminal`
/// (a state whose layer reached `horizon()` is terminal), list no actions at
/// terminal states, and report the same reward for every outcome of one
/// state-action pair. All member functions are const and must be safe to call
/// concurrently.
class Mdp {
 public:
  virtual ~Mdp() = default;

  virtual std::string name() const = 0;
  virtual StateHandle initial_state(Rng& rng) const = 0;
  virtual bool is_terminal(const StateHandle& s) const = 0;
  /// Number of available actions; 0 exactly at terminal states.
  virtual std::size_t num_actions(const StateHandle& s) const = 0;
  /// Exhaustive successor distribution. Callers guarantee `s` is non-terminal
  /// and `a` legal; use enumerate_outcomes() for the checked, sorted variant.
  virtual std::vector<Outcome> outcomes(const StateHandle& s, ActionId a) const = 0;
  virtual std::uint32_t horizon() const = 0;
  virtual double discount() const { return 1.0; }

  /// Draws one successor. The default walks the enumerated distribution;
  /// factored domains override this with direct per-variable sampling.
  virtual Outcome sample(const StateHandle& s, ActionId a, Rng& rng) const {
    auto outs = outcomes(s, a);
    double u = uniform01(rng);
    for (auto& o : outs) {
      if (u < o.probability) return std::move(o);
      u -= o.probability;
    }
    return std::move(outs.back());
  }
};

inline constexpr double kProbabilityTolerance = 1e-9;

inline void check_action(const Mdp& model, const StateHandle& s, ActionId a) {
  if (model.is_terminal(s)) throw TerminalStateError("action requested at terminal state");
  const std::size_t n = model.num_actions(s);
  if (a >= n) {
    throw PreconditionError("illegal action " + std::to_string(a) + " (state has " +
                            std::to_string(n) + " actions)");
  }
}

/// Checked outcome enumeration, sorted by successor encoding.
inline std::vector<Outcome> enumerate_outcomes(const Mdp& model, const StateHandle& s,
                                               ActionId a) {
  check_action(model, s, a);
  auto outs = model.outcomes(s, a);
  std::sort(outs.begin(), outs.end(),
            [](const Outcome& x, const Outcome& y) { return x.successor < y.successor; });
  double total = 0.0;
  for (const auto& o : outs) total += o.probability;
  if (outs.empty() || std::abs(total - 1.0) > kProbabilityTolerance) {
    throw MdpError(model.name() + ": outcome probabilities sum to " + std::to_string(total));
  }
  return outs;
}

// Big-endian integer packing keeps lexicographic byte order equal to numeric
// order, so sorting by encoding sorts by index.
inline void append_u32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xFF));
}

inline std::uint32_t read_u32(std::string_view in, std::size_t pos) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(in[pos + i]);
  return v;
}

}  // namespace kvda
