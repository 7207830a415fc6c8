#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "kvda/core/types.hpp"

namespace kvda {

enum class AbstractionMode { none, oga, kvda };

inline std::string to_string(AbstractionMode m) {
  switch (m) {
    case AbstractionMode::none: return "none";
    case AbstractionMode::oga: return "oga";
    case AbstractionMode::kvda: return "kvda";
  }
  return "?";
}

inline AbstractionMode parse_abstraction_mode(std::string_view s) {
  if (s == "none") return AbstractionMode::none;
  if (s == "oga") return AbstractionMode::oga;
  if (s == "kvda") return AbstractionMode::kvda;
  throw ConfigError("unknown abstraction mode '" + std::string(s) + "'");
}

struct SearchParams {
  std::size_t iterations = 1000;
  /// C in lambda = C * sigma.
  double exploration = 2.0;
  /// K: backups through a Q-node between two abstraction refreshes.
  std::uint32_t recency_threshold = 3;
  AbstractionMode mode = AbstractionMode::kvda;
  /// Reward tolerance; only OGA compares rewards. May be infinity.
  double eps_a = 0.0;
  /// Transition tolerance in [0, 2].
  double eps_t = 0.0;
  /// Search depth below the root; rollouts are truncated there with value 0.
  std::uint32_t rollout_horizon = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations == 0) throw ConfigError("iterations must be positive");
    if (!(exploration > 0.0) || !std::isfinite(exploration)) {
      throw ConfigError("exploration scale C must be a positive real");
    }
    if (recency_threshold == 0) throw ConfigError("recency threshold K must be positive");
    if (std::isnan(eps_a) || eps_a < 0.0) throw ConfigError("eps_a must be non-negative");
    if (std::isnan(eps_t) || eps_t < 0.0 || eps_t > 2.0) throw ConfigError("eps_t must lie in [0, 2]");
    if (rollout_horizon == 0) throw ConfigError("rollout horizon must be positive");
  }
};

}  // namespace kvda
