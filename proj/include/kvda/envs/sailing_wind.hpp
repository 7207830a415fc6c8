#pragma once

#include <array>
#include <cstdlib>

#include "kvda/core/mdp.hpp"

namespace kvda {

struct SailingWindConfig {
  std::size_t size = 8;
  std::uint32_t horizon = 50;
  /// Direction the wind blows from, 0..7 counter-clockwise starting east.
  int initial_wind = 4;
};

/// Sailing on a square lake from (0, 0) to the opposite corner. Actions are
/// the compass directions that stay on the lake and do not head straight
/// into the wind, in ascending direction order. The cost of a move depends
/// on its angle to the wind: 1 running downwind up to 4 close-hauled; the
/// reward is minus that cost. The wind direction then turns by -1, 0 or +1
/// with probabilities 0.3, 0.4 and 0.3. Reaching the goal ends the episode.
class SailingWind final : public Mdp {
 public:
  static constexpr std::array<int, 8> kDx{1, 1, 0, -1, -1, -1, 0, 1};
  static constexpr std::array<int, 8> kDy{0, 1, 1, 1, 0, -1, -1, -1};

  struct Position {
    int x = 0, y = 0, wind = 0;
  };

  explicit SailingWind(SailingWindConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.size < 2 || cfg_.size > 255) throw ConfigError("sailing lake size must lie in [2, 255]");
    if (cfg_.initial_wind < 0 || cfg_.initial_wind > 7) throw ConfigError("wind direction must lie in [0, 7]");
    if (cfg_.horizon == 0) throw ConfigError("horizon must be positive");
  }

  std::string name() const override { return "sailing_wind"; }
  std::uint32_t horizon() const override { return cfg_.horizon; }

  StateHandle initial_state(Rng&) const override { return make_state({0, 0, cfg_.initial_wind}, 0); }

  bool is_terminal(const StateHandle& s) const override {
    if (s.layer >= cfg_.horizon) return true;
    const Position p = decode(s);
    const int goal = static_cast<int>(cfg_.size) - 1;
    return p.x == goal && p.y == goal;
  }

  std::size_t num_actions(const StateHandle& s) const override {
    return is_terminal(s) ? 0 : legal_directions(decode(s)).size();
  }

  std::vector<Outcome> outcomes(const StateHandle& s, ActionId a) const override {
    const Position p = decode(s);
    const auto dirs = legal_directions(p);
    if (a >= dirs.size()) throw PreconditionError("illegal sailing action");
    const int d = dirs[a];
    const double r = -static_cast<double>(cost(d, p.wind));
    std::vector<Outcome> out;
    static constexpr std::array<std::pair<int, double>, 3> kTurn{{{-1, 0.3}, {0, 0.4}, {1, 0.3}}};
    for (const auto& [turn, prob] : kTurn) {
      Position q{p.x + kDx[d], p.y + kDy[d], (p.wind + turn + 8) % 8};
      out.push_back({make_state(q, s.layer + 1), prob, r});
    }
    return out;
  }

  /// Angle units of 45 degrees between heading and the downwind direction.
  static int angle_to_downwind(int direction, int wind_from) {
    const int downwind = (wind_from + 4) % 8;
    const int diff = std::abs(direction - downwind) % 8;
    return std::min(diff, 8 - diff);
  }

  static int cost(int direction, int wind_from) { return angle_to_downwind(direction, wind_from) + 1; }

  std::vector<int> legal_directions(const Position& p) const {
    std::vector<int> dirs;
    const int n = static_cast<int>(cfg_.size);
    for (int d = 0; d < 8; ++d) {
      const int x = p.x + kDx[d], y = p.y + kDy[d];
      if (x < 0 || y < 0 || x >= n || y >= n) continue;
      if (angle_to_downwind(d, p.wind) == 4) continue;  // straight into the wind
      dirs.push_back(d);
    }
    return dirs;
  }

  StateHandle make_state(const Position& p, std::uint32_t layer) const {
    std::string e;
    e.push_back(static_cast<char>(p.x));
    e.push_back(static_cast<char>(p.y));
    e.push_back(static_cast<char>(p.wind));
    return {std::move(e), layer};
  }

  Position decode(const StateHandle& s) const {
    if (s.encoding.size() != 3) throw PreconditionError("not a sailing state");
    auto byte = [&](std::size_t i) { return static_cast<int>(static_cast<unsigned char>(s.encoding[i])); };
    return {byte(0), byte(1), byte(2)};
  }

 private:
  SailingWindConfig cfg_;
};

}  // namespace kvda
