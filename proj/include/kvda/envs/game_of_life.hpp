#pragma once

#include <algorithm>

#include "kvda/envs/factored.hpp"

namespace kvda {

struct GameOfLifeConfig {
  std::size_t width = 4;
  std::size_t height = 4;
  double noise = 0.1;
  double set_cost = 1.0;
  std::uint32_t horizon = 50;
  /// Row strings of '.' (dead) and 'X' (alive); empty means the default.
  std::vector<std::string> initial = {".X..", "..X.", "XXX.", "...."};
};

/// Conway's rules on a bounded grid with noise. Action 0 is a no-op, action
/// i + 1 sets cell i (row-major). A cell that Conway's rule or the action
/// makes alive is alive next step with probability 1 - noise; any other cell
/// with probability noise. Reward: alive cells minus the set cost.
class GameOfLife final : public Mdp {
 public:
  explicit GameOfLife(GameOfLifeConfig cfg = {}) : cfg_(std::move(cfg)) {
    if (cfg_.width == 0 || cfg_.height == 0) throw ConfigError("game of life grid must be non-empty");
    if (cfg_.noise < 0.0 || cfg_.noise > 1.0) throw ConfigError("game of life noise must lie in [0, 1]");
    if (cfg_.horizon == 0) throw ConfigError("horizon must be positive");
    initial_.assign(cells(), false);
    if (!cfg_.initial.empty()) {
      if (cfg_.initial.size() != cfg_.height) throw ConfigError("initial pattern has the wrong height");
      for (std::size_t y = 0; y < cfg_.height; ++y) {
        if (cfg_.initial[y].size() != cfg_.width) throw ConfigError("initial pattern has the wrong width");
        for (std::size_t x = 0; x < cfg_.width; ++x) {
          const char c = cfg_.initial[y][x];
          if (c != '.' && c != 'X') throw ConfigError("initial pattern uses '.' and 'X' only");
          initial_[y * cfg_.width + x] = c == 'X';
        }
      }
    }
  }

  std::string name() const override { return "game_of_life"; }
  std::uint32_t horizon() const override { return cfg_.horizon; }
  std::size_t cells() const { return cfg_.width * cfg_.height; }

  StateHandle initial_state(Rng&) const override { return make_state(initial_, 0); }
  bool is_terminal(const StateHandle& s) const override { return s.layer >= cfg_.horizon; }
  std::size_t num_actions(const StateHandle& s) const override { return is_terminal(s) ? 0 : cells() + 1; }

  std::vector<Outcome> outcomes(const StateHandle& s, ActionId a) const override {
    const auto alive = decode(s);
    const double r = reward(alive, a);
    std::vector<Outcome> out;
    for (auto& [bits, p] : next_distribution(alive, a).enumerate())
      out.push_back({make_state(bits, s.layer + 1), p, r});
    return out;
  }

  Outcome sample(const StateHandle& s, ActionId a, Rng& rng) const override {
    const auto alive = decode(s);
    auto [bits, p] = next_distribution(alive, a).sample(rng);
    return {make_state(bits, s.layer + 1), p, reward(alive, a)};
  }

  StateHandle make_state(const std::vector<bool>& alive, std::uint32_t layer) const {
    return {pack_bits(alive), layer};
  }
  std::vector<bool> decode(const StateHandle& s) const { return unpack_bits(s.encoding, cells()); }

  /// Conway's deterministic successor rule for one cell.
  bool conway_alive(const std::vector<bool>& alive, std::size_t cell) const {
    const auto w = static_cast<long>(cfg_.width), h = static_cast<long>(cfg_.height);
    const long x = static_cast<long>(cell) % w, y = static_cast<long>(cell) / w;
    int n = 0;
    for (long dy = -1; dy <= 1; ++dy)
      for (long dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const long nx = x + dx, ny = y + dy;
        if (nx >= 0 && nx < w && ny >= 0 && ny < h) n += alive[static_cast<std::size_t>(ny * w + nx)];
      }
    return alive[cell] ? (n == 2 || n == 3) : n == 3;
  }

 private:
  double reward(const std::vector<bool>& alive, ActionId a) const {
    const double count = static_cast<double>(std::count(alive.begin(), alive.end(), true));
    return count - (a > 0 ? cfg_.set_cost : 0.0);
  }

  BernoulliVector next_distribution(const std::vector<bool>& alive, ActionId a) const {
    std::vector<double> p(cells());
    for (std::size_t i = 0; i < cells(); ++i) {
      const bool on = a == i + 1 || conway_alive(alive, i);
      p[i] = on ? 1.0 - cfg_.noise : cfg_.noise;
    }
    return BernoulliVector(std::move(p));
  }

  GameOfLifeConfig cfg_;
  std::vector<bool> initial_;
};

}  // namespace kvda
