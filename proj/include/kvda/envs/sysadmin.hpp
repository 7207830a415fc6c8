#pragma once

#include <algorithm>

#include "kvda/envs/factored.hpp"

namespace kvda {

struct SysAdminConfig {
  std::size_t machines = 8;
  double reboot_probability = 0.1;  // spontaneous restart of a down machine
  double reboot_penalty = 0.75;
  std::uint32_t horizon = 50;
};

/// Network of machines on a ring. Action 0 is a no-op, action i reboots
/// machine i - 1. Reward: running machines minus the reboot penalty, both
/// counted in the state the action is taken in. A running machine stays up
/// with probability 0.45 + 0.5 (1 + up neighbours) / (1 + neighbours); a down
/// machine restarts with the reboot probability; a rebooted machine is up.
class SysAdmin final : public Mdp {
 public:
  explicit SysAdmin(SysAdminConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.machines < 3) throw ConfigError("sysadmin needs at least 3 machines");
    if (cfg_.reboot_probability < 0.0 || cfg_.reboot_probability > 1.0) {
      throw ConfigError("sysadmin reboot probability must lie in [0, 1]");
    }
    if (cfg_.horizon == 0) throw ConfigError("horizon must be positive");
  }

  std::string name() const override { return "sysadmin"; }
  std::uint32_t horizon() const override { return cfg_.horizon; }
  const SysAdminConfig& config() const { return cfg_; }

  StateHandle initial_state(Rng&) const override {
    return make_state(std::vector<bool>(cfg_.machines, true), 0);
  }
  bool is_terminal(const StateHandle& s) const override { return s.layer >= cfg_.horizon; }
  std::size_t num_actions(const StateHandle& s) const override {
    return is_terminal(s) ? 0 : cfg_.machines + 1;
  }

  std::vector<Outcome> outcomes(const StateHandle& s, ActionId a) const override {
    const auto running = decode(s);
    const double r = reward(running, a);
    std::vector<Outcome> out;
    for (auto& [bits, p] : next_distribution(running, a).enumerate())
      out.push_back({make_state(bits, s.layer + 1), p, r});
    return out;
  }

  Outcome sample(const StateHandle& s, ActionId a, Rng& rng) const override {
    const auto running = decode(s);
    auto [bits, p] = next_distribution(running, a).sample(rng);
    return {make_state(bits, s.layer + 1), p, reward(running, a)};
  }

  StateHandle make_state(const std::vector<bool>& running, std::uint32_t layer) const {
    return {pack_bits(running), layer};
  }
  std::vector<bool> decode(const StateHandle& s) const { return unpack_bits(s.encoding, cfg_.machines); }

 private:
  double reward(const std::vector<bool>& running, ActionId a) const {
    const double up = static_cast<double>(std::count(running.begin(), running.end(), true));
    return up - (a > 0 ? cfg_.reboot_penalty : 0.0);
  }

  BernoulliVector next_distribution(const std::vector<bool>& running, ActionId a) const {
    const std::size_t n = cfg_.machines;
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (a == i + 1) {
        p[i] = 1.0;
      } else if (running[i]) {
        const int up = running[(i + n - 1) % n] + running[(i + 1) % n];
        p[i] = 0.45 + 0.5 * (1.0 + up) / 3.0;
      } else {
        p[i] = cfg_.reboot_probability;
      }
    }
    return BernoulliVector(std::move(p));
  }

  SysAdminConfig cfg_;
};

}  // namespace kvda
