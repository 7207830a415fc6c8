#pragma once

#include <memory>

#include "kvda/core/mdp.hpp"

namespace kvda {

/// Deterministic view of a stochastic model: each (state, action) pair maps to
/// one successor drawn from the original distribution. The draw is a pure
/// function of (episode seed, state, action), so the wrapper holds no cache
/// and repeated queries within an episode agree.
class DeterminizedMdp final : public Mdp {
 public:
  DeterminizedMdp(std::shared_ptr<const Mdp> base, std::uint64_t episode_seed)
      : base_(std::move(base)), seed_(episode_seed) {}

  std::string name() const override { return "d-" + base_->name(); }
  StateHandle initial_state(Rng& rng) const override { return base_->initial_state(rng); }
  bool is_terminal(const StateHandle& s) const override { return base_->is_terminal(s); }
  std::size_t num_actions(const StateHandle& s) const override { return base_->num_actions(s); }
  std::uint32_t horizon() const override { return base_->horizon(); }
  double discount() const override { return base_->discount(); }

  std::vector<Outcome> outcomes(const StateHandle& s, ActionId a) const override {
    return {sample_fixed(s, a)};
  }

  Outcome sample(const StateHandle& s, ActionId a, Rng&) const override {
    return sample_fixed(s, a);
  }

  const Mdp& base() const { return *base_; }
  std::uint64_t episode_seed() const { return seed_; }

 private:
  Outcome sample_fixed(const StateHandle& s, ActionId a) const {
    std::uint64_t key = hash_bytes(seed_, s.encoding);
    key = hash_combine(key, s.layer);
    key = hash_combine(key, a);
    Rng stream(key);
    Outcome o = base_->sample(s, a, stream);
    o.probability = 1.0;
    return o;
  }

  std::shared_ptr<const Mdp> base_;
  std::uint64_t seed_;
};

inline std::shared_ptr<const Mdp> determinize(std::shared_ptr<const Mdp> model,
                                              std::uint64_t episode_seed) {
  return std::make_shared<DeterminizedMdp>(std::move(model), episode_seed);
}

}  // namespace kvda
