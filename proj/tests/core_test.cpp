#include <gtest/gtest.h>

#include "kvda/core/determinize.hpp"
#include "kvda/core/episode.hpp"
#include "kvda/envs/explicit_generators.hpp"
#include "kvda/oracle/value_iteration.hpp"
#include "test_models.hpp"

namespace kvda {
namespace {

TEST(EnumerateOutcomes, DeterministicChainHasOneOutcome) {
  auto mdp = testing::chain(3, 2.5);
  auto outs = enumerate_outcomes(mdp, mdp.handle(0), 0);
  ASSERT_EQ(outs.size(), 1u);
  EXPECT_EQ(outs[0].successor, mdp.handle(1));
  EXPECT_EQ(outs[0].probability, 1.0);
  EXPECT_EQ(outs[0].reward, 2.5);
}

TEST(EnumerateOutcomes, FourStateRootActionA) {
  auto mdp = make_four_state_mdp();
  auto outs = enumerate_outcomes(mdp, mdp.handle(0), 0);
  ASSERT_EQ(outs.size(), 1u);
  EXPECT_EQ(outs[0].successor, mdp.handle(1));
  EXPECT_EQ(outs[0].reward, 1.0);
}

TEST(EnumerateOutcomes, CoinIsNormalizedAndSorted) {
  auto mdp = testing::coin();
  auto outs = enumerate_outcomes(mdp, mdp.handle(0), 0);
  ASSERT_EQ(outs.size(), 2u);
  EXPECT_LT(outs[0].successor, outs[1].successor);
  EXPECT_NEAR(outs[0].probability + outs[1].probability, 1.0, 1e-12);
}

TEST(EnumerateOutcomes, Errors) {
  auto mdp = testing::coin();
  EXPECT_THROW(enumerate_outcomes(mdp, mdp.handle(0), 1), PreconditionError);
  EXPECT_THROW(enumerate_outcomes(mdp, mdp.handle(3), 0), TerminalStateError);
}

TEST(Determinize, IdempotentOnDeterministicModels) {
  auto base = std::make_shared<ExplicitMdp>(testing::chain(4, 1.0));
  auto det = determinize(base, 99);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(enumerate_outcomes(*det, base->handle(i), 0), enumerate_outcomes(*base, base->handle(i), 0));
  }
}

TEST(Determinize, StableWithinAnEpisode) {
  auto base = std::make_shared<ExplicitMdp>(testing::coin());
  auto det = determinize(base, 5);
  Rng a(1), b(2);
  EXPECT_EQ(det->sample(base->handle(0), 0, a), det->sample(base->handle(0), 0, b));
  EXPECT_EQ(det->outcomes(base->handle(0), 0).size(), 1u);
  EXPECT_EQ(det->outcomes(base->handle(0), 0)[0].probability, 1.0);
}

TEST(Determinize, FrequenciesFollowTheDistribution) {
  auto base = std::make_shared<ExplicitMdp>(testing::coin());
  int heads = 0;
  const int n = 10000;
  for (int seed = 0; seed < n; ++seed) {
    DeterminizedMdp det(base, static_cast<std::uint64_t>(seed));
    heads += det.outcomes(base->handle(0), 0)[0].successor == base->handle(1);
  }
  EXPECT_NEAR(heads / double(n), 0.3, 0.02);
}

TEST(RunEpisode, SingleStepReturn) {
  auto mdp = testing::bandit({5.0});
  auto r = run_episode(mdp, uniform_random_agent(), 0);
  EXPECT_EQ(r.episode_return, 5.0);
  EXPECT_EQ(r.trajectory.size(), 1u);
}

TEST(RunEpisode, ConstantChainSumsRewards) {
  auto mdp = testing::chain(3, 1.0);
  auto r = run_episode(mdp, uniform_random_agent(), 0);
  EXPECT_EQ(r.episode_return, 3.0);
  double sum = 0.0;
  for (const auto& st : r.trajectory) sum += st.reward;
  EXPECT_EQ(sum, r.episode_return);
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) EXPECT_EQ(r.trajectory[i].state.layer, i);
}

TEST(RunEpisode, OptimalAgentOnFourStateEarnsVStar) {
  auto mdp = make_four_state_mdp();
  auto values = value_iteration(mdp);
  Agent optimal = [&](const Mdp&, const StateHandle& s, Rng&) {
    const std::size_t i = ExplicitMdp::index_of(s);
    ActionId best = 0;
    for (ActionId a = 1; a < mdp.state(i).actions.size(); ++a)
      if (values.q[mdp.pair_index(i, a)] > values.q[mdp.pair_index(i, best)]) best = a;
    return best;
  };
  EXPECT_EQ(run_episode(mdp, optimal, 3).episode_return, values.v[0]);
}

TEST(RunEpisode, IllegalActionAborts) {
  auto mdp = testing::bandit({1.0});
  Agent bad = [](const Mdp&, const StateHandle&, Rng&) { return ActionId{7}; };
  EXPECT_THROW(run_episode(mdp, bad, 0), PreconditionError);
}

TEST(Rng, UniformIndexStaysInRange) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(uniform_index(rng, 7), 7u);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(rng);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

}  // namespace
}  // namespace kvda
