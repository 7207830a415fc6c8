#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kvda/envs/explicit_generators.hpp"
#include "kvda/oracle/verify_search.hpp"
#include "kvda/search/search.hpp"
#include "test_models.hpp"

namespace kvda {
namespace {

SearchParams params_for(AbstractionMode mode, std::size_t iterations, std::uint64_t seed = 1) {
  SearchParams p;
  p.mode = mode;
  p.iterations = iterations;
  p.seed = seed;
  return p;
}

/// Abstract Q-node ids with at least two members.
std::vector<std::size_t> groups(const SearchTree& t) {
  std::vector<std::size_t> out;
  const auto& aq = t.abstract_qnodes();
  for (std::size_t i = 0; i < aq.size(); ++i)
    if (aq[i].alive && aq[i].members.size() >= 2) out.push_back(i);
  return out;
}

TEST(Ucb, Examples) {
  EXPECT_DOUBLE_EQ(ucb_value(10.0 / 5.0, 5, 5, 0.0), 2.0);
  EXPECT_DOUBLE_EQ(ucb_value(0.0, 1, std::numbers::e, 2.0), 2.0);
  EXPECT_THROW(ucb_value(0.0, 0, 3, 1.0), PreconditionError);
}

TEST(Ucb, MemberReadsAggregateMinusOffset) {
  // Both middle actions lead to the terminal group, so KVDA groups them with
  // Q values 2 and 3.
  auto mdp = testing::two_branches(1.0, 0.0, 2.0, 3.0);
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::kvda, 60));
  t.run();
  std::size_t q1 = t.node(t.find_node(mdp.handle(1))).actions[0];
  std::size_t q2 = t.node(t.find_node(mdp.handle(2))).actions[0];
  ASSERT_EQ(t.qnode(q1).abstract, t.qnode(q2).abstract);
  const std::size_t abs = t.qnode(q1).abstract;
  t.change_q_representative(abs, q2);
  EXPECT_DOUBLE_EQ(t.abstract_qnodes()[abs].mean(), 3.0);
  EXPECT_DOUBLE_EQ(t.qnode(q2).offset, 0.0);
  EXPECT_DOUBLE_EQ(t.qnode(q1).offset, 1.0);
  EXPECT_DOUBLE_EQ(t.estimate(q2), 3.0);
  EXPECT_DOUBLE_EQ(t.estimate(q1), 2.0);
  EXPECT_DOUBLE_EQ(t.estimate(q1), t.qnode(q1).mean());
}

TEST(GlobalStd, SpreadExamples) {
  RunningSpread s;
  s.add(0.0);
  s.add(2.0);
  EXPECT_DOUBLE_EQ(2.0 * s.population_std(), 2.0);
  RunningSpread same;
  for (int i = 0; i < 5; ++i) same.add(0.1);
  same.remove(0.1);
  EXPECT_EQ(same.population_std(), 0.0);
}

TEST(GlobalStd, EqualValuesGiveZeroLambda) {
  auto mdp = testing::bandit({0.5, 0.5, 0.5});
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::none, 20));
  t.run();
  EXPECT_EQ(t.exploration_lambda(), 0.0);
}

TEST(GlobalStd, FallbackWithFewerThanTwoVisitedNodes) {
  auto mdp = testing::bandit({1.0, 0.0});
  SearchParams p = params_for(AbstractionMode::none, 1);
  p.exploration = 3.0;
  SearchTree t(mdp, mdp.handle(0), p);
  EXPECT_EQ(t.exploration_lambda(), 3.0);
  t.iterate();
  EXPECT_EQ(t.exploration_lambda(), 3.0);
}

TEST(GlobalStd, IncrementalMatchesTwoPass) {
  RandomMdpOptions opt;
  opt.seed = 4;
  opt.n_states = 800;
  opt.max_layers = 12;
  opt.max_actions = 4;
  opt.stochastic = true;
  opt.reward_levels = 7;
  auto mdp = random_explicit_mdp(opt);
  for (auto mode : {AbstractionMode::none, AbstractionMode::kvda}) {
    SearchTree t(mdp, mdp.handle(0), params_for(mode, 3000));
    t.run();
    EXPECT_GE(t.qnodes().size() + t.nodes().size(), 1000u);
    EXPECT_NEAR(t.sigma(), t.sigma_two_pass(), 1e-9);
  }
}

TEST(Select, UnvisitedActionsFirst) {
  auto mdp = testing::bandit({0.0, 1.0, 2.0});
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::none, 3));
  t.run();
  for (std::size_t q : t.node(t.root()).actions) {
    ASSERT_NE(q, kNone);
    EXPECT_EQ(t.qnode(q).visits, 1u);
  }
}

TEST(Select, TranspositionsMerge) {
  std::vector<ExplicitState> s(4);
  s[0] = {0, false, {{0.0, {{1, 1.0}}}, {0.0, {{2, 1.0}}}}};
  s[1] = {1, false, {{0.0, {{3, 1.0}}}}};
  s[2] = {1, false, {{0.0, {{3, 1.0}}}}};
  s[3] = {2, true, {}};
  ExplicitMdp mdp(std::move(s), 0);
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::none, 10));
  t.run();
  const std::size_t merged = t.find_node(mdp.handle(3));
  ASSERT_NE(merged, kNone);
  EXPECT_EQ(t.node(merged).incoming_edges(), 2u);
  EXPECT_EQ(t.nodes().size(), 4u);
}

TEST(Select, DepthGrowsOnAChain) {
  auto mdp = testing::chain(4, 1.0);
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::none, 10));
  for (std::size_t i = 1; i <= 10; ++i) {
    t.iterate();
    std::uint32_t depth = 0;
    for (const auto& n : t.nodes()) depth = std::max(depth, n.depth);
    EXPECT_EQ(depth, std::min<std::size_t>(i, 4));
  }
}

TEST(Rollout, TerminalAndConstantChain) {
  auto mdp = testing::chain(10, 1.0);
  SearchParams p = params_for(AbstractionMode::none, 1);
  p.rollout_horizon = 4;
  SearchTree t(mdp, mdp.handle(0), p);
  EXPECT_EQ(t.rollout_from(mdp.handle(10)), 0.0);
  EXPECT_EQ(t.rollout_from(mdp.handle(0)), 4.0);
}

TEST(Rollout, CoinMeanMatchesExpectation) {
  auto mdp = testing::coin();
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::none, 1));
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += t.rollout_from(mdp.handle(0));
  const double mean = sum / n;
  const double se = std::sqrt(0.3 * 0.7 / n);
  EXPECT_LE(std::abs(mean - 0.3), 3.0 * se);
}

TEST(Backup, AccumulatesRewardAndLeafValue) {
  auto mdp = testing::bandit({2.0});
  SearchParams p = params_for(AbstractionMode::none, 1);
  SearchTree t(mdp, mdp.handle(0), p);
  Descent d = t.select_and_expand();
  ASSERT_EQ(d.path.size(), 1u);
  t.backup({{d.path[0].qnode, 2.0}}, 3.0);
  EXPECT_EQ(t.qnode(d.path[0].qnode).total, 5.0);
}

TEST(Backup, OffsetAddedToAggregate) {
  auto mdp = testing::bandit({0.0});
  SearchParams p = params_for(AbstractionMode::kvda, 1);
  p.recency_threshold = 100;
  SearchTree t(mdp, mdp.handle(0), p);
  const std::size_t q = t.select_and_expand().path[0].qnode;
  t.debug_set_q_offset(q, 1.0);
  const double before = t.abstract_qnodes()[t.qnode(q).abstract].total;
  t.backup({{q, 0.0}}, 4.0);
  EXPECT_EQ(t.abstract_qnodes()[t.qnode(q).abstract].total - before, 5.0);
}

TEST(Backup, RecencyThresholdTriggersOneRefresh) {
  auto mdp = testing::bandit({1.0});
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::oga, 3));
  t.iterate();
  t.iterate();
  EXPECT_EQ(t.q_refreshes(), 0u);
  t.iterate();
  EXPECT_EQ(t.q_refreshes(), 1u);
  EXPECT_EQ(t.qnode(0).recency, 0u);
}

TEST(Search, PicksDominantArm) {
  auto mdp = testing::bandit({1.0, 0.0});
  for (auto mode : {AbstractionMode::none, AbstractionMode::oga, AbstractionMode::kvda}) {
    EXPECT_EQ(search(mdp, mdp.handle(0), params_for(mode, 200)).action, 0u);
  }
}

TEST(Search, TerminalRootIsAnError) {
  auto mdp = testing::bandit({1.0});
  EXPECT_THROW(search(mdp, mdp.handle(1), params_for(AbstractionMode::kvda, 10)), TerminalStateError);
}

TEST(Search, InvalidParamsRejected) {
  auto mdp = testing::bandit({1.0});
  SearchParams p = params_for(AbstractionMode::kvda, 10);
  p.eps_t = 2.5;
  EXPECT_THROW(search(mdp, mdp.handle(0), p), ConfigError);
}

TEST(Search, FourStateKvdaEstimatesAreExact) {
  auto mdp = make_four_state_mdp();
  auto r = search(mdp, mdp.handle(0), params_for(AbstractionMode::kvda, 100));
  ASSERT_EQ(r.stats.root_actions.size(), 2u);
  for (const auto& a : r.stats.root_actions) EXPECT_NEAR(a.q, 1.0, 1e-6);
}

TEST(Search, FourStateKvdaFindsAllThreeGroups) {
  auto mdp = make_four_state_mdp();
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::kvda, 100));
  t.run();
  EXPECT_EQ(groups(t).size(), 2u);
  EXPECT_EQ(t.node(t.find_node(mdp.handle(1))).abstract, t.node(t.find_node(mdp.handle(2))).abstract);
  auto v = verify_search_against_oracle(mdp, t);
  EXPECT_TRUE(v.ok()) << v.violations.front();
  EXPECT_EQ(v.q_pairs_checked, 2u);
  EXPECT_GE(v.state_pairs_checked, 1u);
}

TEST(Search, DeterministicForFixedSeed) {
  RandomMdpOptions opt;
  opt.seed = 11;
  opt.n_states = 40;
  opt.stochastic = true;
  auto mdp = random_explicit_mdp(opt);
  for (auto mode : {AbstractionMode::none, AbstractionMode::oga, AbstractionMode::kvda}) {
    auto a = search(mdp, mdp.handle(0), params_for(mode, 500, 9));
    auto b = search(mdp, mdp.handle(0), params_for(mode, 500, 9));
    EXPECT_EQ(a.stats, b.stats);
  }
}

TEST(OgaAbstraction, RewardToleranceControlsGrouping) {
  auto mdp = testing::bandit({1.0, 1.4});
  auto grouped = [&](double eps_a) {
    SearchParams p = params_for(AbstractionMode::oga, 30);
    p.eps_a = eps_a;
    p.recency_threshold = 1;
    SearchTree t(mdp, mdp.handle(0), p);
    t.run();
    const auto& root = t.node(t.root());
    return t.qnode(root.actions[0]).abstract == t.qnode(root.actions[1]).abstract;
  };
  EXPECT_TRUE(grouped(0.5));
  EXPECT_FALSE(grouped(0.0));
  EXPECT_TRUE(grouped(std::numeric_limits<double>::infinity()));
}

TEST(OgaAbstraction, SignatureSumsMassesPerAbstractState) {
  SuccessorProfile p{{4, 0.3}, {2, 0.5}, {4, 0.7}};
  normalize_profile(p);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0], (std::pair<std::size_t, double>{2, 0.5}));
  EXPECT_EQ(p[1].first, 4u);
  EXPECT_DOUBLE_EQ(p[1].second, 1.0);
  EXPECT_DOUBLE_EQ(transition_error({{1, 0.5}, {2, 0.5}}, {{1, 0.25}, {3, 0.75}}), 0.25 + 0.5 + 0.75);
}

TEST(OgaAbstraction, DeterministicSignature) {
  auto mdp = testing::bandit({2.0});
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::oga, 1));
  t.run();
  const auto sig = t.signature_of(0);
  EXPECT_EQ(sig.reward, 2.0);
  ASSERT_EQ(sig.profile.size(), 1u);
  EXPECT_EQ(sig.profile[0].first, t.node(t.find_node(mdp.handle(1))).abstract);
  EXPECT_EQ(sig.profile[0].second, 1.0);
}

TEST(OgaAbstraction, TerminalsOfALayerShareOneNode) {
  std::vector<ExplicitState> s(3);
  s[0] = {0, false, {{0.0, {{1, 1.0}}}, {5.0, {{2, 1.0}}}}};
  s[1] = {1, true, {}};
  s[2] = {1, true, {}};
  ExplicitMdp mdp(std::move(s), 0);
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::oga, 4));
  t.run();
  EXPECT_EQ(t.node(t.find_node(mdp.handle(1))).abstract, t.node(t.find_node(mdp.handle(2))).abstract);
}

TEST(OgaAbstraction, NoOpRefreshDoesNotPropagate) {
  auto mdp = make_four_state_mdp();
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::oga, 100));
  t.run();
  const auto states_before = t.state_refreshes();
  const std::size_t q = t.node(t.find_node(mdp.handle(1))).actions[0];
  EXPECT_FALSE(t.refresh_q(q));
  t.process_refreshes();
  EXPECT_EQ(t.state_refreshes(), states_before);
}

/// Layer-1 states s1 and s2 each with action x into a terminal and action y
/// into a non-terminal; rewards chosen per test.
ExplicitMdp cross_difference_mdp(double x1, double y1, double x2, double y2) {
  std::vector<ExplicitState> s(7);
  s[0] = {0, false, {{0.0, {{1, 1.0}}}, {0.0, {{2, 1.0}}}}};
  s[1] = {1, false, {{x1, {{3, 1.0}}}, {y1, {{4, 1.0}}}}};
  s[2] = {1, false, {{x2, {{3, 1.0}}}, {y2, {{5, 1.0}}}}};
  s[3] = {2, true, {}};
  s[4] = {2, false, {{0.0, {{6, 1.0}}}}};
  s[5] = {2, false, {{0.0, {{6, 1.0}}}}};
  s[6] = {3, true, {}};
  return ExplicitMdp(std::move(s), 0);
}

TEST(KvdaAbstraction, StateMatchRequiresOneConstantDifference) {
  auto grouped = [](const ExplicitMdp& mdp) {
    SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::kvda, 300));
    t.run();
    EXPECT_TRUE(verify_search_against_oracle(mdp, t).ok());
    return t.node(t.find_node(mdp.handle(1))).abstract == t.node(t.find_node(mdp.handle(2))).abstract;
  };
  EXPECT_FALSE(grouped(cross_difference_mdp(0, 5, 1, 7)));  // differences 1 and 2
  EXPECT_TRUE(grouped(cross_difference_mdp(0, 5, 1, 6)));   // difference 1 twice
}

TEST(KvdaAbstraction, RewardsIgnoredInSignature) {
  auto mdp = testing::bandit({5.0, -3.0});
  SearchParams p = params_for(AbstractionMode::kvda, 30);
  p.recency_threshold = 1;
  SearchTree t(mdp, mdp.handle(0), p);
  t.run();
  const auto& root = t.node(t.root());
  EXPECT_EQ(t.qnode(root.actions[0]).abstract, t.qnode(root.actions[1]).abstract);
  // d_a(p1, p2) = Q(p2) - Q(p1) = -8.
  EXPECT_DOUBLE_EQ(t.qnode(root.actions[0]).offset - t.qnode(root.actions[1]).offset, -8.0);
}

TEST(KvdaAbstraction, ChangeRepresentativeRebasesAndPreservesMeans) {
  auto mdp = testing::two_branches(2.0, 0.0, 0.0, 2.0);
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::kvda, 60));
  t.run();
  const std::size_t p1 = t.node(t.find_node(mdp.handle(1))).actions[0];
  const std::size_t p2 = t.node(t.find_node(mdp.handle(2))).actions[0];
  const std::size_t abs = t.qnode(p1).abstract;
  ASSERT_EQ(abs, t.qnode(p2).abstract);
  // Representative p1 (Q = 0), so p2 (Q = 2) sits at offset -2; make p2 the
  // representative first so that p1 carries offset +2.
  t.change_q_representative(abs, p1);
  t.change_q_representative(abs, p2);
  ASSERT_DOUBLE_EQ(t.qnode(p1).offset, 2.0);
  ASSERT_DOUBLE_EQ(t.qnode(p2).offset, 0.0);
  // Now the two-member example: offsets {0, +2} with p1 the +2 member.
  t.change_q_representative(abs, p2);  // singleton-style no-op on the representative
  EXPECT_DOUBLE_EQ(t.qnode(p1).offset, 2.0);

  const auto n = t.abstract_qnodes()[abs].visits;
  const double total = t.abstract_qnodes()[abs].total;
  const double e1 = t.estimate(p1), e2 = t.estimate(p2);
  t.change_q_representative(abs, p1);
  // n * d_a(old, new) = n * (offset(old) - offset(new)) = -2n.
  EXPECT_DOUBLE_EQ(t.abstract_qnodes()[abs].total - total, -2.0 * static_cast<double>(n));
  EXPECT_DOUBLE_EQ(t.qnode(p1).offset, 0.0);
  EXPECT_DOUBLE_EQ(t.qnode(p2).offset, -2.0);
  EXPECT_NEAR(t.estimate(p1), e1, 1e-9);
  EXPECT_NEAR(t.estimate(p2), e2, 1e-9);
  EXPECT_LE(t.conservation_error(), 1e-9);
}

TEST(KvdaAbstraction, ConstantRewardsMatchOga) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RandomMdpOptions opt;
    opt.seed = seed;
    opt.n_states = 30;
    opt.reward_levels = 1;
    opt.stochastic = seed % 2 == 1;
    auto mdp = random_explicit_mdp(opt);
    auto oga = search(mdp, mdp.handle(0), params_for(AbstractionMode::oga, 500, seed));
    auto kvda = search(mdp, mdp.handle(0), params_for(AbstractionMode::kvda, 500, seed));
    EXPECT_EQ(oga.stats, kvda.stats) << seed;
  }
}

TEST(KvdaAbstraction, ExactAtFullExpansion) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RandomMdpOptions opt;
    opt.seed = 100 + seed;
    opt.n_states = 15;
    auto mdp = random_explicit_mdp(opt);
    for (auto mode : {AbstractionMode::oga, AbstractionMode::kvda}) {
      SearchTree t(mdp, mdp.handle(0), params_for(mode, 2000, seed));
      t.run();
      auto v = verify_search_against_oracle(mdp, t);
      EXPECT_TRUE(v.ok()) << mdp.name() << ": " << v.violations.front();
    }
  }
}

TEST(KvdaAbstraction, SingletonReadsGroundMeanExactly) {
  RandomMdpOptions opt;
  opt.seed = 21;
  opt.n_states = 60;
  opt.stochastic = true;
  opt.reward_levels = 5;
  auto mdp = random_explicit_mdp(opt);
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::kvda, 2000));
  t.run();
  std::size_t checked = 0;
  for (std::size_t q = 0; q < t.qnodes().size(); ++q) {
    if (t.abstract_qnodes()[t.qnode(q).abstract].members.size() != 1) continue;
    ++checked;
    EXPECT_EQ(t.estimate(q), t.qnode(q).mean());
  }
  EXPECT_GT(checked, 0u);
}

TEST(Verifier, FlagsACorruptedOffset) {
  auto mdp = make_four_state_mdp();
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::kvda, 500));
  t.run();
  ASSERT_TRUE(verify_search_against_oracle(mdp, t).ok());
  const auto g = groups(t);
  ASSERT_FALSE(g.empty());
  const auto& a = t.abstract_qnodes()[g.front()];
  const std::size_t member = a.members[0] == a.representative ? a.members[1] : a.members[0];
  t.debug_set_q_offset(member, t.qnode(member).offset + 0.5);
  EXPECT_EQ(verify_search_against_oracle(mdp, t).violations.size(), 1u);
}

TEST(Conservation, HoldsUnderRandomOperations) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    RandomMdpOptions opt;
    opt.seed = seed;
    opt.n_states = 25;
    opt.stochastic = seed % 2 == 0;
    opt.reward_levels = 4;
    auto mdp = random_explicit_mdp(opt);
    SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::kvda, 1, seed));
    Rng rng(seed);
    for (int step = 0; step < 60; ++step) {
      switch (uniform_index(rng, 3)) {
        case 0: t.iterate(); break;
        case 1:
          if (!t.qnodes().empty()) {
            t.stage_q(uniform_index(rng, t.qnodes().size()));
            t.process_refreshes();
          }
          break;
        default: {
          const auto& aq = t.abstract_qnodes();
          const std::size_t id = uniform_index(rng, std::max<std::size_t>(aq.size(), 1));
          if (id < aq.size() && aq[id].alive) {
            t.change_q_representative(id, aq[id].members[uniform_index(rng, aq[id].members.size())]);
          }
        }
      }
      ASSERT_LE(t.conservation_error(), 1e-6) << "seed " << seed << " step " << step;
    }
  }
}

TEST(Conservation, DetectsATamperedAggregate) {
  auto mdp = make_four_state_mdp();
  SearchTree t(mdp, mdp.handle(0), params_for(AbstractionMode::kvda, 200));
  t.run();
  ASSERT_EQ(t.conservation_error(), 0.0);
  const auto g = groups(t);
  ASSERT_FALSE(g.empty());
  t.debug_shift_aggregate(g.front(), 0.25);
  EXPECT_DOUBLE_EQ(t.conservation_error(), 0.25);
  EXPECT_FALSE(verify_search_against_oracle(mdp, t).ok());
}

}  // namespace
}  // namespace kvda
