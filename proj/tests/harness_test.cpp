#include <gtest/gtest.h>

#include <sstream>

#include "kvda/harness/absrate.hpp"
#include "kvda/harness/oracle_check.hpp"
#include "kvda/harness/pairings.hpp"

namespace kvda {
namespace {

// ---------------------------------------------------------------- Summary

TEST(Summary, IdenticalReturnsHaveZeroError) {
  const auto s = summarize({3.5, 3.5, 3.5, 3.5});
  EXPECT_EQ(s.mean, 3.5);
  EXPECT_EQ(s.se, 0.0);
  EXPECT_EQ(s.ci_halfwidth, 0.0);
}

TEST(Summary, TwoSamplesByHand) {
  // Sample std of {0, 2} is sqrt(2); SE = sqrt(2) / sqrt(2) = 1.
  const auto s = summarize({0.0, 2.0});
  EXPECT_EQ(s.n, 2u);
  EXPECT_EQ(s.mean, 1.0);
  EXPECT_DOUBLE_EQ(s.se, 1.0);
  EXPECT_DOUBLE_EQ(s.ci_halfwidth, 2.33);
}

TEST(Summary, SingleSampleAndEmpty) {
  EXPECT_EQ(summarize({4.0}).se, 0.0);
  EXPECT_EQ(summarize({}).n, 0u);
}

// ---------------------------------------------------------------- Pairings

PerformanceMatrix matrix(const std::vector<std::vector<double>>& v) {
  std::vector<std::string> agents, tasks;
  for (std::size_t i = 0; i < v.size(); ++i) agents.push_back("a" + std::to_string(i));
  for (std::size_t t = 0; t < v.front().size(); ++t) tasks.push_back("t" + std::to_string(t));
  PerformanceMatrix m(agents, tasks);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t t = 0; t < v[i].size(); ++t) m.value[i][t] = v[i][t];
  return m;
}

TEST(Pairings, TwoAgentsOneDominates) {
  EXPECT_EQ(normalized_pairings_score(matrix({{5, 7}, {1, 2}})), (std::vector<double>{1.0, -1.0}));
}

TEST(Pairings, IdenticalAgentsScoreZero) {
  EXPECT_EQ(normalized_pairings_score(matrix({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}})), (std::vector<double>(3, 0.0)));
}

TEST(Pairings, WinCycleScoresZero) {
  // Task 0: a > b > c, task 1: b > c > a, task 2: c > a > b.
  const auto s = normalized_pairings_score(matrix({{3, 1, 2}, {2, 3, 1}, {1, 2, 3}}));
  EXPECT_EQ(s, (std::vector<double>(3, 0.0)));
}

TEST(Pairings, MixedHandExample) {
  // a0 beats a1 on both tasks and ties a2 on task 0, loses task 1:
  //   row a0: (2/2, (0 - 1)/2) -> mean 0.25
  //   row a1: (-1, -1) -> -1;  row a2: (0.5, 1) -> 0.75
  const auto s = normalized_pairings_score(matrix({{2, 2}, {1, 1}, {2, 3}}));
  EXPECT_EQ(s, (std::vector<double>{0.25, -1.0, 0.75}));
}

TEST(Pairings, MissingCellIsAnError) {
  auto m = matrix({{1, 2}, {3, 4}});
  m.value[1][0].reset();
  EXPECT_THROW(normalized_pairings_score(m), ConfigError);
}

// ---------------------------------------------------------------- Sweep

nlohmann::json small_experiment() {
  return nlohmann::json{
      {"environment", {{"environment", "sysadmin"}, {"machines", 4}, {"horizon", 6}}},
      {"algorithms", {"kvda"}},
      {"budgets", {20, 40}},
      {"C", {1.0, 2.0}},
      {"episodes", 10},
      {"seed", 7},
      {"threads", 2}};
}

std::string csv_without_wall(std::vector<ExperimentRecord> rows) {
  for (auto& r : rows) r.wall_ms = 0.0;
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

TEST(Sweep, GridProducesOneRowPerCell) {
  const auto rows = run_sweep(parse_experiment_config(small_experiment()));
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.episodes, 10u);
    EXPECT_EQ(r.environment, "d-sysadmin");
    EXPECT_EQ(r.ci_halfwidth, 2.33 * r.se);
    EXPECT_GT(r.abs_ratio, 0.0);
    EXPECT_LE(r.abs_ratio, 1.0);
  }
  EXPECT_EQ(rows[0].budget, 20u);
  EXPECT_EQ(rows[0].c, 1.0);
  EXPECT_EQ(rows[1].c, 2.0);
  EXPECT_EQ(rows[3].budget, 40u);
}

TEST(Sweep, EpsilonGridAppliesOnlyWhereUsed) {
  auto j = small_experiment();
  j["algorithms"] = {"uct", "eps-oga", "eps-kvda"};
  j["budgets"] = {20};
  j["C"] = 2.0;
  j["eps_a"] = {0, "inf"};
  j["eps_t"] = {0, 0.5};
  const auto cells = expand_grid(parse_experiment_config(j));
  // uct: 1, eps-oga: 2 x 2, eps-kvda: 2.
  ASSERT_EQ(cells.size(), 7u);
  EXPECT_TRUE(std::isinf(cells[3].eps_a));
  EXPECT_EQ(cells[5].algorithm, "eps-kvda");
  EXPECT_EQ(cells[6].eps_t, 0.5);
  EXPECT_EQ(cells[6].eps_a, 0.0);
}

TEST(Sweep, SameConfigAndSeedGiveIdenticalCsv) {
  auto cfg = parse_experiment_config(small_experiment());
  const auto a = csv_without_wall(run_sweep(cfg));
  cfg.threads = 1;
  const auto b = csv_without_wall(run_sweep(cfg));
  EXPECT_EQ(a, b);
  cfg.seed = 8;
  EXPECT_NE(a, csv_without_wall(run_sweep(cfg)));
}

TEST(Sweep, CellResultsIgnoreGridOrder) {
  auto j = small_experiment();
  const auto forward = run_sweep(parse_experiment_config(j));
  j["budgets"] = {40, 20};
  j["C"] = {2.0, 1.0};
  auto backward = run_sweep(parse_experiment_config(j));
  std::reverse(backward.begin(), backward.end());
  EXPECT_EQ(csv_without_wall(forward), csv_without_wall(backward));
}

TEST(Sweep, ConfigErrorsSurfaceBeforeRunning) {
  auto j = small_experiment();
  j["algorithms"] = {"kvda", "alphazero"};
  EXPECT_THROW(parse_experiment_config(j), ConfigError);
  j = small_experiment();
  j["environment"]["environment"] = "pong";
  EXPECT_THROW(parse_experiment_config(j), ConfigError);
  j = small_experiment();
  j["episodes"] = 0;
  EXPECT_THROW(parse_experiment_config(j), ConfigError);
  j = small_experiment();
  j["eps_t"] = 3.0;
  EXPECT_THROW(parse_experiment_config(j), ConfigError);
  j = small_experiment();
  j["budget"] = 10;
  EXPECT_THROW(parse_experiment_config(j), ConfigError);
}

TEST(Sweep, HorizonOverrideReachesEnvironment) {
  auto j = small_experiment();
  j["horizon"] = 3;
  j["search_horizon"] = 2;
  const auto cfg = parse_experiment_config(j);
  const auto env = make_environment(cfg.environment);
  EXPECT_EQ(env.model->horizon(), 3u);
  EXPECT_EQ(env.search_horizon, 2u);
}

TEST(Sweep, EnvironmentMayBeAFileRelativeToTheConfig) {
  nlohmann::json j = small_experiment();
  j["environment"] = "sysadmin.json";
  const auto cfg = parse_experiment_config(j, KVDA_SOURCE_DIR "/configs");
  EXPECT_EQ(make_environment(cfg.environment, cfg.base_dir).id, "d-sysadmin");
}

TEST(Sweep, ExampleExperimentConfigsParse) {
  for (const char* name : {"sweep_sysadmin.json", "sweep_connect4.json", "absrate.json"}) {
    std::ifstream in(std::string(KVDA_SOURCE_DIR "/configs/experiments/") + name);
    ASSERT_TRUE(in) << name;
  }
  EXPECT_NO_THROW(load_experiment_config(KVDA_SOURCE_DIR "/configs/experiments/sweep_sysadmin.json"));
  EXPECT_NO_THROW(load_experiment_config(KVDA_SOURCE_DIR "/configs/experiments/sweep_connect4.json"));
}

// ---------------------------------------------------------------- CSV

TEST(Csv, HeaderIsFrozen) {
  std::ostringstream os;
  write_csv(os, {});
  EXPECT_EQ(os.str(),
            "environment,algorithm,budget,C,eps_a,eps_t,episodes,mean_return,se,ci_halfwidth,abs_ratio,wall_ms\n");
}

TEST(Csv, RoundTripIsExact) {
  ExperimentRecord r;
  r.environment = "d-sysadmin";
  r.algorithm = "eps-oga";
  r.budget = 1000;
  r.c = 0.5;
  r.eps_a = INFINITY;
  r.eps_t = 0.1;
  r.episodes = 200;
  r.mean_return = 1.0 / 3.0;
  r.se = 0.1 + 0.2;
  r.ci_halfwidth = 2.33 * r.se;
  r.abs_ratio = 0.123456789012345;
  r.wall_ms = 12.5;
  std::stringstream ss;
  write_csv(ss, {r, r});
  const auto back = read_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].mean_return, r.mean_return);
  EXPECT_EQ(back[0].se, r.se);
  EXPECT_EQ(back[0].ci_halfwidth, r.ci_halfwidth);
  EXPECT_TRUE(std::isinf(back[0].eps_a));
  EXPECT_EQ(back[0].abs_ratio, r.abs_ratio);
  const auto j = records_to_json({r});
  EXPECT_EQ(j[0]["eps_a"], "inf");
  EXPECT_EQ(j[0]["mean_return"].get<double>(), r.mean_return);
  EXPECT_EQ(j[0].size(), kRecordColumns.size());
}

TEST(Csv, RejectsForeignFiles) {
  std::stringstream bad_header("a,b,c\n");
  EXPECT_THROW(read_csv(bad_header), ConfigError);
  std::stringstream short_row(
      "environment,algorithm,budget,C,eps_a,eps_t,episodes,mean_return,se,ci_halfwidth,abs_ratio,wall_ms\nx,y,1\n");
  EXPECT_THROW(read_csv(short_row), ConfigError);
}

// ---------------------------------------------------------------- Abstraction rate

TEST(AbsRate, NonAbstractingSearchReportsOne) {
  const auto env = make_environment(nlohmann::json{{"environment", "sysadmin"}, {"machines", 4}, {"horizon", 8}});
  AbsRateOptions opt;
  opt.probes = 6;
  opt.probe_iterations = 50;
  opt.measure_iterations = 200;
  opt.stride = 2;
  SearchParams uct;
  uct.mode = AbstractionMode::none;
  SearchParams kvda;
  kvda.mode = AbstractionMode::kvda;
  const auto r = measure_abstraction_ratio(env, {{"uct", uct}, {"kvda", kvda}}, opt);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].ratios.size(), 6u);
  EXPECT_EQ(r[0].mean_ratio, 1.0);
  EXPECT_LT(r[1].mean_ratio, 1.0);
  for (double x : r[1].ratios) {
    EXPECT_GT(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(AbsRate, ProbeCollectionIsDeterministic) {
  const auto env = make_environment(nlohmann::json{{"environment", "sailing_wind"}, {"size", 4}, {"horizon", 10}});
  AbsRateOptions opt;
  opt.probes = 5;
  opt.probe_iterations = 30;
  opt.stride = 1;
  const auto a = collect_probe_states(env, opt);
  opt.threads = 3;
  const auto b = collect_probe_states(env, opt);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].state, b[i].state);
}

// ---------------------------------------------------------------- Oracle check

TEST(OracleCheck, DefaultBatteryPasses) {
  OracleCheckOptions opt;
  opt.mdps = 30;
  opt.search_mdps = 4;
  const auto rep = oracle_check(opt);
  EXPECT_TRUE(rep.ok()) << rep.to_json().dump(2);
  const auto j = rep.to_json();
  EXPECT_TRUE(j["ok"].get<bool>());
  for (const auto& p : j["properties"]) EXPECT_GE(p["passed"].get<std::size_t>(), p["minimum"].get<std::size_t>());
}

TEST(OracleCheck, InjectedSignFlipIsReported) {
  OracleCheckOptions opt;
  opt.mdps = 30;
  opt.search_mdps = 1;
  opt.inject_sign_flip = true;
  const auto rep = oracle_check(opt);
  EXPECT_FALSE(rep.ok());
  bool soundness_failed = false;
  for (const auto& p : rep.properties)
    if (p.name == "kvda_soundness") soundness_failed = p.passed < p.checked;
  EXPECT_TRUE(soundness_failed);
}

}  // namespace
}  // namespace kvda
