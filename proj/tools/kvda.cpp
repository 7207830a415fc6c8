// Command-line front end: run / sweep / absrate / score / oracle-check.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "kvda/harness/absrate.hpp"
#include "kvda/harness/oracle_check.hpp"
#include "kvda/harness/pairings.hpp"

namespace fs = std::filesystem;
using namespace kvda;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<std::size_t> threads;
  std::optional<std::size_t> episodes;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_config) {
  auto* opt = cmd->add_option("--config", f.config, "JSON configuration file");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
  cmd->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--episodes", f.episodes, "Episodes per cell (overrides the config)");
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << text;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string dir_of(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  return parent.empty() ? "." : parent.string();
}

void emit_records(const std::vector<ExperimentRecord>& rows, const fs::path& out) {
  std::ostringstream csv;
  write_csv(csv, rows);
  write_text(out / "results.csv", csv.str());
  write_text(out / "results.json", records_to_json(rows).dump(2) + "\n");
  std::cout << csv.str();
}

ExperimentConfig experiment_from(const CommonFlags& f) {
  auto cfg = load_experiment_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (f.episodes) cfg.episodes = *f.episodes;
  cfg.validate();
  return cfg;
}

ProgressFn stderr_progress() {
  return [](std::size_t done, std::size_t total) {
    if (done == total || done % std::max<std::size_t>(1, total / 20) == 0) {
      std::cerr << "\r" << done << "/" << total << " episodes" << (done == total ? "\n" : "") << std::flush;
    }
  };
}

int cmd_sweep(const CommonFlags& f) {
  const auto cfg = experiment_from(f);
  const auto out = prepare_out(f.out);
  emit_records(run_sweep(cfg, stderr_progress()), out);
  return 0;
}

struct RunOverrides {
  std::optional<std::string> algorithm;
  std::optional<std::size_t> budget;
  std::optional<double> c, eps_a, eps_t;
};

int cmd_run(const CommonFlags& f, const RunOverrides& o) {
  auto cfg = experiment_from(f);
  if (o.algorithm) cfg.algorithms = {*o.algorithm};
  if (o.budget) cfg.budgets = {*o.budget};
  if (o.c) cfg.c_values = {*o.c};
  if (o.eps_a) cfg.eps_a_values = {*o.eps_a};
  if (o.eps_t) cfg.eps_t_values = {*o.eps_t};
  cfg.validate();
  if (expand_grid(cfg).size() != 1) {
    throw ConfigError("'run' needs exactly one cell; narrow the config or use --algorithm/--budget/--C/--eps-a/--eps-t");
  }
  emit_records(run_sweep(cfg, stderr_progress()), prepare_out(f.out));
  return 0;
}

/// Keys: environments (list of registry files or objects), algorithms,
/// probes, probe_iterations, measure_iterations, C, stride, eps_a, eps_t,
/// recency_threshold, seed, threads.
int cmd_absrate(const CommonFlags& f, std::optional<std::size_t> probes) {
  const auto j = read_json(f.config);
  static const std::set<std::string> known{"environments", "algorithms", "probes", "probe_iterations",
                                           "measure_iterations", "C", "stride", "eps_a", "eps_t",
                                           "recency_threshold", "seed", "threads"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown absrate key '" + key + "'");
  AbsRateOptions opt;
  opt.probes = j.value("probes", opt.probes);
  opt.probe_iterations = j.value("probe_iterations", opt.probe_iterations);
  opt.measure_iterations = j.value("measure_iterations", opt.measure_iterations);
  opt.c = j.value("C", opt.c);
  opt.stride = j.value("stride", opt.stride);
  opt.recency_threshold = j.value("recency_threshold", opt.recency_threshold);
  opt.seed = f.seed.value_or(j.value("seed", opt.seed));
  opt.threads = f.threads.value_or(j.value("threads", opt.threads));
  if (probes) opt.probes = *probes;

  std::vector<std::pair<std::string, SearchParams>> algorithms;
  for (const auto& name : j.value("algorithms", std::vector<std::string>{"oga", "kvda"})) {
    const auto spec = algorithm_spec(name);
    SearchParams p;
    p.mode = spec.mode;
    if (spec.uses_eps_a && j.contains("eps_a")) p.eps_a = detail::json_real(j["eps_a"], "eps_a");
    if (spec.uses_eps_t && j.contains("eps_t")) p.eps_t = detail::json_real(j["eps_t"], "eps_t");
    p.validate();
    algorithms.emplace_back(name, p);
  }
  if (!j.contains("environments") || !j["environments"].is_array()) throw ConfigError("absrate needs an 'environments' list");
  std::vector<Environment> envs;
  for (const auto& e : j["environments"]) {
    envs.push_back(e.is_string() ? load_environment(dir_of(f.config) + "/" + e.get<std::string>())
                                 : make_environment(e, dir_of(f.config)));
  }

  const auto out = prepare_out(f.out);
  std::ostringstream csv;
  csv << "environment,algorithm,probes,abs_ratio,se\n";
  nlohmann::json js = nlohmann::json::array();
  for (const auto& env : envs) {
    std::cerr << "measuring " << env.id << "\n";
    for (const auto& r : measure_abstraction_ratio(env, algorithms, opt)) {
      const auto s = summarize(r.ratios);
      csv << env.id << "," << r.algorithm << "," << s.n << "," << real_to_text(s.mean) << "," << real_to_text(s.se) << "\n";
      js.push_back({{"environment", env.id}, {"algorithm", r.algorithm}, {"probes", s.n}, {"abs_ratio", s.mean},
                    {"se", s.se}, {"ratios", r.ratios}});
    }
  }
  write_text(out / "absrate.csv", csv.str());
  write_text(out / "absrate.json", js.dump(2) + "\n");
  std::cout << csv.str();
  return 0;
}

/// Agents are (algorithm, C, eps_a, eps_t) combinations, tasks are
/// (environment, budget) pairs; performance is the mean return.
int cmd_score(const CommonFlags& f, const std::vector<std::string>& inputs) {
  std::vector<ExperimentRecord> rows;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    auto part = read_csv(in);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  auto agent_of = [](const ExperimentRecord& r) {
    return r.algorithm + " C=" + real_to_text(r.c) + " eps_a=" + real_to_text(r.eps_a) + " eps_t=" + real_to_text(r.eps_t);
  };
  auto task_of = [](const ExperimentRecord& r) { return r.environment + "@" + std::to_string(r.budget); };
  std::map<std::string, std::size_t> agent_ix, task_ix;
  for (const auto& r : rows) {
    agent_ix.emplace(agent_of(r), 0);
    task_ix.emplace(task_of(r), 0);
  }
  std::vector<std::string> agents, tasks;
  for (auto& [k, v] : agent_ix) {
    v = agents.size();
    agents.push_back(k);
  }
  for (auto& [k, v] : task_ix) {
    v = tasks.size();
    tasks.push_back(k);
  }
  PerformanceMatrix m(agents, tasks);
  for (const auto& r : rows) {
    auto& cell = m.value[agent_ix[agent_of(r)]][task_ix[task_of(r)]];
    if (cell) throw ConfigError("duplicate result for " + agent_of(r) + " on " + task_of(r));
    cell = r.mean_return;
  }
  const auto scores = normalized_pairings_score(m);
  std::ostringstream csv;
  csv << "agent,score\n";
  for (std::size_t i = 0; i < agents.size(); ++i) csv << agents[i] << "," << real_to_text(scores[i]) << "\n";
  write_text(prepare_out(f.out) / "pairings.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_oracle_check(const CommonFlags& f, std::size_t mdps, bool inject) {
  OracleCheckOptions opt;
  opt.mdps = mdps;
  opt.seed = f.seed.value_or(0);
  opt.inject_sign_flip = inject;
  const auto rep = oracle_check(opt);
  const auto js = rep.to_json().dump(2);
  write_text(prepare_out(f.out) / "oracle_check.json", js + "\n");
  std::cout << js << "\n";
  return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Value-difference abstractions for Monte Carlo tree search"};
  app.require_subcommand(1);

  CommonFlags run_f, sweep_f, abs_f, score_f, oracle_f;
  RunOverrides over;
  auto* run = app.add_subcommand("run", "Run a single experiment cell");
  add_common(run, run_f, true);
  run->add_option("--algorithm", over.algorithm, "uct | oga | eps-oga | kvda | eps-kvda");
  run->add_option("--budget", over.budget, "Search iterations per decision");
  run->add_option("--C", over.c, "Exploration scale");
  run->add_option("--eps-a", over.eps_a, "Reward tolerance (eps-oga)");
  run->add_option("--eps-t", over.eps_t, "Transition tolerance (eps-oga, eps-kvda)");

  auto* sweep = app.add_subcommand("sweep", "Run the full parameter grid of an experiment config");
  add_common(sweep, sweep_f, true);

  std::optional<std::size_t> probes;
  auto* abs = app.add_subcommand("absrate", "Measure abstraction ratios on probe states");
  add_common(abs, abs_f, true);
  abs->add_option("--probes", probes, "Probe states per environment");

  std::vector<std::string> inputs;
  auto* score = app.add_subcommand("score", "Normalized pairings score from result CSVs");
  add_common(score, score_f, false);
  score->add_option("inputs", inputs, "Result CSV files")->required()->check(CLI::ExistingFile);

  std::size_t mdps = 100;
  bool inject = false;
  auto* oracle = app.add_subcommand("oracle-check", "Run the exact-abstraction property battery");
  add_common(oracle, oracle_f, false);
  oracle->add_option("--mdps", mdps, "Random MDPs in the battery")->capture_default_str();
  oracle->add_flag("--inject-sign-flip", inject, "Negate KVDA offsets to exercise the checker");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_f, over);
    if (*sweep) return cmd_sweep(sweep_f);
    if (*abs) return cmd_absrate(abs_f, probes);
    if (*score) return cmd_score(score_f, inputs);
    if (*oracle) return cmd_oracle_check(oracle_f, mdps, inject);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
