#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kvda/core/types.hpp"

namespace kvda {

/// Performance of each agent (row) on each task (column); higher is better.
struct PerformanceMatrix {
  std::vector<std::string> agents;
  std::vector<std::string> tasks;
  std::vector<std::vector<std::optional<double>>> value;  // [agent][task]

  PerformanceMatrix(std::vector<std::string> a, std::vector<std::string> t)
      : agents(std::move(a)), tasks(std::move(t)), value(agents.size(), std::vector<std::optional<double>>(tasks.size())) {}
};

/// Entry (i, j) is (#tasks where i beats j - #tasks where i loses to j) / m;
/// agent i scores the mean of row i without the diagonal. Ties count zero.
/// Throws ConfigError when any agent lacks a result on any task.
inline std::vector<double> normalized_pairings_score(const PerformanceMatrix& perf) {
  const std::size_t n = perf.agents.size();
  const std::size_t m = perf.tasks.size();
  if (m == 0) throw ConfigError("pairings score needs at least one task");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < m; ++t)
      if (!perf.value.at(i).at(t)) {
        throw ConfigError("agent '" + perf.agents[i] + "' has no result on task '" + perf.tasks[t] + "'");
      }
  std::vector<double> score(n, 0.0);
  if (n < 2) return score;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      int wins = 0;
      for (std::size_t t = 0; t < m; ++t) {
        const double a = *perf.value[i][t], b = *perf.value[j][t];
        wins += (a > b) - (a < b);
      }
      row += static_cast<double>(wins) / static_cast<double>(m);
    }
    score[i] = row / static_cast<double>(n - 1);
  }
  return score;
}

}  // namespace kvda
