#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kvda/core/types.hpp"

namespace kvda {

/// One aggregated sweep cell. Column order of the CSV is fixed; see
/// kRecordColumns.
struct ExperimentRecord {
  std::string environment;
  std::string algorithm;
  std::size_t budget = 0;
  double c = 0.0;
  double eps_a = 0.0;
  double eps_t = 0.0;
  std::size_t episodes = 0;
  double mean_return = 0.0;
  double se = 0.0;
  double ci_halfwidth = 0.0;
  double abs_ratio = 1.0;  // mean over all decisions of the cell
  double wall_ms = 0.0;    // summed episode wall time
  // Not part of the frozen columns.
  double mean_q_refreshes = 0.0;
  double mean_state_refreshes = 0.0;
};

inline constexpr std::array<const char*, 12> kRecordColumns{
    "environment", "algorithm", "budget",       "C",         "eps_a",   "eps_t",
    "episodes",    "mean_return", "se", "ci_halfwidth", "abs_ratio", "wall_ms"};

/// Shortest round-trip text of a double; non-finite values as inf / -inf / nan.
inline std::string real_to_text(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline double real_from_text(const std::string& s) {
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s == "nan") return NAN;
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) throw ConfigError("not a number: '" + s + "'");
  return v;
}

inline std::size_t count_from_text(const std::string& s) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) throw ConfigError("not a count: '" + s + "'");
  return v;
}

inline std::vector<std::string> record_fields(const ExperimentRecord& r) {
  return {r.environment,
          r.algorithm,
          std::to_string(r.budget),
          real_to_text(r.c),
          real_to_text(r.eps_a),
          real_to_text(r.eps_t),
          std::to_string(r.episodes),
          real_to_text(r.mean_return),
          real_to_text(r.se),
          real_to_text(r.ci_halfwidth),
          real_to_text(r.abs_ratio),
          real_to_text(r.wall_ms)};
}

inline void write_csv(std::ostream& os, const std::vector<ExperimentRecord>& rows) {
  for (std::size_t i = 0; i < kRecordColumns.size(); ++i) os << (i ? "," : "") << kRecordColumns[i];
  os << '\n';
  for (const auto& r : rows) {
    const auto f = record_fields(r);
    for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << f[i];
    os << '\n';
  }
}

inline std::vector<ExperimentRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty results file");
  std::string expected;
  for (std::size_t i = 0; i < kRecordColumns.size(); ++i) expected += std::string(i ? "," : "") + kRecordColumns[i];
  if (line != expected) throw ConfigError("unexpected CSV header: " + line);
  std::vector<ExperimentRecord> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != kRecordColumns.size()) {
      throw ConfigError("CSV line " + std::to_string(line_no) + " has " + std::to_string(f.size()) + " fields");
    }
    ExperimentRecord r;
    r.environment = f[0];
    r.algorithm = f[1];
    r.budget = count_from_text(f[2]);
    r.c = real_from_text(f[3]);
    r.eps_a = real_from_text(f[4]);
    r.eps_t = real_from_text(f[5]);
    r.episodes = count_from_text(f[6]);
    r.mean_return = real_from_text(f[7]);
    r.se = real_from_text(f[8]);
    r.ci_halfwidth = real_from_text(f[9]);
    r.abs_ratio = real_from_text(f[10]);
    r.wall_ms = real_from_text(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// JSON array with one object per row and the CSV column names as keys.
/// Reals are JSON numbers when finite and the CSV strings otherwise.
inline nlohmann::json records_to_json(const std::vector<ExperimentRecord>& rows) {
  auto real = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return real_to_text(v);
  };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"environment", r.environment},
                   {"algorithm", r.algorithm},
                   {"budget", r.budget},
                   {"C", real(r.c)},
                   {"eps_a", real(r.eps_a)},
                   {"eps_t", real(r.eps_t)},
                   {"episodes", r.episodes},
                   {"mean_return", real(r.mean_return)},
                   {"se", real(r.se)},
                   {"ci_halfwidth", real(r.ci_halfwidth)},
                   {"abs_ratio", real(r.abs_ratio)},
                   {"wall_ms", real(r.wall_ms)}});
  }
  return out;
}

}  // namespace kvda
