#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace kvda {

/// z-value of the two-sided 98% / one-sided 99% interval used on every
/// reported mean.
inline constexpr double kCiZ = 2.33;

struct SampleSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double se = 0.0;            // sample standard deviation / sqrt(n)
  double ci_halfwidth = 0.0;  // kCiZ * se

  friend bool operator==(const SampleSummary&, const SampleSummary&) = default;
};

inline double ci_halfwidth(double se) { return kCiZ * se; }

/// Mean and standard error with the n - 1 variance; a single sample has
/// SE 0. Values are summed in the given order, so callers pass them sorted
/// by episode index for reproducible output.
inline SampleSummary summarize(const std::vector<double>& xs) {
  SampleSummary s;
  s.n = xs.size();
  if (s.n == 0) return s;
  long double sum = 0.0L;
  for (double x : xs) sum += x;
  s.mean = static_cast<double>(sum / static_cast<long double>(s.n));
  if (s.n > 1) {
    long double ss = 0.0L;
    for (double x : xs) ss += (x - s.mean) * static_cast<long double>(x - s.mean);
    const double var = static_cast<double>(ss / static_cast<long double>(s.n - 1));
    s.se = std::sqrt(var / static_cast<double>(s.n));
  }
  s.ci_halfwidth = ci_halfwidth(s.se);
  return s;
}

}  // namespace kvda
