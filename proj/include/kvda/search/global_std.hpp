#pragma once

#include <cmath>
#include <cstddef>

namespace kvda {

/// Population standard deviation of a multiset of reals under insertion and
/// removal. Sums are kept in extended precision relative to the first value
/// ever inserted, so a set of identical values has a spread of exactly zero.
class RunningSpread {
 public:
  void add(double x) {
    if (!has_shift_) {
      shift_ = x;
      has_shift_ = true;
    }
    const long double d = static_cast<long double>(x) - shift_;
    s1_ += d;
    s2_ += d * d;
    ++count_;
  }

  void remove(double x) {
    const long double d = static_cast<long double>(x) - shift_;
    s1_ -= d;
    s2_ -= d * d;
    --count_;
  }

  std::size_t count() const { return count_; }

  double population_std() const {
    if (count_ == 0) return 0.0;
    const long double n = static_cast<long double>(count_);
    const long double mean = s1_ / n;
    const long double var = s2_ / n - mean * mean;
    // Cancellation residue after many updates is far below this floor.
    const long double floor = 1e-24L * (1.0L + s2_ / n);
    if (var <= floor) return 0.0;
    return static_cast<double>(std::sqrt(var));
  }

 private:
  long double shift_ = 0.0L;
  long double s1_ = 0.0L;
  long double s2_ = 0.0L;
  std::size_t count_ = 0;
  bool has_shift_ = false;
};

}  // namespace kvda
