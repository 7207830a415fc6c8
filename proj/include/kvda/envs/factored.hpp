#pragma once

#include <vector>

#include "kvda/core/mdp.hpp"

namespace kvda {

/// Next-state distribution of independent binary variables: variable i is
/// true with probability p[i].
class BernoulliVector {
 public:
  explicit BernoulliVector(std::vector<double> p) : p_(std::move(p)) {}

  /// Joint draw plus its probability.
  std::pair<std::vector<bool>, double> sample(Rng& rng) const {
    std::vector<bool> bits(p_.size());
    double prob = 1.0;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      bits[i] = bernoulli(rng, p_[i]);
      prob *= bits[i] ? p_[i] : 1.0 - p_[i];
    }
    return {std::move(bits), prob};
  }

  /// Every joint value with non-zero probability; deterministic variables do
  /// not multiply the support.
  std::vector<std::pair<std::vector<bool>, double>> enumerate() const {
    std::vector<std::pair<std::vector<bool>, double>> out{{std::vector<bool>(p_.size()), 1.0}};
    for (std::size_t i = 0; i < p_.size(); ++i) {
      const double p = p_[i];
      if (p >= 1.0) {
        for (auto& [bits, prob] : out) bits[i] = true;
      } else if (p > 0.0) {
        const std::size_t n = out.size();
        for (std::size_t k = 0; k < n; ++k) {
          auto copy = out[k];
          copy.first[i] = true;
          copy.second *= p;
          out[k].second *= 1.0 - p;
          out.push_back(std::move(copy));
        }
      }
    }
    return out;
  }

 private:
  std::vector<double> p_;
};

inline std::string pack_bits(const std::vector<bool>& bits) {
  std::string out((bits.size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out[i / 8] = static_cast<char>(out[i / 8] | (1 << (i % 8)));
  return out;
}

inline std::vector<bool> unpack_bits(std::string_view bytes, std::size_t n) {
  if (bytes.size() != (n + 7) / 8) throw PreconditionError("state encoding has the wrong size");
  std::vector<bool> bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = (static_cast<unsigned char>(bytes[i / 8]) >> (i % 8)) & 1;
  return bits;
}

}  // namespace kvda
