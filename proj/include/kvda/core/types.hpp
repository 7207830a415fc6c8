#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kvda {

/// Byte-encoded domain state plus its decision depth. Two handles are the same
/// state iff both the encoding and the layer agree, so the finite horizon is
/// part of the state identity.
struct StateHandle {
  std::string encoding;
  std::uint32_t layer = 0;

  friend bool operator==(const StateHandle&, const StateHandle&) = default;
  friend auto operator<=>(const StateHandle&, const StateHandle&) = default;
};

/// Index into the ordered list of actions available at a state.
using ActionId = std::size_t;

struct Outcome {
  StateHandle successor;
  double probability = 1.0;
  double reward = 0.0;

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

class MdpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public MdpError {
 public:
  using MdpError::MdpError;
};

class TerminalStateError : public MdpError {
 public:
  using MdpError::MdpError;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kvda

template <>
struct std::hash<kvda::StateHandle> {
  std::size_t operator()(const kvda::StateHandle& s) const noexcept {
    std::size_t h = std::hash<std::string_view>{}(s.encoding);
    return h ^ (static_cast<std::size_t>(s.layer) * 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2));
  }
};
