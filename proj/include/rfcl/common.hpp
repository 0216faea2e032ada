#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rfcl {

// All storage and reductions use double precision.
using real = double;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or layer shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value, unknown tag, or unusable state.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Batch plans, counters, or file lists violate the protocol contract.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or singular systems.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Per-pattern activation geometry: channels x height x width.
// Flat feature vectors use height = width = 1.
struct Shape3 {
  std::size_t channels = 0;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t spatial() const { return height * width; }
  std::size_t size() const { return channels * height * width; }
  bool operator==(const Shape3&) const = default;
};

std::string to_string(const Shape3& s);

}  // namespace rfcl
