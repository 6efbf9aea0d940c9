#pragma once

#include <stdexcept>
#include <string>

namespace lrq {

/// Invalid arguments, malformed specs, unknown keys.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown: vanished weights, violated bounds, singular systems.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lrq
