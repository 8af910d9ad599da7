#pragma once

#include <stdexcept>
#include <string>

namespace grokscale {

/// Invalid configuration: bad modulus, fraction, model shape, plant, etc.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (tokens out of range, too few rows, bad files).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values surfaced from training or fitting.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace grokscale
