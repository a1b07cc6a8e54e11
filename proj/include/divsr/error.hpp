#pragma once

#include <stdexcept>
#include <string>

namespace divsr {

// Malformed input files or graph contract violations.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration keys/values or incompatible model pairings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during optimization (non-finite gradients, etc.).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace divsr
