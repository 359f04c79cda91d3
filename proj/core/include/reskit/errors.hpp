#pragma once

#include <stdexcept>
#include <string>

namespace reskit {

/// Invalid user input: bad table, bad grid, malformed config file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: non-convergence, singular factorization.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent data handed between stages (shape/schema mismatch,
/// missing artifact).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace reskit
