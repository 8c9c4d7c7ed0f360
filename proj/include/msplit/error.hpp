#pragma once

#include <stdexcept>
#include <string>

namespace msplit {

/// Bad user input: config keys, file formats, inconsistent sizes. Maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Factorization breakdown, non-convergence, NaN in a trajectory. Maps to exit code 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace msplit
