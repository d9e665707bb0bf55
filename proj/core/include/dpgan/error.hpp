#pragma once

#include <stdexcept>
#include <string>

namespace dpgan {

/// Bad run configuration or usage. CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent data files. CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric failure: non-finite values, diverging training, quadrature that
/// cannot meet its tail bound. CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dpgan
