#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phm {

/// Invalid configuration or parameter values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two fields were combined on different grids.
class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A quantity that is undefined for the given input (e.g. a ratio on zero data).
class UndefinedQuantity : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Time integration produced a non-finite value, or a hard CFL violation.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Malformed or incompatible snapshot file.
class SnapshotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace phm
