#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace irf {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or inconsistent configuration (JSON schema, missing model data).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulated state became NaN or infinite.
class NumericOverflow : public std::overflow_error {
 public:
  NumericOverflow(std::size_t step, const std::string& what)
      : std::overflow_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// No Bernstein constant fits the sample: the moments grow too fast.
class HeavyTailError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace irf
