#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sphereplane {

// Input outside the mathematical domain of an operation (d <= 0, destabilized
// oscillator, radius beyond the validity of an exact sagitta, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A numerical procedure failed to reach its requested accuracy.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, std::vector<double> history = {})
      : std::runtime_error(what), history_(std::move(history)) {}

  // Residual or error-estimate trail leading up to the failure, if any.
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

// Malformed configuration, schema violation or unparseable input file.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace sphereplane
