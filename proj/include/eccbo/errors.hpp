#pragma once

#include <stdexcept>
#include <string>

namespace eccbo {

/// Caller broke a documented precondition (dimension mismatch, bad bounds, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Cholesky factorization failed even after the largest jitter.
class NonPositiveDefinite : public std::runtime_error {
 public:
  explicit NonPositiveDefinite(double final_jitter)
      : std::runtime_error("covariance matrix not positive definite (final jitter " +
                           std::to_string(final_jitter) + ")"),
        final_jitter_(final_jitter) {}
  double final_jitter() const noexcept { return final_jitter_; }

 private:
  double final_jitter_;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationBlowup : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UncontrollablePairing : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class BoxViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scenario file problem; `field()` names the offending entry.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace eccbo
