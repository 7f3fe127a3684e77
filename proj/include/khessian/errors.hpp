#pragma once

#include <stdexcept>
#include <string>

namespace khess {

/// Argument outside the mathematical domain of an operation (k > n, index out of range, δ ≤ 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A documented precondition of an operation does not hold (λ ∉ Γ_k, u ≥ 0, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data (non-Hermitian matrix, non-finite spectrum, bad CSV).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Evaluation at the pole z = 0 of a fundamental-solution based barrier.
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Problem configuration is inadmissible; the message names the failing inequality or field.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Newton iteration failed; `diagnostics` carries the residual history and cone-exit counts.
class NonconvergenceError : public std::runtime_error {
 public:
  NonconvergenceError(const std::string& what, std::string diagnostics)
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}

  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

}  // namespace khess
