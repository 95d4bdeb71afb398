#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sparseobs {

/// Mismatched vector or matrix dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the admissible domain (nonpositive weight, negative time, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Integration produced a non-finite state.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double blowup_time)
      : std::runtime_error(what), blowup_time_(blowup_time) {}
  [[nodiscard]] double blowup_time() const noexcept { return blowup_time_; }

 private:
  double blowup_time_;
};

/// Exhaustive enumeration would exceed the configured support budget.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The residual ball cannot be met: eps is below the least-squares residual.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double min_residual)
      : std::runtime_error(what), min_residual_(min_residual) {}
  [[nodiscard]] double min_residual() const noexcept { return min_residual_; }

 private:
  double min_residual_;
};

/// A bound was requested from a certificate whose conditions fail.
class CertificateError : public std::runtime_error {
 public:
  CertificateError(const std::string& what, std::vector<std::string> reasons)
      : std::runtime_error(what), reasons_(std::move(reasons)) {}
  [[nodiscard]] const std::vector<std::string>& reasons() const noexcept { return reasons_; }

 private:
  std::vector<std::string> reasons_;
};

/// Malformed configuration or input document.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sparseobs
