#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lacal {

enum class ErrorKind {
  invalid_geometry,
  topology,
  missing_region,
  inverted_element,
  divergence,
  non_convergence,
  unloading_failure,
  shape,
  fit,
  undefined_score,
  fold_size,
  empty_space,
  undefined_indices,
  empty_nroy,
  sparse_region,
  degenerate_ensemble,
  identifiability,
  degenerate_test,
  invalid_argument,
  io,
  config,
  dependency,
  stage_failure,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` carries the failure class
/// so callers (and the CLI exit-code mapping) can branch without RTTI games.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix, for re-raising with added context.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

/// Raised by the equilibrium solver; carries the last residual it reached.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double last_residual)
      : Error(ErrorKind::non_convergence, what), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

}  // namespace lacal
