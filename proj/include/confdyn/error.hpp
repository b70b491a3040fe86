#pragma once

#include <stdexcept>
#include <string>

namespace confdyn {

enum class ErrorCode {
  DimensionMismatch,
  DegenerateForm,
  InvalidArgument,
  UnknownModel,
  NotApplicable,
  PoisonedState,
  BlowUp,
  NonConvergence,
  InverseUnavailable,
  OpenLoop,
  TangentialCrossing,
  NoCrossing,
  NonHyperbolic,
  Unsupported,
  Config,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries a code so callers (CLI, python
/// bindings, the verify suite) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised where a finite-time escape is a failure rather than a trajectory status
/// (time-t maps, loop transport, Lyapunov runs).
class BlowUpError : public Error {
 public:
  BlowUpError(double t_escape, const std::string& what)
      : Error(ErrorCode::BlowUp, what), t_escape_(t_escape) {}

  double t_escape() const noexcept { return t_escape_; }

 private:
  double t_escape_;
};

}  // namespace confdyn
