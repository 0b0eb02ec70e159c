#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace esilc {

enum class ErrorCode {
  InvalidArgument,
  SingularSystem,
  NoConvergence,
  CycleLimit,
  Unbounded,
  EmptySet,
  EmptyDifference,
  NotContractive,
  VerificationFailed,
  NotFinitelyDetermined,
  DegenerateSteadySpace,
  Uncontrollable,
  Infeasible,
  MaxIter,
  UnknownPoint,
  Parse,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (the learning loop, the CLI) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace esilc
