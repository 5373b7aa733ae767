#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace jointkin {

enum class ErrorCode {
  InvalidArgument,
  DegenerateAxis,
  DegenerateAxisPair,
  DegenerateFusion,
  DegenerateGeometry,
  TimeOrderError,
  InvalidSample,
  EmptyWindow,
  InsufficientMotion,
  SingularSystem,
  NonFiniteResidual,
  ImplausibleGeometry,
  EventOutOfRange,
  ShapeError,
  ZeroRange,
  ZeroVariance,
  IncompleteTable,
  SchemaError,
  TooShort,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// CLI can map it onto a stable exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace jointkin
