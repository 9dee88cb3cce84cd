#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mgn {

enum class ErrorKind {
  DimensionMismatch,
  NotPositiveDefinite,
  NonSymmetric,
  NotPSD,
  UnknownActivation,
  InvalidSpec,
  InvalidModel,
  NoConvergence,
  NonFiniteLoss,
  DegenerateData,
  IoError,
  FormatError,
  UnsupportedFormat,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers (notably the CLI exit-code mapping) can branch without parsing
/// messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mgn
