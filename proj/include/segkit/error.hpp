#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace segkit {

enum class ErrorCode {
  EmptyMask,
  OutOfBounds,
  ShapeMismatch,
  InsufficientPool,
  InvalidInput,
  Io,
  Parse,
  UnsupportedVersion,
  Validation,
  Config,
};

std::string_view to_string(ErrorCode code);

// Every failure the library reports is an Error carrying one of the codes
// above; the CLI maps codes onto its exit-code contract.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace segkit
