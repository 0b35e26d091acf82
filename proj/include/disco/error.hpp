#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace disco {

enum class ErrorCode {
  InvalidInput,
  NumericalFailure,
  InvalidGroupCount,
  InvalidGroupIndex,
  DegenerateSpectrum,
  DegenerateComponent,
  MissingClass,
  InvalidLabels,
  InsufficientModels,
  FormatError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::InvalidGroupCount: return "InvalidGroupCount";
    case ErrorCode::InvalidGroupIndex: return "InvalidGroupIndex";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::DegenerateComponent: return "DegenerateComponent";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::InvalidLabels: return "InvalidLabels";
    case ErrorCode::InsufficientModels: return "InsufficientModels";
    case ErrorCode::FormatError: return "FormatError";
  }
  return "Unknown";
}

/// Exception type thrown by every toolkit operation. The code is stable and
/// meant for programmatic dispatch; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the leading error-code name.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

namespace detail {

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace detail
}  // namespace disco
