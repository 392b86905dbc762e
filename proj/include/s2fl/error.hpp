#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace s2fl {

enum class ErrorCode {
  Dimension,
  Validation,
  InvalidDs,
  Numerical,
  Io,
  Format,
  Unsupported,
};

constexpr std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Dimension: return "DIMENSION";
    case ErrorCode::Validation: return "VALIDATION";
    case ErrorCode::InvalidDs: return "INVALID_DS";
    case ErrorCode::Numerical: return "NUMERICAL";
    case ErrorCode::Io: return "IO";
    case ErrorCode::Format: return "FORMAT";
    case ErrorCode::Unsupported: return "UNSUPPORTED";
  }
  return "UNKNOWN";
}

/// Every library failure is reported through this type; the code is what the
/// CLI turns into its `S2FL-ERR:<code>:` prefix.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace s2fl
