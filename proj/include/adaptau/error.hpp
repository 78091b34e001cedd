#pragma once

#include <stdexcept>
#include <string>

namespace adaptau {

/// Failure categories. The CLI maps each one to a fixed process exit code.
enum class ErrorCode {
  validation = 2,
  io = 3,
  bad_magic = 4,
  version_mismatch = 5,
  truncated = 6,
  missing_field = 7,
  numerical = 8,
  degenerate_taxonomy = 9,
  unusable_calibration = 10,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::validation: return "validation";
    case ErrorCode::io: return "io";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::missing_field: return "missing_field";
    case ErrorCode::numerical: return "numerical";
    case ErrorCode::degenerate_taxonomy: return "degenerate_taxonomy";
    case ErrorCode::unusable_calibration: return "unusable_calibration";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool condition, const std::string& message,
                    ErrorCode code = ErrorCode::validation) {
  if (!condition) throw Error(code, message);
}

}  // namespace detail
}  // namespace adaptau
