#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace warenav {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidDepth,
  kNoOverlap,
  kTrackingLost,
  kInvalidEstimate,
  kDegenerateRotation,
  kDegenerateMap,
  kDegenerateHeading,
  kUnreachableGoal,
  kInvalidEndpoint,
  kInternal,
  kSingularInnovation,
  kInsufficientData,
  kCalibration,
  kEmptyLog,
  kTimeout,
  kNoPath,
  kParse,
  kUnknownSession,
  kRejected,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidDepth: return "invalid-depth";
    case ErrorCode::kNoOverlap: return "no-overlap";
    case ErrorCode::kTrackingLost: return "tracking-lost";
    case ErrorCode::kInvalidEstimate: return "invalid-estimate";
    case ErrorCode::kDegenerateRotation: return "degenerate-rotation";
    case ErrorCode::kDegenerateMap: return "degenerate-map";
    case ErrorCode::kDegenerateHeading: return "degenerate-heading";
    case ErrorCode::kUnreachableGoal: return "unreachable-goal";
    case ErrorCode::kInvalidEndpoint: return "invalid-endpoint";
    case ErrorCode::kInternal: return "internal-error";
    case ErrorCode::kSingularInnovation: return "singular-innovation";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kCalibration: return "calibration-error";
    case ErrorCode::kEmptyLog: return "empty-log";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kNoPath: return "no-path";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kUnknownSession: return "unknown-session";
    case ErrorCode::kRejected: return "rejected";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        message_(what) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace warenav
