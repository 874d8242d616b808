#pragma once

#include <stdexcept>
#include <string>

namespace gop {

enum class ErrorCode {
  kUnknownSymbol,
  kSelfSubstitution,
  kMalformedDocument,
  kInvalidArgument,
  kFormat,
  kDimensionMismatch,
  kNonFinite,
  kNotNormalized,
  kDegenerateRow,
  kInfeasible,
  kEmptySegment,
  kInstanceTooLarge,
  kSingleClass,
  kRankDeficient,
  kZeroVariance,
  kLengthMismatch,
  kJoinMismatch,
  kIo,
};

const char* error_code_name(ErrorCode code);

// Validation errors are problems with user-supplied inputs (exit code 1);
// everything else is a runtime failure (exit code 2).
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gop
