#include "gop/error.hpp"

namespace gop {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSymbol: return "unknown-symbol";
    case ErrorCode::kSelfSubstitution: return "self-substitution";
    case ErrorCode::kMalformedDocument: return "malformed-document";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kNotNormalized: return "not-normalized";
    case ErrorCode::kDegenerateRow: return "degenerate-row";
    case ErrorCode::kInfeasible: return "infeasible-length";
    case ErrorCode::kEmptySegment: return "empty-segment";
    case ErrorCode::kInstanceTooLarge: return "instance-too-large";
    case ErrorCode::kSingleClass: return "single-class";
    case ErrorCode::kRankDeficient: return "rank-deficient";
    case ErrorCode::kZeroVariance: return "zero-variance";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kJoinMismatch: return "join-mismatch";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kInstanceTooLarge:
      return false;
    default:
      return true;
  }
}

}  // namespace gop
