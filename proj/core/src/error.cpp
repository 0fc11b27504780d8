#include "hypmil/error.hpp"

namespace hypmil {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDegenerateInput: return "degenerate input";
    case ErrorCode::kEmptyBag: return "empty bag";
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kPayloadLength: return "payload length";
    case ErrorCode::kManifest: return "manifest";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kStratification: return "stratification";
    case ErrorCode::kUndefinedMetric: return "undefined metric";
    case ErrorCode::kTooManySkips: return "too many skipped steps";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace hypmil
