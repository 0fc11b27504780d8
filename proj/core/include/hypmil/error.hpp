#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hypmil {

// Every failure raised by the library carries one of these codes so callers
// (and the CLI) can distinguish classes of failure without parsing messages.
enum class ErrorCode {
  kShapeMismatch,
  kNonFinite,
  kInvalidArgument,
  kDegenerateInput,
  kEmptyBag,
  kIo,
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kPayloadLength,
  kManifest,
  kConfig,
  kStratification,
  kUndefinedMetric,
  kTooManySkips,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hypmil
