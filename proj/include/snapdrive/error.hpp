#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace snapdrive {

/// Failure categories shared by every module. The numeric values are part of
/// the C API (see snapdrive.h) and must not be reordered.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kInvalidRegion = 2,
  kInvalidPolygon = 3,
  kIo = 4,
  kCorruptInput = 5,
  kConfig = 6,
  kUnsupportedCategories = 7,
  kHeterogeneousRaters = 8,
  kInvalidDuration = 9,
  kEmptyInput = 10,
  kShape = 11,
  kMissingCity = 12,
  kDegenerateSample = 13,
  kInsufficientFits = 14,
  kUndefined = 15,
  kInvalidK = 16,
  kCollinearity = 17,
  kUnderdetermined = 18,
  kInvalidNesting = 19,
  kInvalidGroup = 20,
  kUsage = 21,
  kInternal = 22,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace snapdrive
