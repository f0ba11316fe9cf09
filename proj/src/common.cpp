#include "snapdrive/error.hpp"

namespace snapdrive {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kInvalidRegion: return "invalid region";
    case ErrorCode::kInvalidPolygon: return "invalid polygon";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kCorruptInput: return "corrupt input";
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kUnsupportedCategories: return "unsupported categories";
    case ErrorCode::kHeterogeneousRaters: return "heterogeneous raters";
    case ErrorCode::kInvalidDuration: return "invalid duration";
    case ErrorCode::kEmptyInput: return "empty input";
    case ErrorCode::kShape: return "shape mismatch";
    case ErrorCode::kMissingCity: return "missing city";
    case ErrorCode::kDegenerateSample: return "degenerate sample";
    case ErrorCode::kInsufficientFits: return "insufficient fits";
    case ErrorCode::kUndefined: return "undefined statistic";
    case ErrorCode::kInvalidK: return "invalid k";
    case ErrorCode::kCollinearity: return "collinear design";
    case ErrorCode::kUnderdetermined: return "underdetermined system";
    case ErrorCode::kInvalidNesting: return "invalid nesting";
    case ErrorCode::kInvalidGroup: return "invalid group";
    case ErrorCode::kUsage: return "usage error";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown error";
}

}  // namespace snapdrive

#include "snapdrive/types.hpp"

namespace snapdrive {

std::string_view to_string(Label label) noexcept {
  return label == Label::kDriving ? "driving" : "non_driving";
}

std::optional<Label> parse_label(std::string_view text) noexcept {
  if (text == "driving") return Label::kDriving;
  if (text == "non_driving") return Label::kNonDriving;
  return std::nullopt;
}

}  // namespace snapdrive
