#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace snapdrive {

enum class Label : std::uint8_t { kNonDriving = 0, kDriving = 1 };

std::string_view to_string(Label label) noexcept;
std::optional<Label> parse_label(std::string_view text) noexcept;

/// Seconds since the Unix epoch, UTC.
using UtcSeconds = std::int64_t;

/// splitmix64 finalizer. Used to derive independent per-city and
/// per-restart seeds from one user seed: derive_seed(seed, stream).
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(seed) ^ (stream * 0xd1b54a32d192ed03ULL));
}

}  // namespace snapdrive
