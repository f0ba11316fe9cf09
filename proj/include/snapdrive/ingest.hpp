#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "snapdrive/geo_grid.hpp"
#include "snapdrive/types.hpp"

namespace snapdrive {

inline constexpr UtcSeconds kCrawlIntervalS = 8 * 3600;

/// One geo-tagged post. Post time is taken to be the upload time.
struct SnapRecord {
  std::string id;
  UtcSeconds ts_utc = 0;
  GeoPoint location;
  std::string city_id;
  double duration_s = 0.0;
  std::optional<std::vector<double>> frame_scores;
  std::optional<Label> label;
  bool deleted = false;

  friend bool operator==(const SnapRecord&, const SnapRecord&) = default;
};

enum class RecordFormat { kJsonl, kCsv };

struct ParseFailure {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct ParseResult {
  std::vector<SnapRecord> records;
  std::vector<ParseFailure> failures;
};

/// Reads line-delimited records. Bad lines are reported, not dropped
/// silently; more than half of the non-blank lines failing raises
/// kCorruptInput. A CSV header line starting with "id," is skipped.
ParseResult parse_snaps(std::istream& in, RecordFormat format);
ParseResult read_snaps_file(const std::string& path, RecordFormat format);

void write_snaps(std::ostream& out, std::span<const SnapRecord> records, RecordFormat format);
std::string csv_header();

/// RFC 3339 timestamps. Output is always `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_rfc3339(UtcSeconds ts);
std::optional<UtcSeconds> parse_rfc3339(std::string_view text);

/// Civil wall-clock time in some zone.
struct LocalTime {
  int year = 1970;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;
  int weekday = 0;    // Monday = 0
  UtcSeconds utc_offset_s = 0;

  /// Wall clock expressed as seconds since 1970-01-01T00:00:00 local.
  std::int64_t wall_seconds() const noexcept;
  /// Monday 00:00 local is 0, Sunday 23:00 is 167.
  int hour_of_week() const noexcept { return weekday * 24 + hour; }
  std::string to_string() const;  // YYYY-MM-DDTHH:MM:SS
};

/// Handle onto one IANA zone from the system timezone database. Copies are
/// cheap and may be shared across threads.
class TimeZone {
 public:
  /// Throws kConfig for an unknown identifier.
  static TimeZone load(const std::string& tz_id);

  const std::string& id() const noexcept { return id_; }
  LocalTime to_local(UtcSeconds ts) const;

 private:
  struct Impl;
  TimeZone(std::string id, std::shared_ptr<const Impl> impl);
  std::string id_;
  std::shared_ptr<const Impl> impl_;
};

LocalTime to_local_time(UtcSeconds ts_utc, const std::string& tz_id);

struct CollectionWindow {
  UtcSeconds start_utc = 0;
  UtcSeconds end_utc = 0;
};

struct CrawlPlan {
  std::string city_id;
  std::vector<UtcSeconds> epochs;
};

/// Epochs every 8 hours from the window start, keeping the last one <= end.
CrawlPlan crawl_plan(const CollectionWindow& window, const std::string& city_id);

struct DeletionSummary {
  std::size_t total = 0;
  std::size_t deleted = 0;
  double rate_pct = 0.0;
};

/// Sets the deleted flag exactly on records whose id is listed. Records
/// already flagged stay flagged.
DeletionSummary mark_deleted(std::vector<SnapRecord>& records, const std::set<std::string>& deleted_ids);
std::vector<SnapRecord> filter_active(std::span<const SnapRecord> records);

/// One id per line; blank lines and lines starting with '#' are ignored.
std::set<std::string> read_id_list(std::istream& in);

}  // namespace snapdrive
