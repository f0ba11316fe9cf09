#include "snapdrive/ingest.hpp"

#include <absl/time/civil_time.h>
#include <absl/time/time.h>

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "csv.hpp"
#include "json.hpp"
#include "snapdrive/error.hpp"

namespace snapdrive {

namespace {

using nlohmann::json;

constexpr std::string_view kCsvHeader = "id,ts_utc,lat,lon,city_id,duration_s,frame_scores,label,deleted";

struct LineError {
  std::string message;
};

void check_record(const SnapRecord& r) {
  if (r.id.empty()) throw LineError{"empty id"};
  if (r.city_id.empty()) throw LineError{"empty city_id"};
  if (!r.location.valid()) throw LineError{"lat/lon out of range"};
  if (!std::isfinite(r.duration_s) || r.duration_s < 0.0) throw LineError{"duration_s must be >= 0"};
  if (r.frame_scores) {
    for (double s : *r.frame_scores) {
      if (!(s >= 0.0 && s <= 1.0)) throw LineError{"frame score outside [0, 1]"};
    }
  }
}

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) throw LineError{std::string("missing field '") + key + "'"};
  return *it;
}

double require_number(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_number()) throw LineError{std::string("field '") + key + "' is not a number"};
  return v.get<double>();
}

std::string require_string(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_string()) throw LineError{std::string("field '") + key + "' is not a string"};
  return v.get<std::string>();
}

UtcSeconds require_time(std::string_view text) {
  auto ts = parse_rfc3339(text);
  if (!ts) throw LineError{"ts_utc is not an RFC 3339 timestamp: " + std::string(text)};
  return *ts;
}

SnapRecord parse_json_line(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw LineError{std::string("invalid JSON: ") + e.what()};
  }
  if (!obj.is_object()) throw LineError{"record is not a JSON object"};
  SnapRecord r;
  r.id = require_string(obj, "id");
  r.ts_utc = require_time(require_string(obj, "ts_utc"));
  r.location.lat = require_number(obj, "lat");
  r.location.lon = require_number(obj, "lon");
  r.city_id = require_string(obj, "city_id");
  r.duration_s = require_number(obj, "duration_s");
  if (auto it = obj.find("frame_scores"); it != obj.end() && !it->is_null()) {
    if (!it->is_array()) throw LineError{"frame_scores is not an array"};
    std::vector<double> scores;
    scores.reserve(it->size());
    for (const auto& v : *it) {
      if (!v.is_number()) throw LineError{"frame_scores holds a non-number"};
      scores.push_back(v.get<double>());
    }
    r.frame_scores = std::move(scores);
  }
  if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw LineError{"label is not a string"};
    r.label = parse_label(it->get<std::string>());
    if (!r.label) throw LineError{"unknown label '" + it->get<std::string>() + "'"};
  }
  if (auto it = obj.find("deleted"); it != obj.end() && !it->is_null()) {
    if (!it->is_boolean()) throw LineError{"deleted is not a boolean"};
    r.deleted = it->get<bool>();
  }
  check_record(r);
  return r;
}

double csv_number(const std::string& field, const char* name) {
  auto v = detail::parse_double(field);
  if (!v) throw LineError{std::string("field '") + name + "' is not a number"};
  return *v;
}

SnapRecord parse_csv_line(std::string_view line) {
  const auto f = detail::split_csv_line(line);
  if (f.size() != 9) throw LineError{"expected 9 columns, got " + std::to_string(f.size())};
  SnapRecord r;
  r.id = f[0];
  r.ts_utc = require_time(f[1]);
  if (detail::trim(f[2]).empty()) throw LineError{"missing field 'lat'"};
  if (detail::trim(f[3]).empty()) throw LineError{"missing field 'lon'"};
  r.location.lat = csv_number(f[2], "lat");
  r.location.lon = csv_number(f[3], "lon");
  r.city_id = f[4];
  r.duration_s = csv_number(f[5], "duration_s");
  if (!detail::trim(f[6]).empty()) {
    std::vector<double> scores;
    std::string_view rest = f[6];
    while (true) {
      const auto pos = rest.find(';');
      auto v = detail::parse_double(rest.substr(0, pos));
      if (!v) throw LineError{"frame_scores holds a non-number"};
      scores.push_back(*v);
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    r.frame_scores = std::move(scores);
  }
  if (const auto label = detail::trim(f[7]); !label.empty()) {
    r.label = parse_label(label);
    if (!r.label) throw LineError{"unknown label '" + std::string(label) + "'"};
  }
  if (const auto del = detail::trim(f[8]); !del.empty()) {
    if (del == "true" || del == "1") r.deleted = true;
    else if (del == "false" || del == "0") r.deleted = false;
    else throw LineError{"deleted must be true/false"};
  }
  check_record(r);
  return r;
}

}  // namespace

ParseResult parse_snaps(std::istream& in, RecordFormat format) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  std::size_t considered = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    if (format == RecordFormat::kCsv && considered == 0 && result.failures.empty() &&
        text.starts_with("id,")) {
      continue;
    }
    ++considered;
    try {
      result.records.push_back(format == RecordFormat::kJsonl ? parse_json_line(text) : parse_csv_line(text));
    } catch (const LineError& e) {
      result.failures.push_back({line_no, e.message});
    }
  }
  if (in.bad()) fail(ErrorCode::kIo, "read error on record stream");
  if (considered > 0 && 2 * result.failures.size() > considered) {
    fail(ErrorCode::kCorruptInput, std::to_string(result.failures.size()) + " of " +
                                       std::to_string(considered) + " record lines are malformed");
  }
  return result;
}

ParseResult read_snaps_file(const std::string& path, RecordFormat format) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open record file " + path);
  return parse_snaps(in, format);
}

std::string csv_header() { return std::string(kCsvHeader); }

void write_snaps(std::ostream& out, std::span<const SnapRecord> records, RecordFormat format) {
  if (format == RecordFormat::kCsv) out << kCsvHeader << '\n';
  for (const auto& r : records) {
    if (format == RecordFormat::kJsonl) {
      nlohmann::ordered_json obj;
      obj["id"] = r.id;
      obj["ts_utc"] = format_rfc3339(r.ts_utc);
      obj["lat"] = r.location.lat;
      obj["lon"] = r.location.lon;
      obj["city_id"] = r.city_id;
      obj["duration_s"] = r.duration_s;
      if (r.frame_scores) obj["frame_scores"] = *r.frame_scores;
      if (r.label) obj["label"] = std::string(to_string(*r.label));
      if (r.deleted) obj["deleted"] = true;
      out << obj.dump() << '\n';
    } else {
      out << detail::csv_field(r.id) << ',' << format_rfc3339(r.ts_utc) << ','
          << detail::format_double(r.location.lat) << ',' << detail::format_double(r.location.lon) << ','
          << detail::csv_field(r.city_id) << ',' << detail::format_double(r.duration_s) << ',';
      if (r.frame_scores) {
        for (std::size_t i = 0; i < r.frame_scores->size(); ++i) {
          if (i) out << ';';
          out << detail::format_double((*r.frame_scores)[i]);
        }
      }
      out << ',' << (r.label ? to_string(*r.label) : "") << ',' << (r.deleted ? "true" : "false") << '\n';
    }
  }
}

std::string format_rfc3339(UtcSeconds ts) {
  return absl::FormatTime("%Y-%m-%dT%H:%M:%SZ", absl::FromUnixSeconds(ts), absl::UTCTimeZone());
}

std::optional<UtcSeconds> parse_rfc3339(std::string_view text) {
  absl::Time t;
  std::string err;
  if (!absl::ParseTime(absl::RFC3339_full, std::string(detail::trim(text)), &t, &err)) return std::nullopt;
  return absl::ToUnixSeconds(t);
}

std::int64_t LocalTime::wall_seconds() const noexcept {
  return absl::CivilSecond(year, month, day, hour, minute, second) - absl::CivilSecond(1970, 1, 1, 0, 0, 0);
}

std::string LocalTime::to_string() const {
  return absl::FormatCivilTime(absl::CivilSecond(year, month, day, hour, minute, second));
}

struct TimeZone::Impl {
  absl::TimeZone zone;
};

TimeZone::TimeZone(std::string id, std::shared_ptr<const Impl> impl)
    : id_(std::move(id)), impl_(std::move(impl)) {}

TimeZone TimeZone::load(const std::string& tz_id) {
  absl::TimeZone zone;
  if (tz_id.empty() || !absl::LoadTimeZone(tz_id, &zone)) {
    fail(ErrorCode::kConfig, "unknown timezone '" + tz_id + "'");
  }
  return TimeZone(tz_id, std::make_shared<const Impl>(Impl{zone}));
}

LocalTime TimeZone::to_local(UtcSeconds ts) const {
  const auto info = impl_->zone.At(absl::FromUnixSeconds(ts));
  const absl::CivilSecond cs = info.cs;
  LocalTime lt;
  lt.year = static_cast<int>(cs.year());
  lt.month = cs.month();
  lt.day = cs.day();
  lt.hour = cs.hour();
  lt.minute = cs.minute();
  lt.second = cs.second();
  lt.weekday = static_cast<int>(absl::GetWeekday(absl::CivilDay(cs)));
  lt.utc_offset_s = info.offset;
  return lt;
}

LocalTime to_local_time(UtcSeconds ts_utc, const std::string& tz_id) {
  return TimeZone::load(tz_id).to_local(ts_utc);
}

CrawlPlan crawl_plan(const CollectionWindow& window, const std::string& city_id) {
  if (!(window.start_utc < window.end_utc)) {
    fail(ErrorCode::kInvalidArgument, "collection window requires start < end");
  }
  CrawlPlan plan{city_id, {}};
  for (UtcSeconds t = window.start_utc; t <= window.end_utc; t += kCrawlIntervalS) plan.epochs.push_back(t);
  return plan;
}

DeletionSummary mark_deleted(std::vector<SnapRecord>& records, const std::set<std::string>& deleted_ids) {
  DeletionSummary s;
  s.total = records.size();
  for (auto& r : records) {
    if (deleted_ids.contains(r.id)) r.deleted = true;
    if (r.deleted) ++s.deleted;
  }
  s.rate_pct = s.total == 0 ? 0.0 : 100.0 * static_cast<double>(s.deleted) / static_cast<double>(s.total);
  return s;
}

std::vector<SnapRecord> filter_active(std::span<const SnapRecord> records) {
  std::vector<SnapRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.deleted) out.push_back(r);
  }
  return out;
}

std::set<std::string> read_id_list(std::istream& in) {
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto id = detail::trim(line);
    if (id.empty() || id.front() == '#') continue;
    ids.emplace(id);
  }
  return ids;
}

}  // namespace snapdrive
