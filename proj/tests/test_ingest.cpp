#include <sstream>

#include "doctest.h"
#include "snapdrive/error.hpp"
#include "snapdrive/ingest.hpp"

using namespace snapdrive;

namespace {

UtcSeconds ts(const char* text) { return parse_rfc3339(text).value(); }

std::vector<SnapRecord> sample_records() {
  SnapRecord a;
  a.id = "a1";
  a.ts_utc = ts("2019-03-16T10:20:30Z");
  a.location = {24.7, 46.6};
  a.city_id = "riyadh";
  a.duration_s = 4.5;
  a.frame_scores = std::vector<double>{0.1, 0.95, 0.5};
  SnapRecord b;
  b.id = "b, \"quoted\"";
  b.ts_utc = ts("2019-04-01T23:59:59Z");
  b.location = {-33.8688, 151.2093};
  b.city_id = "sydney";
  b.duration_s = 0.0;
  b.label = Label::kDriving;
  b.deleted = true;
  return {a, b};
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("jsonl and csv round trip") {
    const auto recs = sample_records();
    for (auto fmt : {RecordFormat::kJsonl, RecordFormat::kCsv}) {
      std::stringstream io;
      write_snaps(io, recs, fmt);
      const auto back = parse_snaps(io, fmt);
      CHECK(back.failures.empty());
      REQUIRE(back.records.size() == recs.size());
      CHECK(back.records[0] == recs[0]);
      CHECK(back.records[1] == recs[1]);
    }
  }

  TEST_CASE("csv header order is fixed") {
    CHECK(csv_header() == "id,ts_utc,lat,lon,city_id,duration_s,frame_scores,label,deleted");
  }

  TEST_CASE("bad lines are reported with line numbers") {
    std::istringstream empty("");
    const auto none = parse_snaps(empty, RecordFormat::kJsonl);
    CHECK(none.records.empty());
    CHECK(none.failures.empty());

    std::istringstream in(
        R"({"id":"1","ts_utc":"2019-03-16T00:00:00Z","lat":1,"lon":2,"city_id":"c","duration_s":3}
{"id":"2","ts_utc":"2019-03-16T00:00:00Z","lon":2,"city_id":"c","duration_s":3}
{"id":"3","ts_utc":"2019-03-16T00:00:00Z","lat":1,"lon":2,"city_id":"c","duration_s":3}
)");
    const auto r = parse_snaps(in, RecordFormat::kJsonl);
    CHECK(r.records.size() == 2);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].line == 2);
  }

  TEST_CASE("mostly broken input is corrupt") {
    std::istringstream in("garbage\nmore garbage\n{\"id\":\"x\"}\n");
    try {
      parse_snaps(in, RecordFormat::kJsonl);
      FAIL("expected corrupt input");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kCorruptInput);
    }
  }

  TEST_CASE("invalid field values are rejected") {
    std::istringstream in(
        R"({"id":"1","ts_utc":"2019-03-16T00:00:00Z","lat":91,"lon":2,"city_id":"c","duration_s":3}
{"id":"2","ts_utc":"2019-03-16T00:00:00Z","lat":1,"lon":2,"city_id":"c","duration_s":-1}
{"id":"3","ts_utc":"2019-03-16T00:00:00Z","lat":1,"lon":2,"city_id":"c","duration_s":1,"frame_scores":[1.5]}
{"id":"4","ts_utc":"not a time","lat":1,"lon":2,"city_id":"c","duration_s":1}
{"id":"5","ts_utc":"2019-03-16T00:00:00Z","lat":1,"lon":2,"city_id":"c","duration_s":1}
{"id":"6","ts_utc":"2019-03-16T00:00:00Z","lat":1,"lon":2,"city_id":"c","duration_s":1}
{"id":"7","ts_utc":"2019-03-16T00:00:00Z","lat":1,"lon":2,"city_id":"c","duration_s":1}
{"id":"8","ts_utc":"2019-03-16T00:00:00Z","lat":1,"lon":2,"city_id":"c","duration_s":1}
)");
    const auto r = parse_snaps(in, RecordFormat::kJsonl);
    CHECK(r.records.size() == 4);
    CHECK(r.failures.size() == 4);
  }

  TEST_CASE("missing file is an io error") {
    try {
      read_snaps_file("/nonexistent/snaps.jsonl", RecordFormat::kJsonl);
      FAIL("expected io error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kIo);
    }
  }

  TEST_CASE("local time conversion") {
    const auto riyadh = to_local_time(ts("2019-03-16T00:00:00Z"), "Asia/Riyadh");
    CHECK(riyadh.to_string() == "2019-03-16T03:00:00");
    CHECK(riyadh.utc_offset_s == 3 * 3600);
    // BST begins at 01:00 UTC on 2019-03-31.
    const auto london = to_local_time(ts("2019-03-31T01:30:00Z"), "Europe/London");
    CHECK(london.to_string() == "2019-03-31T02:30:00");
    const auto before = to_local_time(ts("2019-03-31T00:30:00Z"), "Europe/London");
    CHECK(before.to_string() == "2019-03-31T00:30:00");
    CHECK(to_local_time(ts("2019-04-01T12:00:00Z"), "UTC").to_string() == "2019-04-01T12:00:00");
    // 2019-03-18 is a Monday.
    const auto monday = to_local_time(ts("2019-03-18T00:00:00Z"), "UTC");
    CHECK(monday.weekday == 0);
    CHECK(monday.hour_of_week() == 0);
    try {
      to_local_time(0, "Mars/Olympus_Mons");
      FAIL("expected config error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfig);
    }
  }

  TEST_CASE("fixed-offset zones keep a constant offset") {
    const auto tz = TimeZone::load("Asia/Kolkata");
    for (UtcSeconds t = ts("2019-01-01T00:00:00Z"); t < ts("2019-12-31T00:00:00Z"); t += 86400 * 7 + 3607) {
      const auto local = tz.to_local(t);
      CHECK(local.wall_seconds() - t == 19800);
    }
  }

  TEST_CASE("rfc3339 formatting") {
    CHECK(format_rfc3339(0) == "1970-01-01T00:00:00Z");
    CHECK(parse_rfc3339("1970-01-01T00:00:00Z") == 0);
    CHECK(parse_rfc3339("2019-03-16T03:00:00+03:00") == ts("2019-03-16T00:00:00Z"));
    CHECK_FALSE(parse_rfc3339("yesterday").has_value());
  }

  TEST_CASE("crawl plans are spaced eight hours apart") {
    const UtcSeconds start = ts("2019-03-16T00:00:00Z");
    CHECK(crawl_plan({start, start + 86400}, "c").epochs.size() == 4);
    CHECK(crawl_plan({start, ts("2019-04-16T00:00:00Z")}, "c").epochs.size() == 94);
    CHECK(crawl_plan({start, start + 3600}, "c").epochs.size() == 1);
    const auto plan = crawl_plan({start, start + 10 * 86400 + 5}, "c");
    for (std::size_t i = 1; i < plan.epochs.size(); ++i) CHECK(plan.epochs[i] - plan.epochs[i - 1] == kCrawlIntervalS);
    CHECK_THROWS_AS(crawl_plan({start, start}, "c"), Error);
  }

  TEST_CASE("deletion accounting") {
    std::vector<SnapRecord> recs(100);
    for (int i = 0; i < 100; ++i) recs[static_cast<std::size_t>(i)].id = "s" + std::to_string(i);
    const auto none = mark_deleted(recs, {});
    CHECK(none.deleted == 0);
    CHECK(filter_active(recs).size() == 100);
    const auto s = mark_deleted(recs, {"s3", "s50", "s99", "not-present"});
    CHECK(s.total == 100);
    CHECK(s.deleted == 3);
    CHECK(s.rate_pct == doctest::Approx(3.0));
    const auto active = filter_active(recs);
    CHECK(active.size() == 97);
    CHECK(active.size() + s.deleted == recs.size());
  }

  TEST_CASE("id lists skip comments and blanks") {
    std::istringstream in("# header\na\n\n  b  \n#c\n");
    const auto ids = read_id_list(in);
    CHECK(ids == std::set<std::string>{"a", "b"});
  }
}
