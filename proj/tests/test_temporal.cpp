#include <cmath>
#include <random>

#include "doctest.h"
#include "snapdrive/error.hpp"
#include "snapdrive/temporal.hpp"

using namespace snapdrive;

namespace {

UtcSeconds ts(const char* text) { return parse_rfc3339(text).value(); }

SnapRecord rec(UtcSeconds t, Label l) {
  SnapRecord r;
  r.ts_utc = t;
  r.label = l;
  return r;
}

HourlyProfile profile_of(const std::array<std::int64_t, 24>& counts) {
  HourlyProfile p;
  p.counts = counts;
  return p;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

// Three tight groups of four points in the plane.
Eigen::MatrixXd three_blobs() {
  Eigen::MatrixXd m(12, 2);
  const double cx[3] = {0, 10, 0};
  const double cy[3] = {0, 0, 10};
  const double dx[4] = {0.1, -0.1, 0.1, -0.1};
  const double dy[4] = {0.1, 0.1, -0.1, -0.1};
  for (int g = 0; g < 3; ++g) {
    for (int i = 0; i < 4; ++i) m.row(g * 4 + i) << cx[g] + dx[i], cy[g] + dy[i];
  }
  return m;
}

}  // namespace

TEST_SUITE("temporal") {
  TEST_CASE("hourly profile uses local time") {
    const auto tz = TimeZone::load("UTC");
    const std::vector<SnapRecord> recs = {rec(ts("2019-03-16T03:15:00Z"), Label::kDriving),
                                          rec(ts("2019-03-16T03:59:59Z"), Label::kNonDriving)};
    const auto d = hourly_profile(recs, tz, ProfileClass::kDriving);
    const auto t = hourly_profile(recs, tz, ProfileClass::kTotal);
    CHECK(d.counts[3] == 1);
    CHECK(d.total() == 1);
    CHECK(t.counts[3] == 2);
    const auto riyadh = hourly_profile(recs, TimeZone::load("Asia/Riyadh"), ProfileClass::kTotal);
    CHECK(riyadh.counts[6] == 2);
  }

  TEST_CASE("night window") {
    const NightWindow w;
    CHECK(w.length() == 8);
    CHECK(w.contains(18));
    CHECK(w.contains(0));
    CHECK(w.contains(1));
    CHECK_FALSE(w.contains(2));
    CHECK_FALSE(w.contains(17));
    CHECK(NightWindow{22, 4}.length() == 7);
    CHECK(NightWindow{2, 5}.length() == 4);
  }

  TEST_CASE("night uplift") {
    std::array<std::int64_t, 24> flat{};
    flat.fill(10);
    CHECK(night_uplift(profile_of(flat)) == doctest::Approx(0.0));
    auto doubled = flat;
    for (int h = 0; h < 24; ++h) {
      if (NightWindow{}.contains(h)) doubled[static_cast<std::size_t>(h)] = 20;
    }
    CHECK(night_uplift(profile_of(doubled)) == doctest::Approx(100.0));
    auto scaled = doubled;
    for (auto& c : scaled) c *= 7;
    CHECK(night_uplift(profile_of(scaled)) == doctest::Approx(100.0));
    std::array<std::int64_t, 24> night_only{};
    night_only[20] = 5;
    CHECK(code_of([&] { night_uplift(profile_of(night_only)); }) == ErrorCode::kUndefined);
    CHECK(code_of([&] { night_uplift(HourlyProfile{}); }) == ErrorCode::kEmptyInput);
  }

  TEST_CASE("pearson") {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    std::vector<double> neg;
    for (double v : x) neg.push_back(-2 * v + 7);
    CHECK(pearson(x, x) == doctest::Approx(1.0));
    CHECK(pearson(x, neg) == doctest::Approx(-1.0));
    CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 4}) ==
          doctest::Approx(std::sqrt(3.0) / 2.0));
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n01;
    std::vector<double> a(50);
    std::vector<double> b(50);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = n01(rng);
      b[i] = a[i] + n01(rng);
    }
    std::vector<double> af = a;
    for (auto& v : af) v = 3 * v - 11;
    CHECK(pearson(af, b) == doctest::Approx(pearson(a, b)).epsilon(1e-12));
    CHECK(code_of([] { pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}); }) ==
          ErrorCode::kUndefined);
    CHECK(code_of([] { pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}); }) == ErrorCode::kShape);
  }

  TEST_CASE("hourly series buckets from the window start") {
    const CollectionWindow w{ts("2019-03-16T00:00:00Z"), ts("2019-03-16T05:00:00Z")};
    const std::vector<SnapRecord> recs = {rec(w.start_utc, Label::kDriving), rec(w.start_utc + 3599, Label::kNonDriving),
                                          rec(w.start_utc + 3600 * 4 + 1, Label::kDriving),
                                          rec(w.end_utc, Label::kDriving), rec(w.start_utc - 1, Label::kDriving)};
    const auto total = hourly_series(recs, w, ProfileClass::kTotal);
    CHECK(total == std::vector<double>{2, 0, 0, 0, 1});
    CHECK(hourly_series(recs, w, ProfileClass::kDriving) == std::vector<double>{1, 0, 0, 0, 1});
  }

  TEST_CASE("week vectors") {
    const auto utc = TimeZone::load("UTC");
    const std::vector<SnapRecord> one = {rec(ts("2019-03-18T00:00:00Z"), Label::kDriving)};
    const auto v = week_vector(one, utc, "c");
    REQUIRE(v.has_value());
    CHECK(v->values[0] == 1.0);
    CHECK(v->driving == 1);
    const std::vector<SnapRecord> none = {rec(0, Label::kNonDriving)};
    CHECK_FALSE(week_vector(none, utc, "c").has_value());

    std::vector<SnapRecord> uniform;
    for (int h = 0; h < kHoursPerWeek; ++h) uniform.push_back(rec(ts("2019-03-18T00:30:00Z") + 3600 * h, Label::kDriving));
    const auto u = week_vector(uniform, utc, "u");
    for (double x : u->values) CHECK(x == doctest::Approx(1.0 / 168));

    const auto tz = TimeZone::load("Europe/London");
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<UtcSeconds> t(ts("2019-03-16T00:00:00Z"), ts("2019-04-16T00:00:00Z"));
    std::vector<SnapRecord> recs(2000);
    std::array<double, kHoursPerWeek> expect{};
    int driving = 0;
    for (auto& r : recs) {
      r = rec(t(rng), rng() % 3 == 0 ? Label::kDriving : Label::kNonDriving);
      if (r.label == Label::kDriving) {
        const auto lt = tz.to_local(r.ts_utc);
        expect[static_cast<std::size_t>(lt.weekday * 24 + lt.hour)] += 1;
        ++driving;
      }
    }
    const auto w = week_vector(recs, tz, "london");
    double sum = 0;
    for (int i = 0; i < kHoursPerWeek; ++i) {
      CHECK(w->values[static_cast<std::size_t>(i)] == doctest::Approx(expect[static_cast<std::size_t>(i)] / driving));
      sum += w->values[static_cast<std::size_t>(i)];
    }
    CHECK(sum == doctest::Approx(1.0));

    const std::vector<CityRecords> cities = {{"a", utc, one}, {"b", utc, none}};
    const auto wv = week_vectors(cities);
    CHECK(wv.vectors.size() == 1);
    CHECK(wv.dropped == std::vector<std::string>{"b"});
    CHECK(wv.matrix().rows() == 1);
    CHECK(wv.matrix().cols() == kHoursPerWeek);
  }

  TEST_CASE("kmeans basics") {
    const auto data = three_blobs();
    const auto all = kmeans(data, 12, 1);
    CHECK(all.inertia == doctest::Approx(0.0));
    const auto one = kmeans(data, 1, 1);
    CHECK(one.centroids(0, 0) == doctest::Approx(data.col(0).mean()));
    CHECK(one.centroids(0, 1) == doctest::Approx(data.col(1).mean()));
    CHECK_FALSE(one.silhouette.has_value());
    const auto three = kmeans(data, 3, 5);
    for (int g = 0; g < 3; ++g) {
      for (int i = 1; i < 4; ++i) CHECK(three.labels[static_cast<std::size_t>(g * 4 + i)] == three.labels[static_cast<std::size_t>(g * 4)]);
    }
    CHECK(three.labels[0] != three.labels[4]);
    CHECK(three.labels[4] != three.labels[8]);
    REQUIRE(three.silhouette.has_value());
    CHECK(*three.silhouette > 0.9);
    for (std::size_t i = 1; i < three.inertia_trace.size(); ++i) {
      CHECK(three.inertia_trace[i] <= three.inertia_trace[i - 1] + 1e-12);
    }
    const auto again = kmeans(data, 3, 5);
    CHECK(again.labels == three.labels);
    CHECK(again.inertia == three.inertia);
    CHECK(code_of([&] { kmeans(data, 0, 1); }) == ErrorCode::kInvalidK);
    CHECK(code_of([&] { kmeans(data, 13, 1); }) == ErrorCode::kInvalidK);
  }

  TEST_CASE("kmeans trace on noisy data") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd data(60, 5);
    for (int i = 0; i < data.rows(); ++i) {
      for (int j = 0; j < data.cols(); ++j) data(i, j) = n01(rng) + (i % 4) * 0.8 * (j == i % 5);
    }
    const auto r = kmeans(data, 4, 3);
    for (std::size_t i = 1; i < r.inertia_trace.size(); ++i) {
      CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] + 1e-9);
    }
    CHECK(r.inertia == doctest::Approx(r.inertia_trace.back()));
  }

  TEST_CASE("silhouette") {
    Eigen::MatrixXd four(4, 1);
    four << 0, 0.1, 5, 5.1;
    const std::vector<int> labels = {0, 0, 1, 1};
    CHECK(silhouette(four, labels) > 0.9);
    const std::vector<int> singletons = {0, 1, 2, 2};
    const auto v = silhouette_values(four, singletons);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 0.0);
    CHECK(code_of([&] { silhouette(four, std::vector<int>{0, 0, 0, 0}); }) == ErrorCode::kUndefined);
    CHECK(code_of([&] { silhouette(four, std::vector<int>{0, 2, 2, 2}); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("elbow curve is non-increasing") {
    const auto data = three_blobs();
    const std::vector<int> ks = {1, 2, 3, 4, 5, 6};
    const auto curve = elbow_curve(data, ks, 7);
    REQUIRE(curve.size() == ks.size());
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].inertia <= curve[i - 1].inertia + 1e-12);
    double best = -2;
    int best_k = 0;
    for (const auto& p : curve) {
      if (p.silhouette && *p.silhouette > best) {
        best = *p.silhouette;
        best_k = p.k;
      }
    }
    CHECK(best_k == 3);
  }

  TEST_CASE("2-d embedding") {
    Eigen::MatrixXd rank1(5, 3);
    for (int i = 0; i < 5; ++i) rank1.row(i) << 1 + i, 2 + 2 * i, 3 - i;
    const auto e = embed_2d(rank1);
    REQUIRE(e.rows() == 5);
    REQUIRE(e.cols() == 2);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(e(i, 1)) < 1e-9);
    CHECK(std::abs(e.col(0).mean()) < 1e-12);
    CHECK(std::abs(e(4, 0) - e(0, 0)) == doctest::Approx(4 * std::sqrt(6.0)));
    CHECK(code_of([] { embed_2d(Eigen::MatrixXd::Ones(1, 3)); }) == ErrorCode::kInvalidArgument);
  }
}
