#include "snapdrive/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "snapdrive/aggregate.hpp"
#include "snapdrive/error.hpp"
#include "snapdrive/types.hpp"

namespace snapdrive {

namespace {

struct Anchor {
  const char* name;
  const char* tz;
  double lat;
  double lon;
};

constexpr Anchor kAnchors[] = {
    {"riyadh", "Asia/Riyadh", 24.71, 46.67},       {"london", "Europe/London", 51.50, -0.12},
    {"newyork", "America/New_York", 40.71, -74.00}, {"delhi", "Asia/Kolkata", 28.61, 77.21},
    {"berlin", "Europe/Berlin", 52.52, 13.40},      {"losangeles", "America/Los_Angeles", 34.05, -118.24},
    {"dubai", "Asia/Dubai", 25.20, 55.27},          {"madrid", "Europe/Madrid", 40.42, -3.70},
    {"chicago", "America/Chicago", 41.88, -87.63},  {"mumbai", "Asia/Kolkata", 19.08, 72.88},
};

constexpr double kCityExtentM = 12000.0;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Hamilton apportionment of `total` items proportionally to `weights`.
std::vector<std::int64_t> apportion(std::int64_t total, std::span<const double> weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::int64_t> counts(weights.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    counts[i] = static_cast<std::int64_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < total; ++j, ++assigned) ++counts[remainders[j % remainders.size()].second];
  return counts;
}

GeoPoint point_in_tile(Rng& rng, const TileGrid& grid, TileIndex t) {
  // Stay clear of tile edges so the point locates back to `t`.
  const double ts = grid.tile_size_m();
  const LocalXY xy{(t.col + uniform(rng, 0.001, 0.999)) * ts, (t.row + uniform(rng, 0.001, 0.999)) * ts};
  return unproject_local(xy, grid.origin());
}

std::vector<GeoPoint> octagon(BBox box) {
  const GeoPoint origin = box.southwest();
  const LocalXY extent = project_local({box.north, box.east}, origin);
  const double cx = extent.x_m / 2.0;
  const double cy = extent.y_m / 2.0;
  std::vector<GeoPoint> ring;
  constexpr double kPi = 3.14159265358979323846;
  for (int i = 0; i < 8; ++i) {
    const double a = kPi / 8.0 + i * kPi / 4.0;
    ring.push_back(unproject_local({cx + cx * std::cos(a), cy + cy * std::sin(a)}, origin));
  }
  return ring;
}

}  // namespace

double draw_power_law(Rng& rng, double alpha, double x_min) {
  const double u = 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return x_min * std::pow(u, -1.0 / (alpha - 1.0));
}

CityStats draw_covariates(Rng& rng, const std::string& city_id, const CovariateRanges& r) {
  CityStats s;
  s.city_id = city_id;
  s.population = std::round(std::exp(uniform(rng, r.log_pop_min, r.log_pop_max)) - 1.0);
  s.male_pct = uniform(rng, r.male_min, r.male_max);
  s.age_lt20_pct = uniform(rng, r.age_lt20_min, r.age_lt20_max);
  s.age_20_40_pct = uniform(rng, r.age_20_40_min, r.age_20_40_max);
  s.age_40_60_pct = uniform(rng, r.age_40_60_min, r.age_40_60_max);
  s.developing = std::bernoulli_distribution(0.5)(rng) ? 1 : 0;
  s.total_snaps = std::round(std::exp(uniform(rng, r.log_ts_min, r.log_ts_max)) - 1.0);
  return s;
}

Region CitySynthSpec::region() const {
  return polygon ? Region::from_polygon(*polygon) : Region::from_bbox(bbox);
}

SynthSpec SynthSpec::default_suite(std::uint64_t seed, std::size_t n_cities, std::size_t records_per_city) {
  SynthSpec spec;
  spec.seed = seed;
  spec.window = {*parse_rfc3339("2019-03-16T00:00:00Z"), *parse_rfc3339("2019-04-16T00:00:00Z")};
  Rng rng(derive_seed(seed, 0xC0FFEE));
  constexpr std::size_t kAnchorCount = std::size(kAnchors);
  for (std::size_t i = 0; i < n_cities; ++i) {
    const Anchor& a = kAnchors[i % kAnchorCount];
    CitySynthSpec c;
    c.city_id = std::string("syn-") + a.name;
    if (i >= kAnchorCount) c.city_id += "-" + std::to_string(i / kAnchorCount);
    c.tz_id = a.tz;
    // Exactly 12 km x 12 km, shifted per repeat so cities do not overlap.
    const GeoPoint sw{a.lat + 0.2 * static_cast<double>(i / kAnchorCount), a.lon};
    const GeoPoint ne = unproject_local({kCityExtentM, kCityExtentM}, sw);
    c.bbox = {sw.lat, sw.lon, ne.lat, ne.lon};
    if (i % 3 == 2) c.polygon = octagon(c.bbox);
    c.profile_group = static_cast<int>(i % 3);
    c.record_count = records_per_city;
    c.census = draw_covariates(rng, c.city_id);
    spec.cities.push_back(std::move(c));
  }
  return spec;
}

void SynthSpec::validate() const {
  auto prob = [](double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::kInvalidArgument, what + " must be a probability");
  };
  if (!(window.start_utc < window.end_utc)) fail(ErrorCode::kInvalidArgument, "synth window requires start < end");
  if (!(annotation_flip_prob >= 0.0 && annotation_flip_prob < 0.5)) {
    fail(ErrorCode::kInvalidArgument, "annotation flip probability must be in [0, 0.5)");
  }
  for (const auto& c : cities) {
    prob(c.driving_fraction, c.city_id + ": driving fraction");
    prob(c.frame_noise, c.city_id + ": frame noise");
    prob(c.deletion_rate, c.city_id + ": deletion rate");
    if (!(c.alpha > 1.0)) fail(ErrorCode::kInvalidArgument, c.city_id + ": alpha must exceed 1");
    if (c.record_count == 0) fail(ErrorCode::kInvalidArgument, c.city_id + ": record count must be positive");
    if (!(c.night_uplift_pct > -100.0)) fail(ErrorCode::kInvalidArgument, c.city_id + ": night uplift must exceed -100%");
    if (!(c.min_duration_s > 0.0 && c.min_duration_s <= c.max_duration_s)) {
      fail(ErrorCode::kInvalidArgument, c.city_id + ": invalid duration range");
    }
    if (c.profile_group < 0 || c.profile_group > 2) fail(ErrorCode::kInvalidArgument, c.city_id + ": profile group must be 0-2");
  }
}

std::vector<double> week_profile(int profile_group, double night_uplift_pct) {
  const NightWindow night;
  std::array<double, 24> hour{};
  for (int h = 0; h < 24; ++h) {
    if (night.contains(h)) {
      hour[static_cast<std::size_t>(h)] = 1.0 + night_uplift_pct / 100.0;
    } else if (profile_group == 2) {
      // 4 peak hours at 2.5 and 12 at 0.5 keep the mean day weight at 1.
      hour[static_cast<std::size_t>(h)] = h >= 7 && h <= 10 ? 2.5 : 0.5;
    } else {
      hour[static_cast<std::size_t>(h)] = 1.0;
    }
  }
  std::vector<double> w(kHoursPerWeek);
  for (int d = 0; d < 7; ++d) {
    const double day = profile_group == 1 && (d == 4 || d == 5) ? 2.0 : 1.0;
    for (int h = 0; h < 24; ++h) w[static_cast<std::size_t>(d * 24 + h)] = day * hour[static_cast<std::size_t>(h)];
  }
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= sum;
  return w;
}

CityCorpus gen_city(const SynthSpec& spec, std::size_t city_index) {
  if (city_index >= spec.cities.size()) fail(ErrorCode::kInvalidArgument, "city index out of range");
  const CitySynthSpec& city = spec.cities[city_index];
  Rng rng(derive_seed(spec.seed, city_index + 1));

  CityCorpus out{city.city_id, city.tz_id, city.region(), {}, {}, {}, 0};
  const TileGrid grid = build_grid(out.region, city.tile_size_m);
  const auto tiles = grid.active_tiles();
  if (tiles.empty()) fail(ErrorCode::kInvalidArgument, city.city_id + ": region has no active tiles");

  out.tile_weights.resize(tiles.size());
  for (double& w : out.tile_weights) {
    w = city.spatial == SpatialModel::kPowerLaw ? draw_power_law(rng, city.alpha, 1.0) : 1.0;
  }

  const std::size_t n = city.record_count;
  std::bernoulli_distribution is_driving(city.driving_fraction);
  std::vector<Label> truths(n);
  for (auto& t : truths) {
    t = is_driving(rng) ? Label::kDriving : Label::kNonDriving;
    if (t == Label::kDriving) ++out.planted_driving;
  }

  // Driving posts follow the tile weights exactly; the rest land uniformly.
  const auto per_tile = apportion(static_cast<std::int64_t>(out.planted_driving), out.tile_weights);
  std::vector<std::size_t> driving_tiles;
  driving_tiles.reserve(out.planted_driving);
  for (std::size_t t = 0; t < per_tile.size(); ++t) driving_tiles.insert(driving_tiles.end(), static_cast<std::size_t>(per_tile[t]), t);

  const TimeZone tz = TimeZone::load(city.tz_id);
  const auto profile = week_profile(city.profile_group, city.night_uplift_pct);
  const double max_w = *std::max_element(profile.begin(), profile.end());
  std::uniform_int_distribution<UtcSeconds> instant(spec.window.start_utc, spec.window.end_utc - 1);
  std::uniform_int_distribution<std::size_t> any_tile(0, tiles.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<SnapRecord> records(n);
  std::size_t next_driving = 0;
  for (std::size_t i = 0; i < n; ++i) {
    SnapRecord& r = records[i];
    r.city_id = city.city_id;
    const std::size_t tile = truths[i] == Label::kDriving ? driving_tiles[next_driving++] : any_tile(rng);
    r.location = point_in_tile(rng, grid, tiles[tile]);
    while (true) {
      const UtcSeconds ts = instant(rng);
      const double w = profile[static_cast<std::size_t>(tz.to_local(ts).hour_of_week())];
      if (unit(rng) * max_w < w) {
        r.ts_utc = ts;
        break;
      }
    }
    r.duration_s = std::round(uniform(rng, city.min_duration_s, city.max_duration_s) * 1000.0) / 1000.0;
    const auto frames = sample_frame_indices(r.duration_s);
    std::vector<double> scores(frames.size());
    for (double& s : scores) {
      const bool flip = unit(rng) < city.frame_noise;
      const bool driving_frame = (truths[i] == Label::kDriving) != flip;
      s = driving_frame ? uniform(rng, 0.55, 1.0) : uniform(rng, 0.0, 0.45);
    }
    r.frame_scores = std::move(scores);
    r.deleted = unit(rng) < city.deletion_rate;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].ts_utc < records[b].ts_utc; });
  out.records.reserve(n);
  out.truths.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    SnapRecord r = std::move(records[order[k]]);
    std::string idx = std::to_string(k);
    r.id = city.city_id + "-" + std::string(idx.size() < 6 ? 6 - idx.size() : 0, '0') + idx;
    out.records.push_back(std::move(r));
    out.truths.push_back(truths[order[k]]);
  }
  return out;
}

AnnotationSample gen_annotations(std::span<const Label> truths, std::span<const std::string> item_ids, int raters,
                                 double flip_prob, std::uint64_t seed) {
  if (!(flip_prob >= 0.0 && flip_prob < 0.5)) fail(ErrorCode::kInvalidArgument, "flip probability must be in [0, 0.5)");
  if (raters < 2) fail(ErrorCode::kInvalidArgument, "need at least two raters");
  if (truths.empty()) fail(ErrorCode::kEmptyInput, "no items to annotate");
  if (!item_ids.empty() && item_ids.size() != truths.size()) fail(ErrorCode::kShape, "item id count differs from truths");
  Rng rng(seed);
  std::bernoulli_distribution flip(flip_prob);
  std::vector<std::vector<int>> counts;
  std::vector<std::string> ids;
  std::vector<Rating> ratings;
  counts.reserve(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const std::string id = item_ids.empty() ? "item" + std::to_string(i) : item_ids[i];
    std::vector<int> row(2, 0);
    for (int r = 0; r < raters; ++r) {
      const bool driving = (truths[i] == Label::kDriving) != flip(rng);
      ++row[driving ? 0 : 1];
      ratings.push_back({id, "r" + std::to_string(r + 1), driving ? "driving" : "non_driving"});
    }
    counts.push_back(std::move(row));
    ids.push_back(id);
  }
  return {AnnotationMatrix(std::move(counts), std::move(ids), {"driving", "non_driving"}), std::move(ratings)};
}

std::vector<CityStats> gen_regression_cities(const RegressionSynthSpec& spec, std::uint64_t seed) {
  if (spec.beta.size() != design_columns().size()) fail(ErrorCode::kShape, "planted coefficient vector has wrong length");
  if (!(spec.sigma >= 0.0)) fail(ErrorCode::kInvalidArgument, "noise sigma must be >= 0");
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::VectorXd beta(static_cast<Eigen::Index>(spec.beta.size()));
  for (std::size_t j = 0; j < spec.beta.size(); ++j) beta(static_cast<Eigen::Index>(j)) = spec.beta[j];
  std::vector<CityStats> out;
  out.reserve(spec.n_cities);
  for (std::size_t i = 0; i < spec.n_cities; ++i) {
    std::string idx = std::to_string(i);
    const std::string id = "reg-" + std::string(idx.size() < 3 ? 3 - idx.size() : 0, '0') + idx;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) fail(ErrorCode::kInvalidArgument, "planted model keeps producing negative responses");
      CityStats s = draw_covariates(rng, id, spec.ranges);
      const double y = design_row(s).dot(beta) + spec.sigma * noise(rng);
      if (y < 0.0) continue;
      s.driving_snaps = std::exp(y) - 1.0;
      out.push_back(std::move(s));
      break;
    }
  }
  return out;
}

ClusterBenchmark gen_cluster_benchmark(std::size_t n_cities, std::uint64_t seed, std::size_t posts_per_city) {
  if (n_cities < 3) fail(ErrorCode::kInvalidArgument, "benchmark needs at least three cities");
  Rng rng(seed);
  ClusterBenchmark b;
  b.vectors.resize(static_cast<Eigen::Index>(n_cities), kHoursPerWeek);
  std::vector<std::discrete_distribution<int>> groups;
  for (int g = 0; g < 3; ++g) {
    const auto p = week_profile(g, 75.0);
    groups.emplace_back(p.begin(), p.end());
  }
  for (std::size_t i = 0; i < n_cities; ++i) {
    const int g = static_cast<int>(i % 3);
    b.planted.push_back(g);
    std::array<double, kHoursPerWeek> counts{};
    for (std::size_t k = 0; k < posts_per_city; ++k) counts[static_cast<std::size_t>(groups[static_cast<std::size_t>(g)](rng))] += 1.0;
    for (int j = 0; j < kHoursPerWeek; ++j) {
      b.vectors(static_cast<Eigen::Index>(i), j) = counts[static_cast<std::size_t>(j)] / static_cast<double>(posts_per_city);
    }
  }
  return b;
}

}  // namespace snapdrive
