#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "snapdrive/annotation.hpp"
#include "snapdrive/demographics.hpp"
#include "snapdrive/geo_grid.hpp"
#include "snapdrive/ingest.hpp"
#include "snapdrive/temporal.hpp"

namespace snapdrive {

using Rng = std::mt19937_64;

/// Inverse-CDF draw from the continuous power law with exponent `alpha`:
/// x_min * u^(-1/(alpha - 1)), u uniform on (0, 1].
double draw_power_law(Rng& rng, double alpha, double x_min);

enum class SpatialModel { kPowerLaw, kUniform };

/// Census covariates sampled uniformly inside the observed ranges of the
/// 130-city study table.
struct CovariateRanges {
  double log_pop_min = 12.35, log_pop_max = 17.19;
  double age_lt20_min = 15.0, age_lt20_max = 46.7;
  double age_20_40_min = 19.4, age_20_40_max = 58.3;
  double age_40_60_min = 14.1, age_40_60_max = 60.5;
  double male_min = 45.8, male_max = 75.6;
  double log_ts_min = 5.412, log_ts_max = 13.813;
};

/// Draws census covariates and total_snaps; driving_snaps is left at 0.
CityStats draw_covariates(Rng& rng, const std::string& city_id, const CovariateRanges& ranges = {});

struct CitySynthSpec {
  std::string city_id;
  std::string tz_id;
  BBox bbox;
  /// When set, the city boundary is this ring instead of the bbox.
  std::optional<std::vector<GeoPoint>> polygon;
  double tile_size_m = kDefaultTileSizeM;
  SpatialModel spatial = SpatialModel::kPowerLaw;
  double alpha = 2.5;
  /// Night (18:00-01:59 local) posting rate over the day rate, minus 1, in percent.
  double night_uplift_pct = 75.0;
  /// 0: flat week; 1: Friday/Saturday doubled; 2: morning commute peak.
  int profile_group = 0;
  double driving_fraction = 0.2356;
  std::size_t record_count = 20000;
  /// Probability that a sampled frame's score lands on the wrong side of 0.5.
  double frame_noise = 0.03;
  double min_duration_s = 3.0;
  double max_duration_s = 15.0;
  double deletion_rate = 0.0298;
  CityStats census;

  Region region() const;
};

struct RegressionSynthSpec {
  std::size_t n_cities = 130;
  /// Planted coefficients in design_columns() order.
  std::vector<double> beta = {-6.86, 0.05, 5.85, 0.0, 2.38, 0.19, -0.21, 1.21};
  double sigma = 0.1;
  CovariateRanges ranges;
};

struct SynthSpec {
  std::uint64_t seed = 42;
  CollectionWindow window;
  std::vector<CitySynthSpec> cities;
  double annotation_flip_prob = 0.1;
  std::size_t annotated_items = 3000;
  RegressionSynthSpec regression;

  /// `n_cities` cities cycling through a fixed list of anchor locations and
  /// zones; every third city uses a polygon boundary. The window spans
  /// 2019-03-16T00:00:00Z to 2019-04-16T00:00:00Z.
  static SynthSpec default_suite(std::uint64_t seed, std::size_t n_cities = 10, std::size_t records_per_city = 20000);

  /// Checks probabilities, alpha > 1 and positive counts (kInvalidArgument).
  void validate() const;
};

struct CityCorpus {
  std::string city_id;
  std::string tz_id;
  Region region;
  std::vector<SnapRecord> records;  // unlabeled, sorted by time; frame scores attached
  std::vector<Label> truths;        // aligned with records
  std::vector<double> tile_weights; // aligned with the grid's active tiles
  std::size_t planted_driving = 0;
};

/// Fully determined by (spec.seed, city_index).
CityCorpus gen_city(const SynthSpec& spec, std::size_t city_index);

/// Relative hour-of-week posting weights used by gen_city, summing to 1.
std::vector<double> week_profile(int profile_group, double night_uplift_pct);

struct AnnotationSample {
  AnnotationMatrix matrix;
  std::vector<Rating> ratings;
};

/// Each of `raters` raters reports the true label, flipped independently
/// with probability `flip_prob` (which must lie in [0, 0.5)). Categories
/// are {"driving", "non_driving"}, driving first.
AnnotationSample gen_annotations(std::span<const Label> truths, std::span<const std::string> item_ids, int raters,
                                 double flip_prob, std::uint64_t seed);

/// ln(DS + 1) = design_row(city) . beta + N(0, sigma^2). Cities whose
/// response would be negative are redrawn.
std::vector<CityStats> gen_regression_cities(const RegressionSynthSpec& spec, std::uint64_t seed);

struct ClusterBenchmark {
  Eigen::MatrixXd vectors;  // rows are week-fraction vectors
  std::vector<int> planted;
};

/// Cities split evenly over the three week_profile groups; each vector is
/// the normalized histogram of `posts_per_city` draws from its group's profile.
ClusterBenchmark gen_cluster_benchmark(std::size_t n_cities, std::uint64_t seed, std::size_t posts_per_city = 20000);

}  // namespace snapdrive
