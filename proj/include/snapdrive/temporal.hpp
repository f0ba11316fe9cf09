#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "snapdrive/ingest.hpp"

namespace snapdrive {

inline constexpr int kHoursPerWeek = 168;

enum class ProfileClass { kDriving, kTotal };

/// Post counts by local hour of day.
struct HourlyProfile {
  std::string city_id;
  ProfileClass cls = ProfileClass::kTotal;
  std::array<std::int64_t, 24> counts{};

  std::int64_t total() const noexcept;
  HourlyProfile& operator+=(const HourlyProfile& other) noexcept;
};

/// kDriving counts only records labeled driving; kTotal counts every record.
HourlyProfile hourly_profile(std::span<const SnapRecord> records, const TimeZone& tz, ProfileClass cls,
                             std::string city_id = {});

/// Inclusive local-hour window that may wrap midnight. The default covers
/// 18:00 through 01:59.
struct NightWindow {
  int start_hour = 18;
  int end_hour = 1;

  bool contains(int hour) const noexcept;
  int length() const noexcept;
};

/// (mean hourly rate inside the window / mean rate outside - 1) * 100.
/// Throws kUndefined when no posts fall outside the window and
/// kEmptyInput when the profile is empty.
double night_uplift(const HourlyProfile& profile, const NightWindow& window = {});

/// Sample Pearson correlation. Throws kShape for unequal or short input and
/// kUndefined for a constant sequence.
double pearson(std::span<const double> x, std::span<const double> y);

/// Counts per UTC hour from window start (hour k covers
/// [start + 3600k, start + 3600(k+1))), zero hours included. Records
/// outside the window are ignored.
std::vector<double> hourly_series(std::span<const SnapRecord> records, const CollectionWindow& window,
                                  ProfileClass cls);

/// Share of a city's driving posts in each local hour of the week
/// (Monday 00:00 is index 0).
struct WeekFractionVector {
  std::string city_id;
  std::array<double, kHoursPerWeek> values{};
  std::int64_t driving = 0;
};

/// nullopt when the city has no driving posts.
std::optional<WeekFractionVector> week_vector(std::span<const SnapRecord> records, const TimeZone& tz,
                                              std::string city_id);

struct CityRecords {
  std::string city_id;
  TimeZone tz;
  std::span<const SnapRecord> records;
};

struct WeekVectors {
  std::vector<WeekFractionVector> vectors;
  std::vector<std::string> dropped;  // cities without driving posts

  /// One row per vector, 168 columns.
  Eigen::MatrixXd matrix() const;
};

WeekVectors week_vectors(std::span<const CityRecords> cities);

struct ClusterResult {
  int k = 0;
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // k x dims
  double inertia = 0.0;
  std::optional<double> silhouette;  // when 2 <= k < rows and every cluster is used
  std::uint64_t seed = 0;
  int iterations = 0;
  /// Inertia after each Lloyd update of the winning restart.
  std::vector<double> inertia_trace;
};

/// k-means++ seeding and Lloyd iterations until the assignment stops
/// changing or `max_iterations` is hit; best of `restarts` by inertia.
/// Restart r uses derive_seed(seed, r). Throws kInvalidK unless
/// 1 <= k <= rows.
ClusterResult kmeans(const Eigen::MatrixXd& data, int k, std::uint64_t seed, int restarts = 10,
                     int max_iterations = 300);

/// Mean silhouette with Euclidean distance; singleton clusters score 0.
/// Throws kUndefined with fewer than two clusters and kInvalidArgument for
/// fewer than three points or an unused label in [0, max label].
double silhouette(const Eigen::MatrixXd& data, std::span<const int> labels);
/// Per-point silhouette values behind silhouette(); same preconditions.
std::vector<double> silhouette_values(const Eigen::MatrixXd& data, std::span<const int> labels);

struct ElbowPoint {
  int k = 0;
  double inertia = 0.0;
  std::optional<double> silhouette;
};

std::vector<ElbowPoint> elbow_curve(const Eigen::MatrixXd& data, std::span<const int> ks, std::uint64_t seed,
                                    int restarts = 10);

/// First two principal-component scores of the mean-centered rows. Each
/// component is signed so its largest-magnitude loading is positive.
/// Throws kInvalidArgument for fewer than two rows.
Eigen::MatrixXd embed_2d(const Eigen::MatrixXd& data);

}  // namespace snapdrive
