#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "snapdrive/geo_grid.hpp"

namespace snapdrive {

/// Per-active-tile counts, aligned with TileGrid::active_tiles().
struct TileCountVector {
  std::string city_id;
  std::vector<std::int64_t> counts;
  std::int64_t out_of_grid = 0;

  std::int64_t total() const noexcept;
  /// Tiles with at least one post, as reals. Zero tiles never enter a fit.
  std::vector<double> positive_counts() const;
};

TileCountVector tile_counts(std::span<const GeoPoint> points, const TileGrid& grid, std::string city_id = {});

enum class Family { kPowerLaw, kNormal, kLogNormal, kExponential };
inline constexpr std::array<Family, 4> kAllFamilies = {Family::kPowerLaw, Family::kNormal, Family::kLogNormal,
                                                       Family::kExponential};

std::string_view to_string(Family f) noexcept;
std::optional<Family> parse_family(std::string_view name) noexcept;
/// Free parameters counted by BIC (power-law x_min is fixed, not fitted).
int free_parameters(Family f) noexcept;

struct Param {
  std::string name;
  double value = 0.0;
};

struct FittedDistribution {
  Family family = Family::kPowerLaw;
  /// power_law: alpha, x_min; normal: mu, sigma; log_normal: mu_log,
  /// sigma_log; exponential: lambda.
  std::vector<Param> params;
  double log_likelihood = 0.0;
  double bic = 0.0;
  std::size_t n = 0;

  double param(std::string_view name) const;
};

/// Log-likelihood of `x` under `family` with the given parameters, in the
/// same order as FittedDistribution::params. Returns -inf for samples
/// outside the support.
double log_likelihood(Family family, std::span<const double> params, std::span<const double> x);

/// Closed-form maximum-likelihood fit. The power law is the continuous
/// Pareto with x_min = min(x) unless `x_min` is given.
/// Errors: n < 2, non-finite data, or data outside the family's support ->
/// kInvalidArgument; zero spread -> kDegenerateSample.
FittedDistribution fit_mle(std::span<const double> x, Family family, std::optional<double> x_min = std::nullopt);

struct FitOutcome {
  Family family = Family::kPowerLaw;
  std::optional<FittedDistribution> fit;
  std::string error;  // set when the fit failed
};

struct FitComparison {
  std::string city_id;
  std::vector<FitOutcome> fits;  // in kAllFamilies order
  Family best_by_bic = Family::kPowerLaw;
  Family best_by_loglik = Family::kPowerLaw;

  const FittedDistribution* find(Family f) const noexcept;
};

/// Fits every family; ties go to the earlier family in kAllFamilies.
/// Throws kInsufficientFits when fewer than two families succeed.
FitComparison compare_fits(std::span<const double> x, std::string city_id = {});

/// Share of cities (in percent) won by each family under BIC.
std::map<Family, double> concentration_summary(std::span<const FitComparison> cities);

/// `row,col,center_lat,center_lon,driving_count,total_count` per active
/// tile. Throws kShape when counts are not aligned with the active tiles.
void write_heatmap_csv(std::ostream& out, const TileGrid& grid, std::span<const std::int64_t> driving,
                       std::span<const std::int64_t> total);

struct HeatmapRow {
  TileIndex tile;
  GeoPoint center;
  std::int64_t driving = 0;
  std::int64_t total = 0;
};
std::vector<HeatmapRow> read_heatmap_csv(std::istream& in);

/// JSON object: city_id, best_by_bic, best_by_loglik, fits[] with family,
/// params{}, loglik, bic, n and winner flags, plus failures[].
std::string fit_comparison_json(const FitComparison& cmp);

/// k ln(n) - 2 loglik; lower is better.
inline double bic(int k, std::size_t n, double loglik) noexcept {
  return static_cast<double>(k) * std::log(static_cast<double>(n)) - 2.0 * loglik;
}

}  // namespace snapdrive
