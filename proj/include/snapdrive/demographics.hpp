#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace snapdrive {

/// Census covariates and post counts for one city. Counts are reals so
/// that synthetic corpora can carry exact planted responses.
struct CityStats {
  std::string city_id;
  std::optional<double> population;
  std::optional<double> male_pct;       // 0-100
  std::optional<double> age_lt20_pct;   // 0-100
  std::optional<double> age_20_40_pct;  // 0-100
  std::optional<double> age_40_60_pct;  // 0-100
  std::optional<int> developing;        // 0 or 1
  double total_snaps = 0.0;
  double driving_snaps = 0.0;
};

/// Header: city_id,population,male_pct,age_lt20_pct,age_20_40_pct,
/// age_40_60_pct,developing,total_snaps,driving_snaps. Empty census cells
/// are read as missing.
std::vector<CityStats> read_city_stats_csv(std::istream& in);
void write_city_stats_csv(std::ostream& out, std::span<const CityStats> stats);

struct ExcludedCity {
  std::string city_id;
  std::string reason;
};

/// Response ln(driving + 1) against intercept, male_pct (0-100), the three
/// age shares as proportions (0-1), developing, ln(population + 1) and
/// ln(total_snaps + 1).
struct Design {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> columns;
  std::vector<std::string> city_ids;
  std::vector<ExcludedCity> excluded;
};

/// Cities with any missing census field are excluded and reported.
/// Throws kEmptyInput when no city survives.
Design build_design(std::span<const CityStats> stats);
/// One design row for a complete CityStats (throws kInvalidArgument if incomplete).
Eigen::RowVectorXd design_row(const CityStats& s);
std::vector<std::string> design_columns();

struct RegressionResult {
  std::vector<std::string> terms;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd t_values;
  Eigen::VectorXd p_values;
  double r_squared = 0.0;
  double ssr = 0.0;
  int df_residual = 0;
  /// Per-term drop-one LR statistic; NaN for the intercept.
  Eigen::VectorXd lr_chisq;
  Eigen::VectorXd lr_p;
  std::size_t n = 0;
};

/// Least squares through column-pivoted QR. Standard errors from
/// sigma^2 (X'X)^-1 with sigma^2 = SSR / (n - p); two-sided t p-values.
/// When `with_lr` is set, each non-intercept column also gets a drop-one
/// LR test. Column 0 is treated as the intercept iff it is constant.
/// Errors: n <= p -> kUnderdetermined; rank deficiency -> kCollinearity
/// naming the dependent columns; size mismatch -> kShape.
RegressionResult ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         std::vector<std::string> names = {}, bool with_lr = true);

struct LrTest {
  double chisq = 0.0;
  double p = 1.0;
  int df = 0;
};

/// Gaussian LR test n ln(SSR_reduced / SSR_full) with df = column
/// difference. `reduced_columns` index into the columns of `x_full`. Throws
/// kInvalidNesting unless they are a subset.
LrTest lr_test(const Eigen::MatrixXd& x_full, std::span<const int> reduced_columns, const Eigen::VectorXd& y);
/// Same test with the reduced design given explicitly; nesting is checked by
/// matching columns of `x_reduced` against `x_full`.
LrTest lr_test(const Eigen::MatrixXd& x_full, const Eigen::MatrixXd& x_reduced, const Eigen::VectorXd& y);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

/// Throws kInvalidGroup when a group has fewer than two values or zero variance.
WelchResult welch_t(std::span<const double> a, std::span<const double> b);

struct SlopeResult {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  double p = 1.0;
};

SlopeResult univariate_slope(std::span<const double> x, std::span<const double> y);

/// "***" p < 0.001, "**" p < 0.01, "." p < 0.1, else "".
std::string significance_stars(double p);

/// JSON report mirroring a coefficient / LR table.
std::string regression_json(const RegressionResult& r, std::span<const ExcludedCity> excluded = {});

}  // namespace snapdrive
