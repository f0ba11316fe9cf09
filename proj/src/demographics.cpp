#include "snapdrive/demographics.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <tuple>

#include "csv.hpp"
#include "json.hpp"
#include "snapdrive/error.hpp"

namespace snapdrive {

namespace {

constexpr const char* kStatsHeader =
    "city_id,population,male_pct,age_lt20_pct,age_20_40_pct,age_40_60_pct,developing,total_snaps,driving_snaps";

double two_sided_t_p(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double chi2_sf(double x, int df) {
  if (df <= 0 || x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

bool is_constant_column(const Eigen::MatrixXd& x, Eigen::Index c) {
  return x.rows() > 0 && x.col(c).maxCoeff() == x.col(c).minCoeff() && x(0, c) != 0.0;
}

double residual_ss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.cols() == 0) return y.squaredNorm();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  const Eigen::VectorXd beta = qr.solve(y);
  return (y - x * beta).squaredNorm();
}

double lr_statistic(double n, double ssr_reduced, double ssr_full) {
  if (ssr_full <= 0.0) return ssr_reduced > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return std::max(0.0, n * std::log(ssr_reduced / ssr_full));
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, std::span<const int> cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(cols[j]);
  return out;
}

std::optional<double> optional_number(const std::string& field, std::size_t line_no, const char* name) {
  if (detail::trim(field).empty()) return std::nullopt;
  auto v = detail::parse_double(field);
  if (!v) {
    fail(ErrorCode::kCorruptInput,
         "city stats line " + std::to_string(line_no) + ": '" + name + "' is not a number");
  }
  return v;
}

}  // namespace

std::vector<CityStats> read_city_stats_csv(std::istream& in) {
  std::vector<CityStats> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty() || (line_no == 1 && line.starts_with("city_id,"))) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 9) {
      fail(ErrorCode::kCorruptInput, "city stats line " + std::to_string(line_no) + ": expected 9 columns");
    }
    CityStats s;
    s.city_id = f[0];
    s.population = optional_number(f[1], line_no, "population");
    s.male_pct = optional_number(f[2], line_no, "male_pct");
    s.age_lt20_pct = optional_number(f[3], line_no, "age_lt20_pct");
    s.age_20_40_pct = optional_number(f[4], line_no, "age_20_40_pct");
    s.age_40_60_pct = optional_number(f[5], line_no, "age_40_60_pct");
    if (auto d = optional_number(f[6], line_no, "developing")) {
      if (*d != 0.0 && *d != 1.0) fail(ErrorCode::kCorruptInput, "developing must be 0 or 1");
      s.developing = static_cast<int>(*d);
    }
    auto total = optional_number(f[7], line_no, "total_snaps");
    auto driving = optional_number(f[8], line_no, "driving_snaps");
    if (!total || !driving || *total < 0.0 || *driving < 0.0) {
      fail(ErrorCode::kCorruptInput, "city stats line " + std::to_string(line_no) + ": snap counts must be >= 0");
    }
    s.total_snaps = *total;
    s.driving_snaps = *driving;
    out.push_back(std::move(s));
  }
  return out;
}

void write_city_stats_csv(std::ostream& out, std::span<const CityStats> stats) {
  auto opt = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string(); };
  out << kStatsHeader << '\n';
  for (const auto& s : stats) {
    out << detail::csv_field(s.city_id) << ',' << opt(s.population) << ',' << opt(s.male_pct) << ','
        << opt(s.age_lt20_pct) << ',' << opt(s.age_20_40_pct) << ',' << opt(s.age_40_60_pct) << ','
        << (s.developing ? std::to_string(*s.developing) : std::string()) << ','
        << detail::format_double(s.total_snaps) << ',' << detail::format_double(s.driving_snaps) << '\n';
  }
}

std::vector<std::string> design_columns() {
  return {"Intercept", "Males", "Age<20", "20<Age<40", "40<Age<60", "Developing", "log(Pop.+1)", "log(TS+1)"};
}

Eigen::RowVectorXd design_row(const CityStats& s) {
  if (!s.population || !s.male_pct || !s.age_lt20_pct || !s.age_20_40_pct || !s.age_40_60_pct || !s.developing) {
    fail(ErrorCode::kInvalidArgument, "city '" + s.city_id + "' has missing census fields");
  }
  Eigen::RowVectorXd row(8);
  row << 1.0, *s.male_pct, *s.age_lt20_pct / 100.0, *s.age_20_40_pct / 100.0, *s.age_40_60_pct / 100.0,
      static_cast<double>(*s.developing), std::log(*s.population + 1.0), std::log(s.total_snaps + 1.0);
  return row;
}

Design build_design(std::span<const CityStats> stats) {
  Design d;
  d.columns = design_columns();
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> ys;
  for (const auto& s : stats) {
    std::vector<std::string> missing;
    if (!s.population) missing.push_back("population");
    if (!s.male_pct) missing.push_back("male_pct");
    if (!s.age_lt20_pct) missing.push_back("age_lt20_pct");
    if (!s.age_20_40_pct) missing.push_back("age_20_40_pct");
    if (!s.age_40_60_pct) missing.push_back("age_40_60_pct");
    if (!s.developing) missing.push_back("developing");
    if (!missing.empty()) {
      std::string reason = "missing";
      for (const auto& m : missing) reason += " " + m;
      d.excluded.push_back({s.city_id, reason});
      continue;
    }
    rows.push_back(design_row(s));
    ys.push_back(std::log(s.driving_snaps + 1.0));
    d.city_ids.push_back(s.city_id);
  }
  if (rows.empty()) fail(ErrorCode::kEmptyInput, "no city has complete census data");
  d.x.resize(static_cast<Eigen::Index>(rows.size()), 8);
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.x.row(static_cast<Eigen::Index>(i)) = rows[i];
    d.y(static_cast<Eigen::Index>(i)) = ys[i];
  }
  return d;
}

RegressionResult ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<std::string> names,
                         bool with_lr) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n) fail(ErrorCode::kShape, "response length does not match design rows");
  if (p == 0) fail(ErrorCode::kShape, "design has no columns");
  if (names.empty()) {
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  } else if (static_cast<Eigen::Index>(names.size()) != p) {
    fail(ErrorCode::kShape, "column name count does not match design");
  }
  if (n <= p) {
    fail(ErrorCode::kUnderdetermined,
         std::to_string(n) + " observations for " + std::to_string(p) + " coefficients");
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < p) {
    const auto& perm = qr.colsPermutation().indices();
    std::vector<std::string> dependent;
    for (Eigen::Index j = qr.rank(); j < p; ++j) dependent.push_back(names[static_cast<std::size_t>(perm(j))]);
    std::sort(dependent.begin(), dependent.end());
    std::string msg = "design is rank deficient; dependent columns:";
    for (const auto& d : dependent) msg += " " + d;
    fail(ErrorCode::kCollinearity, msg);
  }

  RegressionResult r;
  r.terms = std::move(names);
  r.n = static_cast<std::size_t>(n);
  r.df_residual = static_cast<int>(n - p);
  r.coefficients = qr.solve(y);
  const Eigen::VectorXd residuals = y - x * r.coefficients;
  r.ssr = residuals.squaredNorm();

  const Eigen::MatrixXd upper = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      upper.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd cov_perm = r_inv * r_inv.transpose();
  const Eigen::MatrixXd xtx_inv = qr.colsPermutation() * cov_perm * qr.colsPermutation().transpose();
  const double sigma2 = r.ssr / static_cast<double>(r.df_residual);

  r.std_errors.resize(p);
  r.t_values.resize(p);
  r.p_values.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double se = std::sqrt(std::max(0.0, sigma2 * xtx_inv(j, j)));
    const double beta = r.coefficients(j);
    r.std_errors(j) = se;
    if (se > 0.0) {
      r.t_values(j) = beta / se;
    } else {
      r.t_values(j) = beta == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), beta);
    }
    r.p_values(j) = two_sided_t_p(r.t_values(j), r.df_residual);
  }

  const bool intercept = is_constant_column(x, 0);
  double sst = 0.0;
  if (intercept) {
    sst = (y.array() - y.mean()).square().sum();
  } else {
    sst = y.squaredNorm();
  }
  r.r_squared = sst > 0.0 ? std::clamp(1.0 - r.ssr / sst, 0.0, 1.0) : 1.0;

  r.lr_chisq = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  r.lr_p = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  if (with_lr) {
    for (Eigen::Index j = intercept ? 1 : 0; j < p; ++j) {
      std::vector<int> keep;
      for (Eigen::Index c = 0; c < p; ++c) {
        if (c != j) keep.push_back(static_cast<int>(c));
      }
      const double ssr_reduced = residual_ss(select_columns(x, keep), y);
      r.lr_chisq(j) = lr_statistic(static_cast<double>(n), ssr_reduced, r.ssr);
      r.lr_p(j) = chi2_sf(r.lr_chisq(j), 1);
    }
  }
  return r;
}

LrTest lr_test(const Eigen::MatrixXd& x_full, std::span<const int> reduced_columns, const Eigen::VectorXd& y) {
  std::set<int> unique;
  for (int c : reduced_columns) {
    if (c < 0 || c >= x_full.cols() || !unique.insert(c).second) {
      fail(ErrorCode::kInvalidNesting, "reduced columns must be distinct columns of the full design");
    }
  }
  // Both models must be estimable.
  ols_fit(x_full, y, {}, false);
  const Eigen::MatrixXd reduced = select_columns(x_full, reduced_columns);
  if (reduced.cols() > 0) ols_fit(reduced, y, {}, false);
  const double ssr_full = residual_ss(x_full, y);
  const double ssr_reduced = residual_ss(reduced, y);
  LrTest t;
  t.df = static_cast<int>(x_full.cols() - reduced.cols());
  t.chisq = t.df == 0 ? 0.0 : lr_statistic(static_cast<double>(y.size()), ssr_reduced, ssr_full);
  t.p = chi2_sf(t.chisq, t.df);
  return t;
}

LrTest lr_test(const Eigen::MatrixXd& x_full, const Eigen::MatrixXd& x_reduced, const Eigen::VectorXd& y) {
  if (x_reduced.rows() != x_full.rows()) fail(ErrorCode::kShape, "designs differ in row count");
  std::vector<int> cols;
  std::vector<bool> used(static_cast<std::size_t>(x_full.cols()), false);
  for (Eigen::Index j = 0; j < x_reduced.cols(); ++j) {
    int match = -1;
    for (Eigen::Index c = 0; c < x_full.cols(); ++c) {
      if (!used[static_cast<std::size_t>(c)] && x_full.col(c) == x_reduced.col(j)) {
        match = static_cast<int>(c);
        break;
      }
    }
    if (match < 0) fail(ErrorCode::kInvalidNesting, "reduced design column " + std::to_string(j) + " is not in the full design");
    used[static_cast<std::size_t>(match)] = true;
    cols.push_back(match);
  }
  return lr_test(x_full, cols, y);
}

WelchResult welch_t(std::span<const double> a, std::span<const double> b) {
  auto stats = [](std::span<const double> g, const char* name) {
    if (g.size() < 2) fail(ErrorCode::kInvalidGroup, std::string("group ") + name + " needs at least two values");
    const double n = static_cast<double>(g.size());
    const double mean = std::accumulate(g.begin(), g.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : g) ss += (v - mean) * (v - mean);
    const double var = ss / (n - 1.0);
    if (!(var > 0.0)) fail(ErrorCode::kInvalidGroup, std::string("group ") + name + " has zero variance");
    return std::tuple{n, mean, var};
  };
  const auto [na, ma, va] = stats(a, "A");
  const auto [nb, mb, vb] = stats(b, "B");
  const double sa = va / na;
  const double sb = vb / nb;
  WelchResult r;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  r.p = two_sided_t_p(r.t, r.df);
  return r;
}

SlopeResult univariate_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::kShape, "x and y differ in length");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd response(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = x[static_cast<std::size_t>(i)];
    response(i) = y[static_cast<std::size_t>(i)];
  }
  const auto fit = ols_fit(design, response, {"Intercept", "x"}, false);
  return {fit.coefficients(0), fit.coefficients(1), fit.r_squared, fit.p_values(1)};
}

std::string significance_stars(double p) {
  if (std::isnan(p)) return "";
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.1) return ".";
  return "";
}

std::string regression_json(const RegressionResult& r, std::span<const ExcludedCity> excluded) {
  using nlohmann::ordered_json;
  auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };
  ordered_json j;
  j["dependent"] = "log(DS+1)";
  j["n"] = r.n;
  j["r_squared"] = r.r_squared;
  j["terms"] = ordered_json::array();
  for (std::size_t i = 0; i < r.terms.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    ordered_json t;
    t["term"] = r.terms[i];
    t["coef"] = num(r.coefficients(k));
    t["std_err"] = num(r.std_errors(k));
    t["t"] = num(r.t_values(k));
    t["p"] = num(r.p_values(k));
    t["stars"] = significance_stars(r.p_values(k));
    t["lr_chisq"] = num(r.lr_chisq(k));
    t["lr_p"] = num(r.lr_p(k));
    t["lr_stars"] = significance_stars(r.lr_p(k));
    j["terms"].push_back(std::move(t));
  }
  j["excluded"] = ordered_json::array();
  for (const auto& e : excluded) j["excluded"].push_back({{"city_id", e.city_id}, {"reason", e.reason}});
  j["note"] = "*** p<0.001, ** p<0.01, . p<0.1";
  return j.dump(2);
}

}  // namespace snapdrive
