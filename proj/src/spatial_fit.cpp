#include "snapdrive/spatial_fit.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>

#include "csv.hpp"
#include "json.hpp"
#include "snapdrive/error.hpp"

namespace snapdrive {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void require_sample(std::span<const double> x) {
  if (x.size() < 2) fail(ErrorCode::kInvalidArgument, "need at least two samples");
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, "sample contains a non-finite value");
  }
}

void require_positive(std::span<const double> x, Family f) {
  for (double v : x) {
    if (!(v > 0.0)) {
      fail(ErrorCode::kInvalidArgument, std::string(to_string(f)) + " requires strictly positive samples");
    }
  }
}

// Mean and population standard deviation, two-pass.
std::pair<double, double> moments(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(x.size()))};
}

FittedDistribution finish(Family f, std::vector<Param> params, std::span<const double> x) {
  FittedDistribution d;
  d.family = f;
  d.params = std::move(params);
  d.n = x.size();
  std::vector<double> values;
  for (const auto& p : d.params) values.push_back(p.value);
  d.log_likelihood = log_likelihood(f, values, x);
  d.bic = bic(free_parameters(f), d.n, d.log_likelihood);
  return d;
}

}  // namespace

std::int64_t TileCountVector::total() const noexcept {
  std::int64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::vector<double> TileCountVector::positive_counts() const {
  std::vector<double> out;
  for (auto c : counts) {
    if (c >= 1) out.push_back(static_cast<double>(c));
  }
  return out;
}

TileCountVector tile_counts(std::span<const GeoPoint> points, const TileGrid& grid, std::string city_id) {
  TileCountVector v;
  v.city_id = std::move(city_id);
  v.counts.assign(grid.active_count(), 0);
  for (const auto& p : points) {
    const auto tile = grid.locate(p);
    if (!tile) {
      ++v.out_of_grid;
      continue;
    }
    ++v.counts[*grid.active_position(*tile)];
  }
  return v;
}

std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::kPowerLaw: return "power_law";
    case Family::kNormal: return "normal";
    case Family::kLogNormal: return "log_normal";
    case Family::kExponential: return "exponential";
  }
  return "unknown";
}

std::optional<Family> parse_family(std::string_view name) noexcept {
  for (Family f : kAllFamilies) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

int free_parameters(Family f) noexcept {
  return f == Family::kNormal || f == Family::kLogNormal ? 2 : 1;
}

double FittedDistribution::param(std::string_view name) const {
  for (const auto& p : params) {
    if (p.name == name) return p.value;
  }
  fail(ErrorCode::kInvalidArgument, "no parameter '" + std::string(name) + "'");
}

double log_likelihood(Family family, std::span<const double> params, std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  switch (family) {
    case Family::kExponential: {
      const double lambda = params[0];
      if (!(lambda > 0.0)) return kNegInf;
      double sum = 0.0;
      for (double v : x) {
        if (v < 0.0) return kNegInf;
        sum += v;
      }
      return n * std::log(lambda) - lambda * sum;
    }
    case Family::kNormal: {
      const double mu = params[0];
      const double sigma = params[1];
      if (!(sigma > 0.0)) return kNegInf;
      double ss = 0.0;
      for (double v : x) ss += (v - mu) * (v - mu);
      return -n * (kLogSqrt2Pi + std::log(sigma)) - ss / (2.0 * sigma * sigma);
    }
    case Family::kLogNormal: {
      const double mu = params[0];
      const double sigma = params[1];
      if (!(sigma > 0.0)) return kNegInf;
      double ll = 0.0;
      for (double v : x) {
        if (!(v > 0.0)) return kNegInf;
        const double z = std::log(v) - mu;
        ll += -std::log(v) - z * z / (2.0 * sigma * sigma);
      }
      return ll - n * (kLogSqrt2Pi + std::log(sigma));
    }
    case Family::kPowerLaw: {
      const double alpha = params[0];
      const double x_min = params[1];
      if (!(alpha > 1.0) || !(x_min > 0.0)) return kNegInf;
      double log_sum = 0.0;
      for (double v : x) {
        if (v < x_min) return kNegInf;
        log_sum += std::log(v / x_min);
      }
      return n * (std::log(alpha - 1.0) - std::log(x_min)) - alpha * log_sum;
    }
  }
  return kNegInf;
}

FittedDistribution fit_mle(std::span<const double> x, Family family, std::optional<double> x_min) {
  require_sample(x);
  switch (family) {
    case Family::kExponential: {
      require_positive(x, family);
      const double mean = moments(x).first;
      return finish(family, {{"lambda", 1.0 / mean}}, x);
    }
    case Family::kNormal: {
      const auto [mean, sd] = moments(x);
      if (!(sd > 0.0)) fail(ErrorCode::kDegenerateSample, "normal fit: all values equal");
      return finish(family, {{"mu", mean}, {"sigma", sd}}, x);
    }
    case Family::kLogNormal: {
      require_positive(x, family);
      std::vector<double> logs(x.size());
      std::transform(x.begin(), x.end(), logs.begin(), [](double v) { return std::log(v); });
      const auto [mean, sd] = moments(logs);
      if (!(sd > 0.0)) fail(ErrorCode::kDegenerateSample, "log-normal fit: all values equal");
      return finish(family, {{"mu_log", mean}, {"sigma_log", sd}}, x);
    }
    case Family::kPowerLaw: {
      const double lower = x_min.value_or(*std::min_element(x.begin(), x.end()));
      if (!(lower > 0.0)) fail(ErrorCode::kInvalidArgument, "power-law fit needs x_min > 0");
      double log_sum = 0.0;
      for (double v : x) {
        if (v < lower) fail(ErrorCode::kInvalidArgument, "power-law fit: sample below x_min");
        log_sum += std::log(v / lower);
      }
      if (!(log_sum > 0.0)) fail(ErrorCode::kDegenerateSample, "power-law fit: every value equals x_min");
      const double alpha = 1.0 + static_cast<double>(x.size()) / log_sum;
      return finish(family, {{"alpha", alpha}, {"x_min", lower}}, x);
    }
  }
  fail(ErrorCode::kInvalidArgument, "unknown family");
}

const FittedDistribution* FitComparison::find(Family f) const noexcept {
  for (const auto& o : fits) {
    if (o.family == f && o.fit) return &*o.fit;
  }
  return nullptr;
}

FitComparison compare_fits(std::span<const double> x, std::string city_id) {
  FitComparison cmp;
  cmp.city_id = std::move(city_id);
  const FittedDistribution* best_bic = nullptr;
  const FittedDistribution* best_ll = nullptr;
  int successes = 0;
  for (Family f : kAllFamilies) {
    FitOutcome outcome;
    outcome.family = f;
    try {
      outcome.fit = fit_mle(x, f);
      ++successes;
    } catch (const Error& e) {
      outcome.error = e.what();
    }
    cmp.fits.push_back(std::move(outcome));
  }
  if (successes < 2) {
    fail(ErrorCode::kInsufficientFits,
         "only " + std::to_string(successes) + " distribution famil" + (successes == 1 ? "y" : "ies") + " could be fitted");
  }
  for (const auto& o : cmp.fits) {
    if (!o.fit) continue;
    if (!best_bic || o.fit->bic < best_bic->bic) best_bic = &*o.fit;
    if (!best_ll || o.fit->log_likelihood > best_ll->log_likelihood) best_ll = &*o.fit;
  }
  cmp.best_by_bic = best_bic->family;
  cmp.best_by_loglik = best_ll->family;
  return cmp;
}

std::map<Family, double> concentration_summary(std::span<const FitComparison> cities) {
  std::map<Family, double> share;
  for (Family f : kAllFamilies) share[f] = 0.0;
  if (cities.empty()) return share;
  for (const auto& c : cities) share[c.best_by_bic] += 1.0;
  for (auto& [f, v] : share) v = 100.0 * v / static_cast<double>(cities.size());
  return share;
}

void write_heatmap_csv(std::ostream& out, const TileGrid& grid, std::span<const std::int64_t> driving,
                       std::span<const std::int64_t> total) {
  if (driving.size() != grid.active_count() || total.size() != grid.active_count()) {
    fail(ErrorCode::kShape, "heatmap counts are not aligned with the active tiles");
  }
  out << "row,col,center_lat,center_lon,driving_count,total_count\n";
  const auto tiles = grid.active_tiles();
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const GeoPoint c = grid.center(tiles[i]);
    out << tiles[i].row << ',' << tiles[i].col << ',' << detail::format_double(c.lat) << ','
        << detail::format_double(c.lon) << ',' << driving[i] << ',' << total[i] << '\n';
  }
}

std::vector<HeatmapRow> read_heatmap_csv(std::istream& in) {
  std::vector<HeatmapRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty() || (line_no == 1 && line.starts_with("row,"))) continue;
    const auto f = detail::split_csv_line(line);
    auto r = f.size() == 6 ? detail::parse_int(f[0]) : std::nullopt;
    auto c = f.size() == 6 ? detail::parse_int(f[1]) : std::nullopt;
    auto lat = f.size() == 6 ? detail::parse_double(f[2]) : std::nullopt;
    auto lon = f.size() == 6 ? detail::parse_double(f[3]) : std::nullopt;
    auto d = f.size() == 6 ? detail::parse_int(f[4]) : std::nullopt;
    auto t = f.size() == 6 ? detail::parse_int(f[5]) : std::nullopt;
    if (!r || !c || !lat || !lon || !d || !t) {
      fail(ErrorCode::kCorruptInput, "heatmap line " + std::to_string(line_no) + " is malformed");
    }
    rows.push_back({{static_cast<int>(*r), static_cast<int>(*c)}, {*lat, *lon}, *d, *t});
  }
  return rows;
}

std::string fit_comparison_json(const FitComparison& cmp) {
  nlohmann::ordered_json j;
  j["city_id"] = cmp.city_id;
  j["best_by_bic"] = std::string(to_string(cmp.best_by_bic));
  j["best_by_loglik"] = std::string(to_string(cmp.best_by_loglik));
  j["fits"] = nlohmann::ordered_json::array();
  j["failures"] = nlohmann::ordered_json::array();
  for (const auto& o : cmp.fits) {
    if (!o.fit) {
      j["failures"].push_back({{"family", std::string(to_string(o.family))}, {"error", o.error}});
      continue;
    }
    nlohmann::ordered_json f;
    f["family"] = std::string(to_string(o.family));
    nlohmann::ordered_json params;
    for (const auto& p : o.fit->params) params[p.name] = p.value;
    f["params"] = params;
    f["loglik"] = o.fit->log_likelihood;
    f["bic"] = o.fit->bic;
    f["n"] = o.fit->n;
    f["best_by_bic"] = o.family == cmp.best_by_bic;
    f["best_by_loglik"] = o.family == cmp.best_by_loglik;
    j["fits"].push_back(std::move(f));
  }
  return j.dump(2);
}

}  // namespace snapdrive
