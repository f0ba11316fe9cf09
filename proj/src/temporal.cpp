#include "snapdrive/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <random>

#include "snapdrive/error.hpp"
#include "snapdrive/types.hpp"

namespace snapdrive {

std::int64_t HourlyProfile::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

HourlyProfile& HourlyProfile::operator+=(const HourlyProfile& other) noexcept {
  for (std::size_t h = 0; h < counts.size(); ++h) counts[h] += other.counts[h];
  return *this;
}

HourlyProfile hourly_profile(std::span<const SnapRecord> records, const TimeZone& tz, ProfileClass cls,
                             std::string city_id) {
  HourlyProfile p;
  p.city_id = std::move(city_id);
  p.cls = cls;
  for (const auto& r : records) {
    if (cls == ProfileClass::kDriving && r.label != Label::kDriving) continue;
    ++p.counts[static_cast<std::size_t>(tz.to_local(r.ts_utc).hour)];
  }
  return p;
}

bool NightWindow::contains(int hour) const noexcept {
  if (start_hour <= end_hour) return hour >= start_hour && hour <= end_hour;
  return hour >= start_hour || hour <= end_hour;
}

int NightWindow::length() const noexcept {
  int n = 0;
  for (int h = 0; h < 24; ++h) n += contains(h) ? 1 : 0;
  return n;
}

double night_uplift(const HourlyProfile& profile, const NightWindow& window) {
  if (window.start_hour < 0 || window.start_hour > 23 || window.end_hour < 0 || window.end_hour > 23) {
    fail(ErrorCode::kInvalidArgument, "night window hours must be in [0, 23]");
  }
  const int inside_hours = window.length();
  if (inside_hours == 0 || inside_hours == 24) fail(ErrorCode::kInvalidArgument, "night window must split the day");
  if (profile.total() == 0) fail(ErrorCode::kEmptyInput, "profile has no posts");
  double inside = 0.0;
  double outside = 0.0;
  for (int h = 0; h < 24; ++h) {
    (window.contains(h) ? inside : outside) += static_cast<double>(profile.counts[static_cast<std::size_t>(h)]);
  }
  if (outside == 0.0) fail(ErrorCode::kUndefined, "no posts outside the night window");
  const double inside_rate = inside / inside_hours;
  const double outside_rate = outside / (24 - inside_hours);
  return (inside_rate / outside_rate - 1.0) * 100.0;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::kShape, "pearson inputs differ in length");
  if (x.size() < 2) fail(ErrorCode::kShape, "pearson needs at least two pairs");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::kUndefined, "correlation undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> hourly_series(std::span<const SnapRecord> records, const CollectionWindow& window,
                                  ProfileClass cls) {
  if (!(window.start_utc < window.end_utc)) fail(ErrorCode::kInvalidArgument, "window requires start < end");
  const auto hours = static_cast<std::size_t>((window.end_utc - window.start_utc + 3599) / 3600);
  std::vector<double> series(hours, 0.0);
  for (const auto& r : records) {
    if (cls == ProfileClass::kDriving && r.label != Label::kDriving) continue;
    if (r.ts_utc < window.start_utc || r.ts_utc >= window.end_utc) continue;
    series[static_cast<std::size_t>((r.ts_utc - window.start_utc) / 3600)] += 1.0;
  }
  return series;
}

std::optional<WeekFractionVector> week_vector(std::span<const SnapRecord> records, const TimeZone& tz,
                                              std::string city_id) {
  WeekFractionVector v;
  v.city_id = std::move(city_id);
  std::array<std::int64_t, kHoursPerWeek> counts{};
  for (const auto& r : records) {
    if (r.label != Label::kDriving) continue;
    ++counts[static_cast<std::size_t>(tz.to_local(r.ts_utc).hour_of_week())];
    ++v.driving;
  }
  if (v.driving == 0) return std::nullopt;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    v.values[i] = static_cast<double>(counts[i]) / static_cast<double>(v.driving);
  }
  return v;
}

Eigen::MatrixXd WeekVectors::matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(vectors.size()), kHoursPerWeek);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (int j = 0; j < kHoursPerWeek; ++j) m(static_cast<Eigen::Index>(i), j) = vectors[i].values[j];
  }
  return m;
}

WeekVectors week_vectors(std::span<const CityRecords> cities) {
  WeekVectors out;
  for (const auto& c : cities) {
    if (auto v = week_vector(c.records, c.tz, c.city_id)) {
      out.vectors.push_back(std::move(*v));
    } else {
      out.dropped.push_back(c.city_id);
    }
  }
  return out;
}

namespace {

struct LloydRun {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double inertia = std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::vector<double> trace;
};

Eigen::MatrixXd seed_plus_plus(const Eigen::MatrixXd& data, int k, std::mt19937_64& rng) {
  const Eigen::Index n = data.rows();
  Eigen::MatrixXd centers(k, data.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::Index pick = first(rng);
  centers.row(0) = data.row(pick);
  chosen[static_cast<std::size_t>(pick)] = true;
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (data.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double cumulative = 0.0;
      pick = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double w = d2[static_cast<std::size_t>(i)];
        if (w <= 0.0) continue;
        cumulative += w;
        pick = i;
        if (cumulative > target) break;
      }
    } else {
      // Every point coincides with a chosen center.
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) free.push_back(i);
      }
      std::uniform_int_distribution<std::size_t> any(0, free.size() - 1);
      pick = free[any(rng)];
    }
    centers.row(c) = data.row(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], (data.row(i) - centers.row(c)).squaredNorm());
    }
  }
  return centers;
}

LloydRun lloyd(const Eigen::MatrixXd& data, int k, std::uint64_t seed, int max_iterations) {
  std::mt19937_64 rng(seed);
  const Eigen::Index n = data.rows();
  LloydRun run;
  run.centroids = seed_plus_plus(data, k, rng);
  run.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n));

  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (data.row(i) - run.centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist[static_cast<std::size_t>(i)] = best_d;
      if (run.labels[static_cast<std::size_t>(i)] != best) {
        run.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && it > 0) break;

    // Refill empty clusters with the point farthest from its center.
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int l : run.labels) ++sizes[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int l = run.labels[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(l)] < 2) continue;
        if (far < 0 || dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(far)]) far = i;
      }
      --sizes[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(far)])];
      run.labels[static_cast<std::size_t>(far)] = c;
      sizes[static_cast<std::size_t>(c)] = 1;
      dist[static_cast<std::size_t>(far)] = 0.0;
    }

    run.centroids.setZero();
    for (Eigen::Index i = 0; i < n; ++i) run.centroids.row(run.labels[static_cast<std::size_t>(i)]) += data.row(i);
    for (int c = 0; c < k; ++c) run.centroids.row(c) /= static_cast<double>(sizes[static_cast<std::size_t>(c)]);

    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      inertia += (data.row(i) - run.centroids.row(run.labels[static_cast<std::size_t>(i)])).squaredNorm();
    }
    run.inertia = inertia;
    run.trace.push_back(inertia);
    run.iterations = it + 1;
  }
  return run;
}

}  // namespace

ClusterResult kmeans(const Eigen::MatrixXd& data, int k, std::uint64_t seed, int restarts, int max_iterations) {
  if (k < 1 || k > data.rows()) fail(ErrorCode::kInvalidK, "k must be in [1, number of rows]");
  if (restarts < 1 || max_iterations < 1) fail(ErrorCode::kInvalidArgument, "restarts and iterations must be >= 1");
  std::vector<std::future<LloydRun>> jobs;
  jobs.reserve(static_cast<std::size_t>(restarts));
  for (int r = 0; r < restarts; ++r) {
    jobs.push_back(std::async(std::launch::async, lloyd, std::cref(data), k,
                              derive_seed(seed, static_cast<std::uint64_t>(r)), max_iterations));
  }
  LloydRun best;
  for (auto& job : jobs) {
    LloydRun run = job.get();
    if (run.inertia < best.inertia) best = std::move(run);
  }
  ClusterResult out;
  out.k = k;
  out.labels = std::move(best.labels);
  out.centroids = std::move(best.centroids);
  out.inertia = best.inertia;
  out.seed = seed;
  out.iterations = best.iterations;
  out.inertia_trace = std::move(best.trace);
  if (k >= 2 && k < data.rows() && data.rows() >= 3) out.silhouette = silhouette(data, out.labels);
  return out;
}

std::vector<double> silhouette_values(const Eigen::MatrixXd& data, std::span<const int> labels) {
  const Eigen::Index n = data.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) fail(ErrorCode::kShape, "label count does not match rows");
  if (n < 3) fail(ErrorCode::kInvalidArgument, "silhouette needs at least three points");
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  if (*std::min_element(labels.begin(), labels.end()) < 0) fail(ErrorCode::kInvalidArgument, "negative label");
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  if (k < 2) fail(ErrorCode::kUndefined, "silhouette needs at least two clusters");
  for (int s : sizes) {
    if (s == 0) fail(ErrorCode::kInvalidArgument, "cluster labels must be contiguous with no empty cluster");
  }
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  std::vector<double> sums(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int own = labels[static_cast<std::size_t>(i)];
    if (sizes[static_cast<std::size_t>(own)] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += (data.row(i) - data.row(j)).norm();
    }
    const double a = sums[static_cast<std::size_t>(own)] / (sizes[static_cast<std::size_t>(own)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c != own) b = std::min(b, sums[static_cast<std::size_t>(c)] / sizes[static_cast<std::size_t>(c)]);
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) out[static_cast<std::size_t>(i)] = (b - a) / denom;
  }
  return out;
}

double silhouette(const Eigen::MatrixXd& data, std::span<const int> labels) {
  const auto values = silhouette_values(data, labels);
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

std::vector<ElbowPoint> elbow_curve(const Eigen::MatrixXd& data, std::span<const int> ks, std::uint64_t seed,
                                    int restarts) {
  std::vector<ElbowPoint> out;
  for (int k : ks) {
    const auto result = kmeans(data, k, seed, restarts);
    out.push_back({k, result.inertia, result.silhouette});
  }
  return out;
}

Eigen::MatrixXd embed_2d(const Eigen::MatrixXd& data) {
  if (data.rows() < 2) fail(ErrorCode::kInvalidArgument, "embedding needs at least two rows");
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::MatrixXd& v = svd.matrixV();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(data.rows(), 2);
  for (int c = 0; c < 2 && c < v.cols(); ++c) {
    Eigen::VectorXd loading = v.col(c);
    Eigen::Index arg = 0;
    loading.cwiseAbs().maxCoeff(&arg);
    if (loading(arg) < 0.0) loading = -loading;
    out.col(c) = centered * loading;
  }
  return out;
}

}  // namespace snapdrive
