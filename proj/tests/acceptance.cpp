// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: snapdrive_acceptance <path-to-snapdrive-cli> <scratch-dir> [--known-unattainable N[,N...]]
// Listed criteria still run and print FAIL when they fail, but do not set the
// exit status. README explains why each listed criterion cannot pass.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "snapdrive/aggregate.hpp"
#include "snapdrive/annotation.hpp"
#include "snapdrive/demographics.hpp"
#include "snapdrive/geo_grid.hpp"
#include "snapdrive/spatial_fit.hpp"
#include "snapdrive/synth.hpp"
#include "snapdrive/temporal.hpp"

namespace fs = std::filesystem;
using namespace snapdrive;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Inverse-CDF Pareto draw, kept separate from the library sampler.
double pareto(std::mt19937_64& rng, double alpha, double x_min) {
  const double u = 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return x_min * std::pow(u, -1.0 / (alpha - 1.0));
}

Outcome voting() {
  const auto t0 = Clock::now();
  std::vector<std::pair<VotingRule, std::function<bool(long, long)>>> rules = {
      {VotingRule::single(), [](long d, long) { return d >= 1; }},
      {VotingRule::majority(), [](long d, long n) { return 2 * d > n; }},
  };
  for (int p : kSweepThresholds) {
    rules.push_back({VotingRule::threshold(p), [p](long d, long n) { return 100 * d > p * n; }});
  }
  long vectors = 0;
  long short_vectors = 0;
  long mismatches = 0;
  std::vector<Label> v;
  for (int n = 1; n <= 12; ++n) {
    v.assign(static_cast<std::size_t>(n), Label::kNonDriving);
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      long d = 0;
      for (int i = 0; i < n; ++i) {
        const bool on = mask >> i & 1u;
        v[static_cast<std::size_t>(i)] = on ? Label::kDriving : Label::kNonDriving;
        d += on;
      }
      ++vectors;
      if (n <= 11) ++short_vectors;
      for (const auto& [rule, expect] : rules) {
        if ((aggregate_votes(v, rule) == Label::kDriving) != expect(d, n)) ++mismatches;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 1.0,
          fmt("%ld vectors (lengths 1-12; %ld of length <= 11) x %zu rules, %ld mismatches, %.3f s", vectors,
              short_vectors, rules.size(), mismatches, secs)};
}

Outcome mle_recovery() {
  const auto t0 = Clock::now();
  int exp_ok = 0;
  int pl_ok = 0;
  double worst_exp = 0;
  double worst_pl = 0;
  for (int s = 0; s < 100; ++s) {
    std::mt19937_64 rng(derive_seed(2000, static_cast<std::uint64_t>(s)));
    std::exponential_distribution<double> ex(0.5);
    std::vector<double> x(10000);
    for (auto& v : x) v = ex(rng);
    const double lam = fit_mle(x, Family::kExponential).param("lambda");
    const double rel = std::abs(lam - 0.5) / 0.5;
    worst_exp = std::max(worst_exp, rel);
    exp_ok += rel <= 0.02;
    for (auto& v : x) v = pareto(rng, 2.5, 1.0);
    const double alpha = fit_mle(x, Family::kPowerLaw, 1.0).param("alpha");
    worst_pl = std::max(worst_pl, std::abs(alpha - 2.5));
    pl_ok += std::abs(alpha - 2.5) <= 0.05;
  }
  const double secs = seconds_since(t0);
  return {exp_ok >= 99 && pl_ok >= 99 && secs < 5.0,
          fmt("exponential %d/100 (worst rel err %.4f), power law %d/100 (worst |da| %.4f), %.2f s", exp_ok, worst_exp,
              pl_ok, worst_pl, secs)};
}

Outcome bic_selection() {
  const auto t0 = Clock::now();
  std::map<Family, int> hits;
  for (int s = 0; s < 100; ++s) {
    std::mt19937_64 rng(derive_seed(3000, static_cast<std::uint64_t>(s)));
    std::vector<double> x(5000);
    for (Family f : kAllFamilies) {
      switch (f) {
        case Family::kPowerLaw:
          for (auto& v : x) v = pareto(rng, 2.5, 1.0);
          break;
        case Family::kNormal: {
          std::normal_distribution<double> d(100.0, 15.0);
          for (auto& v : x) v = d(rng);
          break;
        }
        case Family::kLogNormal: {
          std::lognormal_distribution<double> d(1.0, 0.75);
          for (auto& v : x) v = d(rng);
          break;
        }
        case Family::kExponential: {
          std::exponential_distribution<double> d(0.5);
          for (auto& v : x) v = d(rng);
          break;
        }
      }
      hits[f] += compare_fits(x).best_by_bic == f;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = hits[Family::kPowerLaw] >= 90 && hits[Family::kLogNormal] >= 90 && hits[Family::kNormal] >= 95 &&
                  hits[Family::kExponential] >= 95 && secs < 30.0;
  return {ok, fmt("power_law %d, normal %d, log_normal %d, exponential %d of 100; %.2f s", hits[Family::kPowerLaw],
                  hits[Family::kNormal], hits[Family::kLogNormal], hits[Family::kExponential], secs)};
}

Outcome kappa() {
  const std::vector<std::vector<int>> unanimous = {{3, 0}, {0, 3}};
  const std::vector<std::vector<int>> split = {{1, 1}, {1, 1}};
  const std::vector<std::vector<int>> mixed = {{3, 0}, {2, 1}, {1, 2}, {0, 3}, {2, 1}};
  const double e1 = std::abs(fleiss_kappa(AnnotationMatrix(unanimous)) - 1.0);
  const double e2 = std::abs(fleiss_kappa(AnnotationMatrix(split)) + 1.0);
  const double e3 = std::abs(fleiss_kappa(AnnotationMatrix(mixed)) - oracle::kappa_by_pairs(mixed));

  const double p = 0.1;
  const double analytic = 3 * p * p * (1 - p) + p * p * p;
  std::mt19937_64 rng(4000);
  std::bernoulli_distribution drive(0.2356);
  std::vector<Label> truths(20000);
  for (auto& t : truths) t = drive(rng) ? Label::kDriving : Label::kNonDriving;
  const auto sample = gen_annotations(truths, {}, 3, p, 4001);
  const auto gt = adjudicate(sample.matrix, 0);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) wrong += gt[i].label != truths[i];
  const double rate = static_cast<double>(wrong) / static_cast<double>(truths.size());
  const bool ok = e1 <= 1e-10 && e2 <= 1e-10 && e3 <= 1e-10 && std::abs(rate - analytic) <= 0.01;
  return {ok, fmt("|err| unanimous %.1e, split %.1e, mixed %.1e; adjudication error %.4f vs %.4f over %zu items", e1,
                  e2, e3, rate, analytic, truths.size())};
}

// Planted partition recovered up to a relabeling.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, int> ab;
  std::map<int, int> ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
    if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
  }
  return true;
}

Outcome clustering() {
  const auto t0 = Clock::now();
  int recovered = 0;
  int sil_ok = 0;
  std::string first_bad;
  for (int s = 0; s < 100; ++s) {
    const std::uint64_t seed = derive_seed(5000, static_cast<std::uint64_t>(s));
    const auto bench = gen_cluster_benchmark(30, seed);
    const auto k3 = kmeans(bench.vectors, 3, seed);
    recovered += same_partition(k3.labels, bench.planted);
    bool best = k3.silhouette.has_value();
    for (int k : {2, 4, 5, 6}) {
      const auto r = kmeans(bench.vectors, k, seed);
      if (!best || !r.silhouette) continue;
      if (!(*k3.silhouette > *r.silhouette)) {
        best = false;
        if (first_bad.empty()) first_bad = fmt("; seed %d: s(3)=%.4f <= s(%d)=%.4f", s, *k3.silhouette, k, *r.silhouette);
      }
    }
    sil_ok += best;
  }
  const double secs = seconds_since(t0);
  return {recovered >= 95 && sil_ok == 100 && secs < 10.0,
          fmt("partition recovered %d/100, silhouette(3) strictly best in %d/100, %.2f s", recovered, sil_ok, secs) +
              first_bad};
}

Outcome regression() {
  const auto t0 = Clock::now();
  RegressionSynthSpec exact;
  exact.sigma = 0.0;
  const auto d0 = build_design(gen_regression_cities(exact, 6000));
  const auto f0 = ols_fit(d0.x, d0.y, d0.columns, false);
  double max_err = 0;
  for (std::size_t j = 0; j < exact.beta.size(); ++j) {
    max_err = std::max(max_err, std::abs(f0.coefficients(static_cast<Eigen::Index>(j)) - exact.beta[j]));
  }
  const double r2_err = std::abs(f0.r_squared - 1.0);

  RegressionSynthSpec noisy;
  noisy.sigma = 0.1;
  noisy.n_cities = 130;
  const std::size_t p = noisy.beta.size();
  std::vector<int> within(p, 0);
  int null_ok = 0;
  const int null_col = 3;  // planted coefficient 0
  for (int s = 0; s < 100; ++s) {
    const auto d = build_design(gen_regression_cities(noisy, derive_seed(6001, static_cast<std::uint64_t>(s))));
    const auto f = ols_fit(d.x, d.y, d.columns, true);
    for (std::size_t j = 0; j < p; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      within[j] += std::abs(f.coefficients(jj) - noisy.beta[j]) <= 3.0 * f.std_errors(jj);
    }
    null_ok += f.lr_p(null_col) > 0.05;
  }
  const int worst = *std::min_element(within.begin(), within.end());
  std::string per;
  for (std::size_t j = 0; j < p; ++j) per += (j ? "," : "") + std::to_string(within[j]);
  const bool ok = max_err <= 1e-8 && r2_err <= 1e-10 && worst >= 95 && null_ok >= 90 &&
                  noisy.beta[static_cast<std::size_t>(null_col)] == 0.0;
  return {ok, fmt("zero-noise max |b-beta| %.2e, |R2-1| %.1e; within 3 SE per coefficient [%s]; null-column LR p>0.05 in "
                  "%d/100; %.2f s",
                  max_err, r2_err, per.c_str(), null_ok, seconds_since(t0))};
}

// Tile center restated from the grid definition, independent of TileGrid::center.
GeoPoint oracle_center(const TileGrid& g, TileIndex t) {
  constexpr double kPi = 3.14159265358979323846;
  const GeoPoint o = g.origin();
  const double x = (t.col + 0.5) * g.tile_size_m();
  const double y = (t.row + 0.5) * g.tile_size_m();
  return {o.lat + y / 111320.0, o.lon + x / (111320.0 * std::cos(o.lat * kPi / 180.0))};
}

Outcome geometry() {
  const auto spec = SynthSpec::default_suite(42, 10);
  long points = 0;
  long locate_bad = 0;
  long centers = 0;
  long mask_bad = 0;
  for (std::size_t i = 0; i < spec.cities.size(); ++i) {
    const Region region = spec.cities[i].region();
    const TileGrid g = build_grid(region, spec.cities[i].tile_size_m);
    const BBox b = region.bbox();
    std::mt19937_64 rng(derive_seed(7000, i));
    const double pad_lat = 0.05 * (b.north - b.south);
    const double pad_lon = 0.05 * (b.east - b.west);
    std::uniform_real_distribution<double> lat(b.south - pad_lat, b.north + pad_lat);
    std::uniform_real_distribution<double> lon(b.west - pad_lon, b.east + pad_lon);
    for (int k = 0; k < 10000; ++k) {
      const GeoPoint pt{lat(rng), lon(rng)};
      ++points;
      locate_bad += g.locate(pt) != oracle::brute_locate(pt, g);
    }
    std::vector<GeoPoint> ring(region.ring().begin(), region.ring().end());
    if (ring.empty()) ring = {{b.south, b.west}, {b.north, b.west}, {b.north, b.east}, {b.south, b.east}};
    for (int r = 0; r < g.n_rows(); ++r) {
      for (int c = 0; c < g.n_cols(); ++c) {
        ++centers;
        mask_bad += g.active({r, c}) != oracle::inside(oracle_center(g, {r, c}), ring);
      }
    }
  }
  return {locate_bad == 0 && mask_bad == 0,
          fmt("%ld points, %ld locate mismatches; %ld tile centers, %ld mask mismatches", points, locate_bad, centers,
              mask_bad)};
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " -q").c_str());
  return rc;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

// synth then report under `dir`; returns the results directory or empty on failure.
fs::path end_to_end_run(const fs::path& cli, const fs::path& dir, int jobs, std::string& err) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "synth.json");
    cfg << R"({"seed": 42, "out_dir": "corpus", "synth": {"driving_fraction": 0.2356, "night_uplift_pct": 75,
      "spatial": "power_law"}})";
  }
  const std::string jobs_flag = " --jobs " + std::to_string(jobs);
  if (run(quote(cli) + " synth --config " + quote(dir / "synth.json") + jobs_flag) != 0) {
    err = "synth failed";
    return {};
  }
  if (run(quote(cli) + " report --config " + quote(dir / "corpus" / "config.json") + jobs_flag) != 0) {
    err = "report failed";
    return {};
  }
  return dir / "corpus";
}

struct E2eState {
  fs::path first;
  bool ok = false;
};

Outcome end_to_end(const fs::path& cli, const fs::path& scratch, E2eState& state) {
  const auto t0 = Clock::now();
  std::string err;
  const fs::path corpus = end_to_end_run(cli, scratch / "run1", 1, err);
  const double secs = seconds_since(t0);
  if (corpus.empty()) return {false, err};
  state.first = corpus;

  const auto manifest = read_json(corpus / "manifest.json");
  const double planted = manifest.at("planted_driving_fraction").get<double>();
  const double planted_uplift = manifest.at("night_uplift_pct").get<double>();

  double pooled = std::nan("");
  std::ifstream ext(corpus / "results" / "extent.csv");
  std::string line;
  std::getline(ext, line);
  const auto header = [&] {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    return cols;
  }();
  const auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  while (std::getline(ext, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() == header.size() && cells[col("city_id")] == "ALL") {
      pooled = std::stod(cells[col("fraction_pct")]) / 100.0;
    }
  }

  const auto temporal = read_json(corpus / "results" / "temporal.json");
  const double uplift = temporal.at("night_uplift_pct").at("driving").get<double>();

  const auto fits = read_json(corpus / "results" / "spatial_fits.json");
  int cities = 0;
  int power = 0;
  for (const auto& c : fits.at("cities")) {
    ++cities;
    power += c.contains("best_by_bic") && c.at("best_by_bic") == "power_law";
  }
  const double share = cities ? static_cast<double>(power) / cities : 0.0;

  state.ok = true;
  const bool ok = std::abs(pooled - planted) <= 0.005 && std::abs(uplift - planted_uplift) <= 5.0 && share >= 0.9 &&
                  secs < 120.0;
  return {ok, fmt("extent %.4f vs planted %.4f, night uplift %.2f vs %.0f, power law best in %d/%d cities, %.1f s",
                  pooled, planted, uplift, planted_uplift, power, cities, secs)};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

Outcome determinism(const fs::path& cli, const fs::path& scratch, const E2eState& state) {
  if (!state.ok) return {false, "first end-to-end run did not complete"};
  std::string err;
  const fs::path second = end_to_end_run(cli, scratch / "run2", 4, err);
  if (second.empty()) return {false, err};
  const auto a = tree(state.first);
  const auto b = tree(second);
  std::size_t differing = 0;
  std::string first_diff;
  for (const auto& [name, content] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != content) {
      ++differing;
      if (first_diff.empty()) first_diff = "; first difference: " + name;
    }
  }
  for (const auto& [name, content] : b) {
    if (!a.count(name)) {
      ++differing;
      if (first_diff.empty()) first_diff = "; only in second run: " + name;
    }
  }
  return {differing == 0 && !a.empty(),
          fmt("%zu files compared (second run with --jobs 4), %zu differ", a.size(), differing) + first_diff};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> known;
  if (argc == 5 && std::string(argv[3]) == "--known-unattainable") {
    std::stringstream ss(argv[4]);
    for (std::string n; std::getline(ss, n, ',');) known.insert(std::stoi(n));
  } else if (argc != 3) {
    std::cerr << "usage: snapdrive_acceptance <snapdrive-cli> <scratch-dir> [--known-unattainable N[,N...]]\n";
    return 2;
  }
  const fs::path cli = fs::absolute(argv[1]);
  const fs::path scratch = fs::absolute(argv[2]);
  fs::create_directories(scratch);

  E2eState e2e;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, voting},
      {2, mle_recovery},
      {3, bic_selection},
      {4, kappa},
      {5, clustering},
      {6, regression},
      {7, geometry},
      {8, [&] { return end_to_end(cli, scratch, e2e); }},
      {9, [&] { return determinism(cli, scratch, e2e); }},
  };
  int failed = 0;
  for (const auto& [n, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool excused = !o.pass && known.count(n);
    failed += !o.pass && !excused;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << o.detail
              << (excused ? " [known unattainable; not counted in exit status]" : "") << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
