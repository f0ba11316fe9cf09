#include "snapdrive/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "csv.hpp"
#include "json.hpp"
#include "snapdrive/annotation.hpp"
#include "snapdrive/error.hpp"
#include "snapdrive/spatial_fit.hpp"
#include "snapdrive/types.hpp"

namespace snapdrive {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using detail::format_double;
using detail::format_fixed;

namespace {

constexpr std::uint64_t kAnnotationStream = 0xA770;
constexpr std::uint64_t kAnnotationPickStream = 0xA771;
constexpr std::uint64_t kRegressionStream = 0x8E6;
constexpr std::size_t kMaxReportedFailures = 20;

// Runs fn(0..n-1) on up to `jobs` threads. The error of the lowest failing
// index is rethrown so failures are reported deterministically.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---- config parsing ----

using json = nlohmann::json;

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorCode::kConfig, "config: " + msg); }

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) config_error(where + " must be an object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      config_error("unknown key '" + item.key() + "' in " + where);
    }
  }
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) config_error(where + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) config_error(where + " must be finite");
  return d;
}

long long integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) config_error(where + " must be an integer");
  return v.get<long long>();
}

std::size_t count(const json& v, const std::string& where) {
  const long long n = integer(v, where);
  if (n <= 0) config_error(where + " must be positive");
  return static_cast<std::size_t>(n);
}

std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) config_error(where + " must be a string");
  return v.get<std::string>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

UtcSeconds timestamp(const json& v, const std::string& where) {
  const auto ts = parse_rfc3339(text(v, where));
  if (!ts) config_error(where + " must be an RFC 3339 timestamp");
  return *ts;
}

Region parse_region(const json& v, const std::string& where) {
  check_keys(v, {"bbox", "polygon"}, where);
  if (v.contains("bbox") == v.contains("polygon")) config_error(where + " needs exactly one of bbox or polygon");
  if (v.contains("bbox")) {
    const json& b = v["bbox"];
    if (!b.is_array() || b.size() != 4) config_error(where + ".bbox must be [south, west, north, east]");
    return Region::from_bbox({number(b[0], where + ".bbox"), number(b[1], where + ".bbox"),
                              number(b[2], where + ".bbox"), number(b[3], where + ".bbox")});
  }
  const json& ring = v["polygon"];
  if (!ring.is_array()) config_error(where + ".polygon must be an array of [lon, lat] pairs");
  std::vector<GeoPoint> pts;
  for (const auto& p : ring) {
    if (!p.is_array() || p.size() != 2) config_error(where + ".polygon vertices must be [lon, lat]");
    const GeoPoint g{number(p[1], where + ".polygon"), number(p[0], where + ".polygon")};
    if (!g.valid()) config_error(where + ".polygon vertex out of range");
    pts.push_back(g);
  }
  return Region::from_polygon(std::move(pts));
}

CityStats parse_census(const json& v, const std::string& city_id, const fs::path& base, const std::string& where) {
  if (v.is_string()) {
    const fs::path path = resolve(base, v.get<std::string>());
    std::ifstream in(path);
    if (!in) fail(ErrorCode::kIo, "cannot open census file " + path.string());
    for (auto& s : read_city_stats_csv(in)) {
      if (s.city_id == city_id) return s;
    }
    config_error(where + ": no row for city '" + city_id + "' in " + path.string());
  }
  check_keys(v, {"population", "male_pct", "age_lt20_pct", "age_20_40_pct", "age_40_60_pct", "developing"}, where);
  CityStats s;
  s.city_id = city_id;
  auto opt = [&](const char* key, std::optional<double>& field) {
    if (v.contains(key) && !v[key].is_null()) field = number(v[key], where + "." + key);
  };
  opt("population", s.population);
  opt("male_pct", s.male_pct);
  opt("age_lt20_pct", s.age_lt20_pct);
  opt("age_20_40_pct", s.age_20_40_pct);
  opt("age_40_60_pct", s.age_40_60_pct);
  if (v.contains("developing") && !v["developing"].is_null()) {
    const long long d = integer(v["developing"], where + ".developing");
    if (d != 0 && d != 1) config_error(where + ".developing must be 0 or 1");
    s.developing = static_cast<int>(d);
  }
  return s;
}

SpatialModel parse_spatial(const std::string& s) {
  if (s == "power_law") return SpatialModel::kPowerLaw;
  if (s == "uniform") return SpatialModel::kUniform;
  config_error("synth.spatial must be power_law or uniform");
}

void parse_synth(const json& v, SynthSettings& s) {
  check_keys(v,
             {"n_cities", "records_per_city", "driving_fraction", "night_uplift_pct", "spatial", "alpha",
              "frame_noise", "deletion_rate", "annotated_items", "annotation_flip_prob", "regression_cities",
              "regression_sigma"},
             "synth");
  if (v.contains("n_cities")) s.n_cities = count(v["n_cities"], "synth.n_cities");
  if (v.contains("records_per_city")) s.records_per_city = count(v["records_per_city"], "synth.records_per_city");
  if (v.contains("driving_fraction")) s.driving_fraction = number(v["driving_fraction"], "synth.driving_fraction");
  if (v.contains("night_uplift_pct")) s.night_uplift_pct = number(v["night_uplift_pct"], "synth.night_uplift_pct");
  if (v.contains("spatial")) s.spatial = parse_spatial(text(v["spatial"], "synth.spatial"));
  if (v.contains("alpha")) s.alpha = number(v["alpha"], "synth.alpha");
  if (v.contains("frame_noise")) s.frame_noise = number(v["frame_noise"], "synth.frame_noise");
  if (v.contains("deletion_rate")) s.deletion_rate = number(v["deletion_rate"], "synth.deletion_rate");
  if (v.contains("annotated_items")) s.annotated_items = count(v["annotated_items"], "synth.annotated_items");
  if (v.contains("annotation_flip_prob")) {
    s.annotation_flip_prob = number(v["annotation_flip_prob"], "synth.annotation_flip_prob");
  }
  if (v.contains("regression_cities")) s.regression_cities = count(v["regression_cities"], "synth.regression_cities");
  if (v.contains("regression_sigma")) s.regression_sigma = number(v["regression_sigma"], "synth.regression_sigma");
}

// ---- small readers ----

std::ifstream open_input(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, std::string("cannot open ") + what + " file " + path.string());
  return in;
}

// id,label
std::map<std::string, Label> read_truth_csv(const fs::path& path) {
  auto in = open_input(path, "truth");
  std::map<std::string, Label> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty() || (line_no == 1 && line.rfind("id,", 0) == 0)) continue;
    const auto f = detail::split_csv_line(line);
    const auto label = f.size() == 2 ? parse_label(detail::trim(f[1])) : std::nullopt;
    if (!label) fail(ErrorCode::kCorruptInput, path.string() + ":" + std::to_string(line_no) + ": expected id,label");
    out[std::string(detail::trim(f[0]))] = *label;
  }
  return out;
}

// snap_id,frame_index,score
std::map<std::string, std::vector<double>> read_frame_scores_csv(const fs::path& path) {
  auto in = open_input(path, "frame score");
  std::map<std::string, std::map<long long, double>> by_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty() || (line_no == 1 && line.rfind("snap_id,", 0) == 0)) continue;
    const auto f = detail::split_csv_line(line);
    const auto idx = f.size() == 3 ? detail::parse_int(f[1]) : std::nullopt;
    const auto score = f.size() == 3 ? detail::parse_double(f[2]) : std::nullopt;
    if (!idx || !score || *score < 0.0 || *score > 1.0) {
      fail(ErrorCode::kCorruptInput, path.string() + ":" + std::to_string(line_no) + ": expected snap_id,frame_index,score");
    }
    by_id[std::string(detail::trim(f[0]))][*idx] = *score;
  }
  std::map<std::string, std::vector<double>> out;
  for (auto& [id, frames] : by_id) {
    auto& v = out[id];
    for (auto& [i, s] : frames) v.push_back(s);
  }
  return out;
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string out;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += detail::csv_field(c);
    first = false;
  }
  out += '\n';
  return out;
}

ordered_json num(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_';
  return out;
}

// ---- stage results ----

struct IngestData {
  std::vector<std::vector<SnapRecord>> by_city;  // aligned with cfg.cities
  std::size_t parsed = 0;
  std::vector<ParseFailure> failures;
  DeletionSummary deletion;
  std::size_t unknown_city = 0;
  std::size_t out_of_window = 0;
  std::size_t sidecar_attached = 0;
};

struct ClassifyData {
  std::vector<std::vector<int>> driving_frames;  // per city, per record; -1 when pre-labeled
  std::vector<std::vector<int>> frames;
};

struct Evaluation {
  std::string reference;
  EvalReport report;
  std::vector<SweepPoint> sweep;
};

struct AnnotateData {
  AnnotationMatrix matrix;
  FleissKappa kappa;
  std::vector<GroundTruthLabel> truth;
};

struct SpatialCity {
  TileGrid grid;
  TileCountVector driving;
  TileCountVector total;
  std::optional<FitComparison> fits;
  std::string error;
};

struct TemporalData {
  std::vector<HourlyProfile> driving;
  std::vector<HourlyProfile> total;
  HourlyProfile pooled_driving;
  HourlyProfile pooled_total;
  std::optional<double> pearson_r;
  std::string pearson_error;
  std::size_t pearson_hours = 0;
};

struct ClusterData {
  WeekVectors vectors;
  std::optional<ClusterResult> result;
  std::vector<double> point_silhouette;
  Eigen::MatrixXd embedding;
  std::vector<ElbowPoint> elbow;
};

struct RegressData {
  Design design;
  RegressionResult fit;
  std::optional<WelchResult> welch;
  std::string welch_error;
  std::string source;
};

std::optional<double> uplift_or_null(const HourlyProfile& p, const NightWindow& w) {
  try {
    return night_uplift(p, w);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::string opt_fixed(const std::optional<double>& v, int decimals) {
  return v ? format_fixed(*v, decimals) : std::string("n/a");
}

class Run {
 public:
  explicit Run(const PipelineConfig& cfg) : cfg_(cfg) {}

  std::vector<fs::path> execute(const std::string& name) {
    if (name == "grid") {
      write_grid();
    } else if (name == "ingest") {
      write_ingest();
    } else if (name == "annotate") {
      write_annotate();
    } else if (name == "classify") {
      write_classify();
    } else if (name == "extent") {
      write_extent();
    } else if (name == "spatial") {
      write_spatial();
    } else if (name == "temporal") {
      write_temporal();
    } else if (name == "cluster") {
      write_cluster();
    } else if (name == "regress") {
      write_regress();
    } else if (name == "synth") {
      write_synth();
    } else if (name == "report") {
      write_report();
    } else {
      fail(ErrorCode::kUsage, "unknown subcommand '" + name + "'");
    }
    return written_;
  }

 private:
  void emit(const fs::path& rel, const std::string& content) {
    const fs::path path = cfg_.out_dir / rel;
    detail::write_file_atomic(path, content);
    written_.push_back(path);
  }

  void require_cities() const {
    if (cfg_.cities.empty()) fail(ErrorCode::kConfig, "config: no cities configured");
  }

  const std::vector<TimeZone>& zones() {
    if (zones_.empty()) {
      for (const auto& c : cfg_.cities) zones_.push_back(TimeZone::load(c.tz_id));
    }
    return zones_;
  }

  // ---- grid ----
  const std::vector<TileGrid>& grids() {
    if (grids_.empty()) {
      require_cities();
      for (const auto& c : cfg_.cities) grids_.push_back(build_grid(c.region, cfg_.tile_size_m));
    }
    return grids_;
  }

  void write_grid() {
    const auto& g = grids();
    for (std::size_t i = 0; i < g.size(); ++i) {
      std::ostringstream out;
      write_grid_csv(out, g[i]);
      emit(fs::path("grids") / (safe_name(cfg_.cities[i].id) + ".csv"), out.str());
    }
  }

  // ---- ingest ----
  const IngestData& ingest() {
    if (ingest_) return *ingest_;
    require_cities();
    zones();
    if (cfg_.inputs.snaps.empty()) fail(ErrorCode::kConfig, "config: inputs.snaps is required");
    IngestData d;
    ParseResult parsed = read_snaps_file(cfg_.inputs.snaps.string(), cfg_.inputs.snaps_format);
    d.parsed = parsed.records.size();
    d.failures = std::move(parsed.failures);
    std::set<std::string> deleted;
    if (!cfg_.inputs.deleted_ids.empty()) {
      auto in = open_input(cfg_.inputs.deleted_ids, "deleted-ids");
      deleted = read_id_list(in);
    }
    d.deletion = mark_deleted(parsed.records, deleted);
    if (!cfg_.inputs.frame_scores.empty()) {
      const auto sidecar = read_frame_scores_csv(cfg_.inputs.frame_scores);
      for (auto& r : parsed.records) {
        if (r.frame_scores) continue;
        if (auto it = sidecar.find(r.id); it != sidecar.end()) {
          r.frame_scores = it->second;
          ++d.sidecar_attached;
        }
      }
    }
    std::map<std::string, std::size_t> city_index;
    for (std::size_t i = 0; i < cfg_.cities.size(); ++i) city_index[cfg_.cities[i].id] = i;
    d.by_city.resize(cfg_.cities.size());
    for (auto& r : parsed.records) {
      if (r.deleted) continue;
      const auto it = city_index.find(r.city_id);
      if (it == city_index.end()) {
        ++d.unknown_city;
        continue;
      }
      if (cfg_.window && (r.ts_utc < cfg_.window->start_utc || r.ts_utc > cfg_.window->end_utc)) {
        ++d.out_of_window;
        continue;
      }
      d.by_city[it->second].push_back(std::move(r));
    }
    ingest_ = std::move(d);
    return *ingest_;
  }

  void write_ingest() {
    const auto& d = ingest();
    ordered_json j;
    j["parsed"] = d.parsed;
    j["failed_lines"] = d.failures.size();
    j["failures"] = ordered_json::array();
    for (std::size_t i = 0; i < d.failures.size() && i < kMaxReportedFailures; ++i) {
      j["failures"].push_back({{"line", d.failures[i].line}, {"message", d.failures[i].message}});
    }
    j["deleted"] = d.deletion.deleted;
    j["deletion_rate_pct"] = d.deletion.rate_pct;
    j["unknown_city"] = d.unknown_city;
    j["out_of_window"] = d.out_of_window;
    j["sidecar_frame_scores"] = d.sidecar_attached;
    j["cities"] = ordered_json::array();
    std::size_t active = 0;
    for (std::size_t i = 0; i < cfg_.cities.size(); ++i) {
      ordered_json c;
      c["city_id"] = cfg_.cities[i].id;
      c["tz_id"] = cfg_.cities[i].tz_id;
      c["records"] = d.by_city[i].size();
      if (cfg_.window) c["crawl_epochs"] = crawl_plan(*cfg_.window, cfg_.cities[i].id).epochs.size();
      active += d.by_city[i].size();
      j["cities"].push_back(std::move(c));
    }
    j["active"] = active;
    emit("ingest_summary.json", dump(j));

    std::ostringstream snaps;
    for (const auto& city : d.by_city) write_snaps(snaps, city, RecordFormat::kJsonl);
    emit("snaps_active.jsonl", snaps.str());

    if (cfg_.window) {
      std::string plan = "city_id,epoch_utc\n";
      for (const auto& c : cfg_.cities) {
        for (UtcSeconds e : crawl_plan(*cfg_.window, c.id).epochs) plan += csv_row({c.id, format_rfc3339(e)});
      }
      emit("crawl_plan.csv", plan);
    }
  }

  // ---- classify ----
  // Records of the ingested corpus with labels filled in.
  const std::vector<std::vector<SnapRecord>>& labeled() {
    if (labeled_) return *labeled_;
    const auto& d = ingest();
    std::vector<std::vector<SnapRecord>> out = d.by_city;
    ClassifyData cd;
    cd.driving_frames.resize(out.size());
    cd.frames.resize(out.size());
    parallel_for(out.size(), cfg_.jobs, [&](std::size_t c) {
      auto& recs = out[c];
      cd.driving_frames[c].assign(recs.size(), -1);
      cd.frames[c].assign(recs.size(), 0);
      for (std::size_t i = 0; i < recs.size(); ++i) {
        auto& r = recs[i];
        if (r.frame_scores && !r.frame_scores->empty()) {
          r.label = classify_scores(*r.frame_scores, cfg_.rule, cfg_.frame_cutoff);
          int dcount = 0;
          for (double s : *r.frame_scores) dcount += frame_label(s, cfg_.frame_cutoff) == Label::kDriving;
          cd.driving_frames[c][i] = dcount;
          cd.frames[c][i] = static_cast<int>(r.frame_scores->size());
        } else if (!r.label) {
          fail(ErrorCode::kInvalidArgument, "record " + r.id + " has neither frame scores nor a label");
        }
      }
    });
    classify_ = std::move(cd);
    labeled_ = std::move(out);
    return *labeled_;
  }

  std::vector<SnapRecord> all_labeled() {
    std::vector<SnapRecord> all;
    for (const auto& c : labeled()) all.insert(all.end(), c.begin(), c.end());
    return all;
  }

  std::optional<Evaluation> evaluation() {
    std::map<std::string, Label> truth;
    std::string reference;
    if (!cfg_.inputs.annotations.empty()) {
      for (const auto& g : annotate().truth) truth[g.item_id] = g.label;
      reference = "adjudicated annotations";
    } else if (!cfg_.inputs.truth.empty()) {
      truth = read_truth_csv(cfg_.inputs.truth);
      reference = "truth file";
    } else {
      return std::nullopt;
    }
    std::vector<Label> pred;
    std::vector<Label> ref;
    std::vector<std::vector<double>> clips;
    std::vector<Label> clip_truth;
    for (const auto& city : labeled()) {
      for (const auto& r : city) {
        const auto it = truth.find(r.id);
        if (it == truth.end()) continue;
        pred.push_back(*r.label);
        ref.push_back(it->second);
        if (r.frame_scores && !r.frame_scores->empty()) {
          clips.push_back(*r.frame_scores);
          clip_truth.push_back(it->second);
        }
      }
    }
    if (pred.empty()) return std::nullopt;
    Evaluation e{reference, evaluate(pred, ref), {}};
    if (!clips.empty()) e.sweep = threshold_sweep(clips, clip_truth, cfg_.frame_cutoff);
    return e;
  }

  void write_classify() {
    const auto& recs = labeled();
    std::string out = "id,city_id,label,driving_frames,frames\n";
    for (std::size_t c = 0; c < recs.size(); ++c) {
      for (std::size_t i = 0; i < recs[c].size(); ++i) {
        const auto& r = recs[c][i];
        const int df = classify_->driving_frames[c][i];
        out += csv_row({r.id, r.city_id, std::string(to_string(*r.label)), df < 0 ? "" : std::to_string(df),
                        df < 0 ? "" : std::to_string(classify_->frames[c][i])});
      }
    }
    emit("classified.csv", out);
    if (const auto e = evaluation()) {
      ordered_json j;
      j["rule"] = cfg_.rule.name();
      j["frame_cutoff"] = cfg_.frame_cutoff;
      j["reference"] = e->reference;
      j["items"] = e->report.confusion.total();
      j["accuracy"] = e->report.accuracy;
      j["precision"] = e->report.precision;
      j["recall"] = e->report.recall;
      j["f1"] = e->report.f1;
      j["confusion"] = {{"tp", e->report.confusion.tp},
                        {"fp", e->report.confusion.fp},
                        {"fn", e->report.confusion.fn},
                        {"tn", e->report.confusion.tn}};
      emit("evaluation.json", dump(j));
      std::string sweep = "rule,precision,recall\n";
      for (const auto& p : e->sweep) sweep += csv_row({p.rule, format_double(p.precision), format_double(p.recall)});
      emit("threshold_sweep.csv", sweep);
    }
  }

  // ---- annotate ----
  const AnnotateData& annotate() {
    if (annotate_) return *annotate_;
    if (cfg_.inputs.annotations.empty()) fail(ErrorCode::kConfig, "config: inputs.annotations is required");
    auto in = open_input(cfg_.inputs.annotations, "annotation");
    const auto ratings = read_ratings_csv(in);
    AnnotationMatrix m = pivot_ratings(ratings, {"driving", "non_driving"}, 3);
    auto kappa = fleiss_kappa_detail(m);
    auto truth = adjudicate(m, 0);
    annotate_.emplace(AnnotateData{std::move(m), kappa, std::move(truth)});
    return *annotate_;
  }

  void write_annotate() {
    const auto& a = annotate();
    std::string gt = "item_id,label,support\n";
    std::size_t driving = 0;
    for (const auto& g : a.truth) {
      gt += csv_row({g.item_id, std::string(to_string(g.label)), std::to_string(g.support)});
      driving += g.label == Label::kDriving;
    }
    emit("ground_truth.csv", gt);
    ordered_json j;
    j["items"] = a.matrix.items();
    j["raters_per_item"] = a.matrix.raters_per_item();
    j["kappa"] = a.kappa.kappa;
    j["observed_agreement"] = a.kappa.observed;
    j["expected_agreement"] = a.kappa.expected;
    j["degenerate"] = a.kappa.degenerate;
    j["driving_items"] = driving;
    emit("agreement.json", dump(j));
  }

  // ---- extent ----
  const ExtentReport& extent_report() {
    if (extent_) return *extent_;
    std::vector<std::string> ids;
    for (const auto& c : cfg_.cities) ids.push_back(c.id);
    const auto all = all_labeled();
    extent_ = extent(all, ids);
    return *extent_;
  }

  void write_extent() {
    const auto& e = extent_report();
    std::string out = "rank,city_id,driving,total,fraction_pct\n";
    for (std::size_t i = 0; i < e.cities.size(); ++i) {
      const auto& c = e.cities[i];
      out += csv_row({std::to_string(i + 1), c.city_id, std::to_string(c.driving), std::to_string(c.total),
                      format_double(100.0 * c.fraction)});
    }
    out += csv_row({"", "ALL", std::to_string(e.driving), std::to_string(e.total), format_double(100.0 * e.pooled_fraction)});
    emit("extent.csv", out);
  }

  // ---- spatial ----
  const std::vector<SpatialCity>& spatial() {
    if (!spatial_.empty()) return spatial_;
    const auto& recs = labeled();
    const auto& g = grids();
    std::vector<std::optional<SpatialCity>> out(recs.size());
    parallel_for(recs.size(), cfg_.jobs, [&](std::size_t c) {
      std::vector<GeoPoint> all;
      std::vector<GeoPoint> driving;
      for (const auto& r : recs[c]) {
        all.push_back(r.location);
        if (r.label == Label::kDriving) driving.push_back(r.location);
      }
      SpatialCity s{g[c], tile_counts(driving, g[c], cfg_.cities[c].id), tile_counts(all, g[c], cfg_.cities[c].id), {}, {}};
      try {
        s.fits = compare_fits(s.driving.positive_counts(), cfg_.cities[c].id);
      } catch (const Error& e) {
        s.error = e.what();
      }
      out[c] = std::move(s);
    });
    for (auto& s : out) spatial_.push_back(std::move(*s));
    return spatial_;
  }

  void write_spatial() {
    const auto& s = spatial();
    ordered_json j;
    j["cities"] = ordered_json::array();
    std::vector<FitComparison> fitted;
    for (std::size_t c = 0; c < s.size(); ++c) {
      std::ostringstream heat;
      write_heatmap_csv(heat, s[c].grid, s[c].driving.counts, s[c].total.counts);
      emit(fs::path("heatmaps") / (safe_name(cfg_.cities[c].id) + ".csv"), heat.str());
      ordered_json city;
      if (s[c].fits) {
        city = ordered_json::parse(fit_comparison_json(*s[c].fits));
        fitted.push_back(*s[c].fits);
      } else {
        city["city_id"] = cfg_.cities[c].id;
        city["error"] = s[c].error;
      }
      city["tiles_active"] = s[c].grid.active_count();
      city["out_of_grid"] = s[c].total.out_of_grid;
      j["cities"].push_back(std::move(city));
    }
    ordered_json conc = ordered_json::object();
    if (!fitted.empty()) {
      for (const auto& [f, pct] : concentration_summary(fitted)) conc[std::string(to_string(f))] = pct;
    }
    j["best_by_bic_pct"] = conc;
    emit("spatial_fits.json", dump(j));
  }

  // ---- temporal ----
  CollectionWindow series_window() {
    if (cfg_.window) return *cfg_.window;
    UtcSeconds lo = std::numeric_limits<UtcSeconds>::max();
    UtcSeconds hi = std::numeric_limits<UtcSeconds>::min();
    for (const auto& c : labeled()) {
      for (const auto& r : c) {
        lo = std::min(lo, r.ts_utc);
        hi = std::max(hi, r.ts_utc);
      }
    }
    if (lo > hi) return {0, 0};
    const UtcSeconds start = lo - ((lo % 3600) + 3600) % 3600;
    return {start, hi + 1};
  }

  const TemporalData& temporal() {
    if (temporal_) return *temporal_;
    const auto& recs = labeled();
    const auto& tz = zones();
    TemporalData t;
    t.driving.resize(recs.size());
    t.total.resize(recs.size());
    parallel_for(recs.size(), cfg_.jobs, [&](std::size_t c) {
      t.driving[c] = hourly_profile(recs[c], tz[c], ProfileClass::kDriving, cfg_.cities[c].id);
      t.total[c] = hourly_profile(recs[c], tz[c], ProfileClass::kTotal, cfg_.cities[c].id);
    });
    t.pooled_driving.city_id = t.pooled_total.city_id = "ALL";
    t.pooled_driving.cls = ProfileClass::kDriving;
    for (std::size_t c = 0; c < recs.size(); ++c) {
      t.pooled_driving += t.driving[c];
      t.pooled_total += t.total[c];
    }
    const auto window = series_window();
    const auto all = all_labeled();
    const auto ds = hourly_series(all, window, ProfileClass::kDriving);
    const auto ts = hourly_series(all, window, ProfileClass::kTotal);
    t.pearson_hours = ds.size();
    try {
      t.pearson_r = pearson(ds, ts);
    } catch (const Error& e) {
      t.pearson_error = e.what();
    }
    temporal_ = std::move(t);
    return *temporal_;
  }

  void write_temporal() {
    const auto& t = temporal();
    std::string hourly = "city_id,class";
    for (int h = 0; h < 24; ++h) hourly += ",h" + std::string(h < 10 ? "0" : "") + std::to_string(h);
    hourly += '\n';
    auto row = [&](const HourlyProfile& p) {
      hourly += detail::csv_field(p.city_id) + (p.cls == ProfileClass::kDriving ? ",driving" : ",total");
      for (auto v : p.counts) hourly += "," + std::to_string(v);
      hourly += '\n';
    };
    for (std::size_t c = 0; c < t.driving.size(); ++c) {
      row(t.driving[c]);
      row(t.total[c]);
    }
    row(t.pooled_driving);
    row(t.pooled_total);
    emit("hourly_profiles.csv", hourly);

    ordered_json j;
    j["night_window"] = {{"start_hour", cfg_.night.start_hour}, {"end_hour", cfg_.night.end_hour}};
    auto up = [&](const HourlyProfile& p) {
      const auto v = uplift_or_null(p, cfg_.night);
      return v ? ordered_json(*v) : ordered_json(nullptr);
    };
    j["night_uplift_pct"] = {{"driving", up(t.pooled_driving)}, {"total", up(t.pooled_total)}};
    j["pearson_hourly"] = {{"r", t.pearson_r ? ordered_json(*t.pearson_r) : ordered_json(nullptr)},
                           {"hours", t.pearson_hours}};
    if (!t.pearson_error.empty()) j["pearson_hourly"]["error"] = t.pearson_error;
    j["cities"] = ordered_json::array();
    for (std::size_t c = 0; c < t.driving.size(); ++c) {
      j["cities"].push_back({{"city_id", cfg_.cities[c].id},
                             {"driving", t.driving[c].total()},
                             {"total", t.total[c].total()},
                             {"night_uplift_driving_pct", up(t.driving[c])},
                             {"night_uplift_total_pct", up(t.total[c])}});
    }
    emit("temporal.json", dump(j));
  }

  // ---- cluster ----
  const ClusterData& cluster() {
    if (cluster_) return *cluster_;
    const auto& recs = labeled();
    const auto& tz = zones();
    std::vector<CityRecords> cities;
    for (std::size_t c = 0; c < recs.size(); ++c) cities.push_back({cfg_.cities[c].id, tz[c], recs[c]});
    ClusterData d;
    d.vectors = week_vectors(cities);
    const Eigen::MatrixXd m = d.vectors.matrix();
    const int rows = static_cast<int>(m.rows());
    if (cfg_.k > rows) {
      fail(ErrorCode::kInvalidK, "k = " + std::to_string(cfg_.k) + " exceeds the " + std::to_string(rows) +
                                     " cities with driving posts");
    }
    d.result = kmeans(m, cfg_.k, cfg_.seed, cfg_.restarts);
    if (d.result->silhouette) d.point_silhouette = silhouette_values(m, d.result->labels);
    d.embedding = rows >= 2 ? embed_2d(m) : Eigen::MatrixXd::Zero(rows, 2);
    std::vector<int> ks;
    for (int k = 1; k <= std::min(rows, 8); ++k) ks.push_back(k);
    d.elbow = elbow_curve(m, ks, cfg_.seed, cfg_.restarts);
    cluster_ = std::move(d);
    return *cluster_;
  }

  void write_cluster() {
    const auto& d = cluster();
    std::string wv = "city_id";
    for (int h = 0; h < kHoursPerWeek; ++h) wv += ",how" + std::to_string(h);
    wv += '\n';
    for (const auto& v : d.vectors.vectors) {
      wv += detail::csv_field(v.city_id);
      for (double x : v.values) wv += "," + format_double(x);
      wv += '\n';
    }
    emit("week_vectors.csv", wv);

    std::string cl = "city_id,label,x,y,silhouette\n";
    for (std::size_t i = 0; i < d.vectors.vectors.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      cl += csv_row({d.vectors.vectors[i].city_id, std::to_string(d.result->labels[i]), format_double(d.embedding(r, 0)),
                     format_double(d.embedding(r, 1)),
                     d.point_silhouette.empty() ? "" : format_double(d.point_silhouette[i])});
    }
    emit("clusters.csv", cl);

    std::string el = "k,inertia,silhouette\n";
    for (const auto& p : d.elbow) {
      el += csv_row({std::to_string(p.k), format_double(p.inertia), p.silhouette ? format_double(*p.silhouette) : ""});
    }
    emit("elbow.csv", el);

    ordered_json j;
    j["k"] = d.result->k;
    j["seed"] = d.result->seed;
    j["restarts"] = cfg_.restarts;
    j["inertia"] = d.result->inertia;
    j["silhouette"] = d.result->silhouette ? ordered_json(*d.result->silhouette) : ordered_json(nullptr);
    j["iterations"] = d.result->iterations;
    j["dropped_cities"] = d.vectors.dropped;
    emit("clusters.json", dump(j));
  }

  // ---- regress ----
  const RegressData& regress() {
    if (regress_) return *regress_;
    std::vector<CityStats> stats;
    std::string source;
    if (!cfg_.inputs.city_stats.empty()) {
      auto in = open_input(cfg_.inputs.city_stats, "city stats");
      stats = read_city_stats_csv(in);
      source = "city stats file";
    } else {
      const auto& e = extent_report();
      std::map<std::string, const CityExtent*> by_id;
      for (const auto& c : e.cities) by_id[c.city_id] = &c;
      for (const auto& c : cfg_.cities) {
        CityStats s = c.census.value_or(CityStats{});
        s.city_id = c.id;
        s.total_snaps = static_cast<double>(by_id.at(c.id)->total);
        s.driving_snaps = static_cast<double>(by_id.at(c.id)->driving);
        stats.push_back(std::move(s));
      }
      source = "configured census with corpus counts";
    }
    RegressData r;
    r.source = source;
    r.design = build_design(stats);
    r.fit = ols_fit(r.design.x, r.design.y, r.design.columns);
    std::vector<double> developing;
    std::vector<double> developed;
    const Eigen::Index dev_col = 5;
    for (Eigen::Index i = 0; i < r.design.x.rows(); ++i) {
      (r.design.x(i, dev_col) > 0.5 ? developing : developed).push_back(r.design.y(i));
    }
    try {
      r.welch = welch_t(developing, developed);
    } catch (const Error& e) {
      r.welch_error = e.what();
    }
    regress_ = std::move(r);
    return *regress_;
  }

  void write_regress() {
    const auto& r = regress();
    ordered_json j = ordered_json::parse(regression_json(r.fit, r.design.excluded));
    j["source"] = r.source;
    if (r.welch) {
      j["welch_developing_vs_developed"] = {{"t", num(r.welch->t)}, {"df", num(r.welch->df)}, {"p", num(r.welch->p)}};
    } else {
      j["welch_developing_vs_developed"] = {{"error", r.welch_error}};
    }
    emit("regression.json", dump(j));
    std::string t = "term,estimate,std_error,t,p,stars,lr_chisq,lr_p\n";
    for (std::size_t i = 0; i < r.fit.terms.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      auto cell = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
      t += csv_row({r.fit.terms[i], cell(r.fit.coefficients(k)), cell(r.fit.std_errors(k)), cell(r.fit.t_values(k)),
                    cell(r.fit.p_values(k)), significance_stars(r.fit.p_values(k)), cell(r.fit.lr_chisq(k)),
                    cell(r.fit.lr_p(k))});
    }
    emit("regression.csv", t);
  }

  // ---- synth ----
  void write_synth();

  // ---- report ----
  void write_report();

  const PipelineConfig& cfg_;
  std::vector<fs::path> written_;
  std::vector<TimeZone> zones_;
  std::vector<TileGrid> grids_;
  std::optional<IngestData> ingest_;
  std::optional<ClassifyData> classify_;
  std::optional<std::vector<std::vector<SnapRecord>>> labeled_;
  std::optional<AnnotateData> annotate_;
  std::optional<ExtentReport> extent_;
  std::vector<SpatialCity> spatial_;
  std::optional<TemporalData> temporal_;
  std::optional<ClusterData> cluster_;
  std::optional<RegressData> regress_;
};

ordered_json region_json(const Region& region) {
  if (region.kind() == Region::Kind::kBBox) {
    const auto& b = region.bbox();
    return {{"bbox", {b.south, b.west, b.north, b.east}}};
  }
  ordered_json ring = ordered_json::array();
  for (const auto& p : region.ring()) ring.push_back({p.lon, p.lat});
  return {{"polygon", ring}};
}

ordered_json census_json(const CityStats& s) {
  ordered_json j;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("population", s.population);
  put("male_pct", s.male_pct);
  put("age_lt20_pct", s.age_lt20_pct);
  put("age_20_40_pct", s.age_20_40_pct);
  put("age_40_60_pct", s.age_40_60_pct);
  if (s.developing) j["developing"] = *s.developing;
  return j;
}

void Run::write_synth() {
  const SynthSettings& st = cfg_.synth;
  SynthSpec spec = SynthSpec::default_suite(cfg_.seed, st.n_cities, st.records_per_city);
  if (cfg_.window) spec.window = *cfg_.window;
  spec.annotation_flip_prob = st.annotation_flip_prob;
  spec.annotated_items = st.annotated_items;
  spec.regression.n_cities = st.regression_cities;
  spec.regression.sigma = st.regression_sigma;
  for (auto& c : spec.cities) {
    c.tile_size_m = cfg_.tile_size_m;
    c.spatial = st.spatial;
    c.alpha = st.alpha;
    c.night_uplift_pct = st.night_uplift_pct;
    c.driving_fraction = st.driving_fraction;
    c.frame_noise = st.frame_noise;
    c.deletion_rate = st.deletion_rate;
  }
  spec.validate();

  std::vector<std::optional<CityCorpus>> corpora(spec.cities.size());
  parallel_for(spec.cities.size(), cfg_.jobs, [&](std::size_t i) { corpora[i] = gen_city(spec, i); });

  std::ostringstream snaps;
  std::string deleted = "# ids of posts deleted before the final crawl\n";
  std::string truth = "id,label\n";
  std::vector<std::string> pool_ids;
  std::vector<Label> pool_truth;
  ordered_json cities_manifest = ordered_json::array();
  ordered_json cities_config = ordered_json::array();
  std::size_t all_records = 0;
  std::size_t all_driving = 0;
  std::size_t active_records = 0;
  std::size_t active_driving = 0;
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    CityCorpus& c = *corpora[i];
    const CitySynthSpec& cs = spec.cities[i];
    std::size_t city_deleted = 0;
    std::size_t city_active_driving = 0;
    for (std::size_t r = 0; r < c.records.size(); ++r) {
      SnapRecord& rec = c.records[r];
      truth += csv_row({rec.id, std::string(to_string(c.truths[r]))});
      if (rec.deleted) {
        deleted += rec.id + "\n";
        ++city_deleted;
        rec.deleted = false;
      } else {
        pool_ids.push_back(rec.id);
        pool_truth.push_back(c.truths[r]);
        city_active_driving += c.truths[r] == Label::kDriving;
      }
    }
    write_snaps(snaps, c.records, RecordFormat::kJsonl);
    const std::size_t active = c.records.size() - city_deleted;
    all_records += c.records.size();
    all_driving += c.planted_driving;
    active_records += active;
    active_driving += city_active_driving;
    cities_manifest.push_back({{"city_id", c.city_id},
                               {"tz_id", c.tz_id},
                               {"region_kind", c.region.kind() == Region::Kind::kBBox ? "bbox" : "polygon"},
                               {"records", c.records.size()},
                               {"deleted", city_deleted},
                               {"planted_driving_fraction", cs.driving_fraction},
                               {"driving", c.planted_driving},
                               {"active_driving_fraction",
                                active ? static_cast<double>(city_active_driving) / static_cast<double>(active) : 0.0},
                               {"spatial", cs.spatial == SpatialModel::kPowerLaw ? "power_law" : "uniform"},
                               {"alpha", cs.alpha},
                               {"night_uplift_pct", cs.night_uplift_pct},
                               {"profile_group", cs.profile_group},
                               {"tiles_active", c.tile_weights.size()}});
    ordered_json city_cfg;
    city_cfg["id"] = c.city_id;
    city_cfg["tz_id"] = c.tz_id;
    city_cfg["region"] = region_json(c.region);
    city_cfg["census"] = census_json(cs.census);
    cities_config.push_back(std::move(city_cfg));
  }
  emit("snaps.jsonl", snaps.str());
  emit("deleted_ids.txt", deleted);
  emit("truth.csv", truth);

  // Annotate a random subset of the surviving posts, listed in corpus order.
  const std::size_t n_items = std::min(spec.annotated_items, pool_ids.size());
  std::vector<std::size_t> pick(pool_ids.size());
  std::iota(pick.begin(), pick.end(), 0);
  Rng pick_rng(derive_seed(cfg_.seed, kAnnotationPickStream));
  std::shuffle(pick.begin(), pick.end(), pick_rng);
  pick.resize(n_items);
  std::sort(pick.begin(), pick.end());
  std::vector<std::string> item_ids;
  std::vector<Label> item_truth;
  for (std::size_t p : pick) {
    item_ids.push_back(pool_ids[p]);
    item_truth.push_back(pool_truth[p]);
  }
  if (!item_ids.empty()) {
    const auto sample =
        gen_annotations(item_truth, item_ids, 3, spec.annotation_flip_prob, derive_seed(cfg_.seed, kAnnotationStream));
    std::ostringstream ann;
    write_ratings_csv(ann, sample.ratings);
    emit("annotations.csv", ann.str());
  }

  const auto reg = gen_regression_cities(spec.regression, derive_seed(cfg_.seed, kRegressionStream));
  std::ostringstream stats;
  write_city_stats_csv(stats, reg);
  emit("city_stats.csv", stats.str());

  ordered_json config;
  config["seed"] = cfg_.seed;
  config["tile_size_m"] = cfg_.tile_size_m;
  config["voting"] = {{"rule", cfg_.rule.name().rfind("threshold", 0) == 0 ? "threshold" : cfg_.rule.name()},
                      {"threshold", cfg_.rule.threshold_pct()}};
  config["frame_cutoff"] = cfg_.frame_cutoff;
  config["night_window"] = {{"start_hour", cfg_.night.start_hour}, {"end_hour", cfg_.night.end_hour}};
  config["k"] = cfg_.k;
  config["window"] = {{"start", format_rfc3339(spec.window.start_utc)}, {"end", format_rfc3339(spec.window.end_utc)}};
  ordered_json inputs = {{"snaps", "snaps.jsonl"}, {"format", "jsonl"}, {"deleted_ids", "deleted_ids.txt"}};
  if (!item_ids.empty()) inputs["annotations"] = "annotations.csv";
  inputs["truth"] = "truth.csv";
  inputs["city_stats"] = "city_stats.csv";
  config["inputs"] = inputs;
  config["out_dir"] = "results";
  config["cities"] = cities_config;
  emit("config.json", dump(config));

  const double p = spec.annotation_flip_prob;
  ordered_json m;
  m["seed"] = cfg_.seed;
  m["window"] = config["window"];
  m["records"] = all_records;
  m["driving"] = all_driving;
  m["planted_driving_fraction"] = st.driving_fraction;
  m["empirical_driving_fraction"] = all_records ? static_cast<double>(all_driving) / static_cast<double>(all_records) : 0.0;
  m["active_driving_fraction"] =
      active_records ? static_cast<double>(active_driving) / static_cast<double>(active_records) : 0.0;
  m["night_uplift_pct"] = st.night_uplift_pct;
  m["spatial"] = st.spatial == SpatialModel::kPowerLaw ? "power_law" : "uniform";
  m["alpha"] = st.alpha;
  m["frame_noise"] = st.frame_noise;
  m["deletion_rate"] = st.deletion_rate;
  m["annotation"] = {{"items", n_items},
                     {"raters", 3},
                     {"flip_prob", p},
                     {"expected_adjudication_error", 3 * p * p * (1 - p) + p * p * p}};
  m["regression"] = {{"cities", spec.regression.n_cities},
                     {"sigma", spec.regression.sigma},
                     {"columns", design_columns()},
                     {"beta", spec.regression.beta}};
  m["cities"] = cities_manifest;
  emit("manifest.json", dump(m));
}

void Run::write_report() {
  write_grid();
  write_ingest();
  const bool have_annotations = !cfg_.inputs.annotations.empty();
  if (have_annotations) write_annotate();
  write_classify();
  write_extent();
  write_spatial();
  write_temporal();
  write_cluster();
  const bool can_regress = !cfg_.inputs.city_stats.empty() ||
                           std::any_of(cfg_.cities.begin(), cfg_.cities.end(), [](const auto& c) { return c.census; });
  if (can_regress) write_regress();

  std::ostringstream md;
  md << "# Distracted-driving post analysis\n\n";
  md << "Voting rule: " << cfg_.rule.name() << ", frame cutoff " << format_fixed(cfg_.frame_cutoff, 2) << ", tile size "
     << format_fixed(cfg_.tile_size_m, 0) << " m, seed " << cfg_.seed << ".\n\n";

  const auto& ing = ingest();
  md << "## Corpus\n\n";
  md << "| parsed | failed lines | deleted | deletion rate (%) | unknown city | outside window |\n";
  md << "|---:|---:|---:|---:|---:|---:|\n";
  md << "| " << ing.parsed << " | " << ing.failures.size() << " | " << ing.deletion.deleted << " | "
     << format_fixed(ing.deletion.rate_pct, 2) << " | " << ing.unknown_city << " | " << ing.out_of_window << " |\n\n";

  const auto& e = extent_report();
  md << "## Extent by city\n\n| rank | city | driving | total | driving (%) |\n|---:|---|---:|---:|---:|\n";
  for (std::size_t i = 0; i < e.cities.size(); ++i) {
    const auto& c = e.cities[i];
    md << "| " << i + 1 << " | " << c.city_id << " | " << c.driving << " | " << c.total << " | "
       << format_fixed(100.0 * c.fraction, 2) << " |\n";
  }
  md << "| | **all** | " << e.driving << " | " << e.total << " | " << format_fixed(100.0 * e.pooled_fraction, 2)
     << " |\n\n";
  md << "Pooled driving fraction: " << format_fixed(e.pooled_fraction, 4) << "\n\n";

  if (have_annotations) {
    const auto& a = annotate();
    md << "## Annotation\n\n" << a.matrix.items() << " items, " << a.matrix.raters_per_item()
       << " raters each. Fleiss kappa " << format_fixed(a.kappa.kappa, 4) << ".\n\n";
  }
  if (const auto ev = evaluation()) {
    md << "## Classification (" << ev->reference << ")\n\n";
    md << "| items | accuracy | precision | recall | F1 |\n|---:|---:|---:|---:|---:|\n";
    md << "| " << ev->report.confusion.total() << " | " << format_fixed(ev->report.accuracy, 4) << " | "
       << format_fixed(ev->report.precision, 4) << " | " << format_fixed(ev->report.recall, 4) << " | "
       << format_fixed(ev->report.f1, 4) << " |\n\n";
    if (!ev->sweep.empty()) {
      md << "| rule | precision | recall |\n|---|---:|---:|\n";
      for (const auto& p : ev->sweep) {
        md << "| " << p.rule << " | " << format_fixed(p.precision, 4) << " | " << format_fixed(p.recall, 4) << " |\n";
      }
      md << "\n";
    }
  }

  const auto& sp = spatial();
  md << "## Spatial concentration\n\nTile counts of driving posts; heatmaps in `heatmaps/`.\n\n";
  md << "| city | tiles | best (BIC) | best (log-lik) | alpha | power-law BIC | log-normal BIC |\n";
  md << "|---|---:|---|---|---:|---:|---:|\n";
  std::size_t power_law_wins = 0;
  std::size_t fitted = 0;
  for (std::size_t c = 0; c < sp.size(); ++c) {
    md << "| " << cfg_.cities[c].id << " | " << sp[c].grid.active_count() << " | ";
    if (!sp[c].fits) {
      md << "n/a | n/a | | | |\n";
      continue;
    }
    const auto& f = *sp[c].fits;
    ++fitted;
    power_law_wins += f.best_by_bic == Family::kPowerLaw;
    const auto* pl = f.find(Family::kPowerLaw);
    const auto* ln = f.find(Family::kLogNormal);
    md << to_string(f.best_by_bic) << " | " << to_string(f.best_by_loglik) << " | "
       << (pl ? format_fixed(pl->param("alpha"), 3) : "") << " | " << (pl ? format_fixed(pl->bic, 2) : "") << " | "
       << (ln ? format_fixed(ln->bic, 2) : "") << " |\n";
  }
  md << "\nPower law best by BIC in " << power_law_wins << " of " << fitted << " cities.\n\n";

  const auto& t = temporal();
  md << "## Temporal patterns\n\n";
  md << "Night window " << std::setfill('0') << std::setw(2) << cfg_.night.start_hour << ":00-" << std::setw(2) << cfg_.night.end_hour << ":59 local.\n\n" << std::setfill(' ');
  md << "| city | driving | night uplift, driving (%) | night uplift, all (%) |\n|---|---:|---:|---:|\n";
  for (std::size_t c = 0; c < t.driving.size(); ++c) {
    md << "| " << cfg_.cities[c].id << " | " << t.driving[c].total() << " | "
       << opt_fixed(uplift_or_null(t.driving[c], cfg_.night), 2) << " | "
       << opt_fixed(uplift_or_null(t.total[c], cfg_.night), 2) << " |\n";
  }
  md << "| **all** | " << t.pooled_driving.total() << " | " << opt_fixed(uplift_or_null(t.pooled_driving, cfg_.night), 2)
     << " | " << opt_fixed(uplift_or_null(t.pooled_total, cfg_.night), 2) << " |\n\n";
  md << "Pearson r between hourly driving and total counts over " << t.pearson_hours
     << " hours: " << opt_fixed(t.pearson_r, 4) << "\n\n";

  const auto& cl = cluster();
  md << "## Weekly clusters\n\nk = " << cl.result->k << ", silhouette " << opt_fixed(cl.result->silhouette, 4)
     << ", inertia " << format_fixed(cl.result->inertia, 6) << ".\n\n";
  md << "| cluster | cities |\n|---:|---|\n";
  for (int k = 0; k < cl.result->k; ++k) {
    std::string members;
    for (std::size_t i = 0; i < cl.vectors.vectors.size(); ++i) {
      if (cl.result->labels[i] != k) continue;
      if (!members.empty()) members += ", ";
      members += cl.vectors.vectors[i].city_id;
    }
    md << "| " << k << " | " << members << " |\n";
  }
  md << "\n| k | inertia | silhouette |\n|---:|---:|---:|\n";
  for (const auto& p : cl.elbow) {
    md << "| " << p.k << " | " << format_fixed(p.inertia, 6) << " | " << opt_fixed(p.silhouette, 4) << " |\n";
  }
  md << "\n";

  if (can_regress) {
    const auto& r = regress();
    md << "## Regression of log(DS+1)\n\n" << r.fit.n << " cities (" << r.source << "), R^2 "
       << format_fixed(r.fit.r_squared, 4) << ".\n\n";
    md << "| term | estimate | std. error | LR chisq | p |\n|---|---:|---:|---:|---:|\n";
    for (std::size_t i = 0; i < r.fit.terms.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const bool lr = std::isfinite(r.fit.lr_chisq(k));
      md << "| " << r.fit.terms[i] << " | " << format_fixed(r.fit.coefficients(k), 4) << " "
         << significance_stars(r.fit.p_values(k)) << " | " << format_fixed(r.fit.std_errors(k), 4) << " | "
         << (lr ? format_fixed(r.fit.lr_chisq(k), 3) : "") << " | "
         << (lr ? format_fixed(r.fit.lr_p(k), 4) : format_fixed(r.fit.p_values(k), 4)) << " |\n";
    }
    md << "\nSignificance: *** p<0.001, ** p<0.01, . p<0.1.\n";
    if (!r.design.excluded.empty()) md << "\nExcluded " << r.design.excluded.size() << " cities with missing census data.\n";
    md << "\n";
  }
  emit("report.md", md.str());
}

}  // namespace

PipelineConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    config_error(std::string("invalid JSON: ") + e.what());
  }
  check_keys(doc,
             {"seed", "jobs", "tile_size_m", "voting", "frame_cutoff", "night_window", "k", "restarts", "window",
              "inputs", "out_dir", "cities", "synth"},
             "config");
  PipelineConfig cfg;
  cfg.base_dir = base_dir;
  cfg.out_dir = resolve(base_dir, "results");
  if (doc.contains("seed")) {
    const long long s = integer(doc["seed"], "seed");
    if (s < 0) config_error("seed must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (doc.contains("jobs")) cfg.jobs = static_cast<int>(count(doc["jobs"], "jobs"));
  if (doc.contains("tile_size_m")) {
    cfg.tile_size_m = number(doc["tile_size_m"], "tile_size_m");
    if (cfg.tile_size_m <= 0) config_error("tile_size_m must be positive");
  }
  if (doc.contains("voting")) {
    const json& v = doc["voting"];
    check_keys(v, {"rule", "threshold"}, "voting");
    const std::string rule = v.contains("rule") ? text(v["rule"], "voting.rule") : "majority";
    const int pct = v.contains("threshold") ? static_cast<int>(integer(v["threshold"], "voting.threshold")) : 50;
    try {
      cfg.rule = VotingRule::parse(rule, pct);
    } catch (const Error& e) {
      config_error(e.what());
    }
  }
  if (doc.contains("frame_cutoff")) {
    cfg.frame_cutoff = number(doc["frame_cutoff"], "frame_cutoff");
    if (cfg.frame_cutoff < 0 || cfg.frame_cutoff > 1) config_error("frame_cutoff must lie in [0, 1]");
  }
  if (doc.contains("night_window")) {
    const json& v = doc["night_window"];
    check_keys(v, {"start_hour", "end_hour"}, "night_window");
    if (v.contains("start_hour")) cfg.night.start_hour = static_cast<int>(integer(v["start_hour"], "night_window.start_hour"));
    if (v.contains("end_hour")) cfg.night.end_hour = static_cast<int>(integer(v["end_hour"], "night_window.end_hour"));
    auto hour_ok = [](int h) { return h >= 0 && h < 24; };
    if (!hour_ok(cfg.night.start_hour) || !hour_ok(cfg.night.end_hour)) config_error("night_window hours must be 0-23");
  }
  if (doc.contains("k")) cfg.k = static_cast<int>(count(doc["k"], "k"));
  if (doc.contains("restarts")) cfg.restarts = static_cast<int>(count(doc["restarts"], "restarts"));
  if (doc.contains("window")) {
    const json& v = doc["window"];
    check_keys(v, {"start", "end"}, "window");
    if (!v.contains("start") || !v.contains("end")) config_error("window needs start and end");
    CollectionWindow w{timestamp(v["start"], "window.start"), timestamp(v["end"], "window.end")};
    if (!(w.start_utc < w.end_utc)) config_error("window start must precede end");
    cfg.window = w;
  }
  if (doc.contains("inputs")) {
    const json& v = doc["inputs"];
    check_keys(v, {"snaps", "format", "deleted_ids", "annotations", "truth", "city_stats", "frame_scores"}, "inputs");
    auto path = [&](const char* key, fs::path& out) {
      if (v.contains(key)) out = resolve(base_dir, text(v[key], std::string("inputs.") + key));
    };
    path("snaps", cfg.inputs.snaps);
    path("deleted_ids", cfg.inputs.deleted_ids);
    path("annotations", cfg.inputs.annotations);
    path("truth", cfg.inputs.truth);
    path("city_stats", cfg.inputs.city_stats);
    path("frame_scores", cfg.inputs.frame_scores);
    if (v.contains("format")) {
      const std::string f = text(v["format"], "inputs.format");
      if (f == "jsonl") {
        cfg.inputs.snaps_format = RecordFormat::kJsonl;
      } else if (f == "csv") {
        cfg.inputs.snaps_format = RecordFormat::kCsv;
      } else {
        config_error("inputs.format must be jsonl or csv");
      }
    }
  }
  if (doc.contains("out_dir")) cfg.out_dir = resolve(base_dir, text(doc["out_dir"], "out_dir"));
  if (doc.contains("cities")) {
    const json& cities = doc["cities"];
    if (!cities.is_array()) config_error("cities must be an array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < cities.size(); ++i) {
      const std::string where = "cities[" + std::to_string(i) + "]";
      const json& c = cities[i];
      check_keys(c, {"id", "tz_id", "region", "census"}, where);
      if (!c.contains("id") || !c.contains("tz_id") || !c.contains("region")) {
        config_error(where + " needs id, tz_id and region");
      }
      const std::string id = text(c["id"], where + ".id");
      if (id.empty() || !seen.insert(id).second) config_error(where + ".id must be unique and non-empty");
      const std::string tz = text(c["tz_id"], where + ".tz_id");
      TimeZone::load(tz);
      CityConfig city{id, tz, parse_region(c["region"], where + ".region"), std::nullopt};
      if (c.contains("census") && !c["census"].is_null()) city.census = parse_census(c["census"], id, base_dir, where + ".census");
      cfg.cities.push_back(std::move(city));
    }
  }
  if (doc.contains("synth")) parse_synth(doc["synth"], cfg.synth);
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) fail(ErrorCode::kIo, "config file not found: " + path.string());
  const fs::path base = fs::absolute(path, ec).parent_path();
  return parse_config(detail::read_file(path), base);
}

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = {"grid",     "ingest",  "annotate", "classify", "extent", "spatial",
                                                 "temporal", "cluster", "regress",  "synth",    "report"};
  return names;
}

std::vector<fs::path> run_subcommand(const std::string& name, const PipelineConfig& cfg) {
  const auto& names = subcommand_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    fail(ErrorCode::kUsage, "unknown subcommand '" + name + "'");
  }
  Run run(cfg);
  return run.execute(name);
}

}  // namespace snapdrive
