#include "snapdrive/snapdrive.h"

#include <filesystem>
#include <limits>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "snapdrive/aggregate.hpp"
#include "snapdrive/annotation.hpp"
#include "snapdrive/demographics.hpp"
#include "snapdrive/error.hpp"
#include "snapdrive/geo_grid.hpp"
#include "snapdrive/pipeline.hpp"
#include "snapdrive/spatial_fit.hpp"
#include "snapdrive/temporal.hpp"

struct sd_pipeline {
  snapdrive::PipelineConfig config;
  std::vector<std::string> outputs;
};

struct sd_grid {
  snapdrive::TileGrid grid;
};

namespace {

thread_local std::string g_last_error;

sd_status set_error(sd_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `fn`, translating exceptions into status codes.
template <class Fn>
sd_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SD_OK;
  } catch (const snapdrive::Error& e) {
    return set_error(static_cast<sd_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(SD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(SD_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(SD_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) snapdrive::fail(snapdrive::ErrorCode::kInvalidArgument, what);
}

Eigen::MatrixXd matrix(const double* data, std::size_t rows, std::size_t cols) {
  require(data != nullptr || rows * cols == 0, "null matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i * cols + j];
  }
  return m;
}

std::span<const double> view(const double* x, std::size_t n) {
  require(x != nullptr || n == 0, "null input array");
  return {x, n};
}

}  // namespace

extern "C" {

const char* sd_version(void) { return "0.1.0"; }

const char* sd_status_name(sd_status status) {
  if (status < SD_OK || status > SD_ERR_INTERNAL) return "unknown";
  return snapdrive::to_string(static_cast<snapdrive::ErrorCode>(status)).data();
}

const char* sd_last_error(void) { return g_last_error.c_str(); }

sd_status sd_pipeline_open(const char* config_path, sd_pipeline** out) {
  return guarded([&] {
    require(config_path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    auto p = std::make_unique<sd_pipeline>();
    p->config = snapdrive::load_config(config_path);
    *out = p.release();
  });
}

void sd_pipeline_close(sd_pipeline* p) { delete p; }

sd_status sd_pipeline_set_seed(sd_pipeline* p, uint64_t seed) {
  return guarded([&] {
    require(p != nullptr, "null pipeline");
    p->config.seed = seed;
  });
}

sd_status sd_pipeline_set_jobs(sd_pipeline* p, int jobs) {
  return guarded([&] {
    require(p != nullptr, "null pipeline");
    require(jobs >= 1, "jobs must be at least 1");
    p->config.jobs = jobs;
  });
}

sd_status sd_pipeline_set_rule(sd_pipeline* p, const char* rule, int threshold) {
  return guarded([&] {
    require(p != nullptr && rule != nullptr, "null argument");
    p->config.rule = snapdrive::VotingRule::parse(rule, threshold);
  });
}

sd_status sd_pipeline_set_k(sd_pipeline* p, int k) {
  return guarded([&] {
    require(p != nullptr, "null pipeline");
    if (k < 1) snapdrive::fail(snapdrive::ErrorCode::kInvalidK, "k must be at least 1");
    p->config.k = k;
  });
}

sd_status sd_pipeline_set_out_dir(sd_pipeline* p, const char* dir) {
  return guarded([&] {
    require(p != nullptr && dir != nullptr && *dir != '\0', "null or empty directory");
    p->config.out_dir = std::filesystem::absolute(dir).lexically_normal();
  });
}

sd_status sd_pipeline_run(sd_pipeline* p, const char* subcommand, size_t* files_written) {
  return guarded([&] {
    require(p != nullptr && subcommand != nullptr, "null argument");
    p->outputs.clear();
    for (const auto& f : snapdrive::run_subcommand(subcommand, p->config)) p->outputs.push_back(f.string());
    if (files_written) *files_written = p->outputs.size();
  });
}

const char* sd_pipeline_output(const sd_pipeline* p, size_t i) {
  if (p == nullptr || i >= p->outputs.size()) return nullptr;
  return p->outputs[i].c_str();
}

size_t sd_subcommand_count(void) { return snapdrive::subcommand_names().size(); }

const char* sd_subcommand_name(size_t i) {
  const auto& names = snapdrive::subcommand_names();
  return i < names.size() ? names[i].c_str() : nullptr;
}

sd_status sd_grid_from_bbox(double south, double west, double north, double east, double tile_size_m, sd_grid** out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    *out = nullptr;
    const auto region = snapdrive::Region::from_bbox({south, west, north, east});
    *out = new sd_grid{snapdrive::build_grid(region, tile_size_m)};
  });
}

sd_status sd_grid_from_polygon(const double* lonlat, size_t n_vertices, double tile_size_m, sd_grid** out) {
  return guarded([&] {
    require(out != nullptr && lonlat != nullptr, "null argument");
    *out = nullptr;
    std::vector<snapdrive::GeoPoint> ring;
    for (size_t i = 0; i < n_vertices; ++i) ring.push_back({lonlat[2 * i + 1], lonlat[2 * i]});
    const auto region = snapdrive::Region::from_polygon(std::move(ring));
    *out = new sd_grid{snapdrive::build_grid(region, tile_size_m)};
  });
}

void sd_grid_free(sd_grid* g) { delete g; }

sd_status sd_grid_shape(const sd_grid* g, int* rows, int* cols, size_t* active_tiles) {
  return guarded([&] {
    require(g != nullptr, "null grid");
    if (rows) *rows = g->grid.n_rows();
    if (cols) *cols = g->grid.n_cols();
    if (active_tiles) *active_tiles = g->grid.active_count();
  });
}

sd_status sd_grid_locate(const sd_grid* g, double lat, double lon, int* row, int* col, int* found) {
  return guarded([&] {
    require(g != nullptr && found != nullptr, "null argument");
    const auto t = g->grid.locate({lat, lon});
    *found = t.has_value();
    if (t) {
      if (row) *row = t->row;
      if (col) *col = t->col;
    }
  });
}

sd_status sd_fleiss_kappa(const int* counts, size_t items, size_t categories, double* kappa) {
  return guarded([&] {
    require(counts != nullptr && kappa != nullptr, "null argument");
    std::vector<std::vector<int>> rows(items, std::vector<int>(categories));
    for (size_t i = 0; i < items; ++i) {
      for (size_t j = 0; j < categories; ++j) rows[i][j] = counts[i * categories + j];
    }
    *kappa = snapdrive::fleiss_kappa(snapdrive::AnnotationMatrix(std::move(rows)));
  });
}

sd_status sd_aggregate_votes(const int* frame_labels, size_t n, const char* rule, int threshold, int* label) {
  return guarded([&] {
    require(rule != nullptr && label != nullptr && (frame_labels != nullptr || n == 0), "null argument");
    std::vector<snapdrive::Label> labels;
    for (size_t i = 0; i < n; ++i) labels.push_back(frame_labels[i] ? snapdrive::Label::kDriving : snapdrive::Label::kNonDriving);
    const auto out = snapdrive::aggregate_votes(labels, snapdrive::VotingRule::parse(rule, threshold));
    *label = out == snapdrive::Label::kDriving;
  });
}

sd_status sd_fit_mle(const double* x, size_t n, const char* family, double* params, size_t* n_params, double* loglik,
                     double* bic) {
  return guarded([&] {
    require(family != nullptr && params != nullptr, "null argument");
    const auto f = snapdrive::parse_family(family);
    require(f.has_value(), "unknown distribution family");
    const auto fit = snapdrive::fit_mle(view(x, n), *f);
    for (size_t i = 0; i < fit.params.size() && i < 2; ++i) params[i] = fit.params[i].value;
    if (n_params) *n_params = fit.params.size();
    if (loglik) *loglik = fit.log_likelihood;
    if (bic) *bic = fit.bic;
  });
}

sd_status sd_best_by_bic(const double* x, size_t n, const char** family) {
  return guarded([&] {
    require(family != nullptr, "null argument");
    *family = snapdrive::to_string(snapdrive::compare_fits(view(x, n)).best_by_bic).data();
  });
}

sd_status sd_pearson(const double* x, const double* y, size_t n, double* r) {
  return guarded([&] {
    require(r != nullptr, "null argument");
    *r = snapdrive::pearson(view(x, n), view(y, n));
  });
}

sd_status sd_night_uplift(const int64_t* counts24, int start_hour, int end_hour, double* pct) {
  return guarded([&] {
    require(counts24 != nullptr && pct != nullptr, "null argument");
    require(start_hour >= 0 && start_hour < 24 && end_hour >= 0 && end_hour < 24, "hours must be 0-23");
    snapdrive::HourlyProfile p;
    for (int h = 0; h < 24; ++h) {
      require(counts24[h] >= 0, "counts must be nonnegative");
      p.counts[static_cast<size_t>(h)] = counts24[h];
    }
    *pct = snapdrive::night_uplift(p, {start_hour, end_hour});
  });
}

sd_status sd_welch_t(const double* a, size_t na, const double* b, size_t nb, double* t, double* df, double* p) {
  return guarded([&] {
    const auto w = snapdrive::welch_t(view(a, na), view(b, nb));
    if (t) *t = w.t;
    if (df) *df = w.df;
    if (p) *p = w.p;
  });
}

sd_status sd_kmeans(const double* data, size_t rows, size_t cols, int k, uint64_t seed, int restarts, int* labels,
                    double* inertia, double* silhouette) {
  return guarded([&] {
    require(labels != nullptr, "null labels");
    require(restarts >= 1, "restarts must be at least 1");
    const auto r = snapdrive::kmeans(matrix(data, rows, cols), k, seed, restarts);
    for (size_t i = 0; i < rows; ++i) labels[i] = r.labels[i];
    if (inertia) *inertia = r.inertia;
    if (silhouette) *silhouette = r.silhouette.value_or(std::numeric_limits<double>::quiet_NaN());
  });
}

sd_status sd_silhouette(const double* data, size_t rows, size_t cols, const int* labels, double* score) {
  return guarded([&] {
    require(labels != nullptr && score != nullptr, "null argument");
    *score = snapdrive::silhouette(matrix(data, rows, cols), std::span<const int>(labels, rows));
  });
}

sd_status sd_ols(const double* x, size_t rows, size_t cols, const double* y, double* coef, double* se,
                 double* r_squared) {
  return guarded([&] {
    require(coef != nullptr && se != nullptr && y != nullptr, "null argument");
    Eigen::VectorXd yv(static_cast<Eigen::Index>(rows));
    for (size_t i = 0; i < rows; ++i) yv(static_cast<Eigen::Index>(i)) = y[i];
    const auto r = snapdrive::ols_fit(matrix(x, rows, cols), yv, {}, false);
    for (size_t j = 0; j < cols; ++j) {
      coef[j] = r.coefficients(static_cast<Eigen::Index>(j));
      se[j] = r.std_errors(static_cast<Eigen::Index>(j));
    }
    if (r_squared) *r_squared = r.r_squared;
  });
}

}  // extern "C"
