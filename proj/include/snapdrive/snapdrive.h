#ifndef SNAPDRIVE_H
#define SNAPDRIVE_H

/* C interface to the snapdrive analysis library. Every call returns an
 * sd_status; on failure sd_last_error() holds a one-line message for the
 * calling thread. Matrices are row-major. */

#include <stddef.h>
#include <stdint.h>

#if defined(SNAPDRIVE_BUILDING_LIBRARY)
#define SD_API __attribute__((visibility("default")))
#else
#define SD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sd_status {
  SD_OK = 0,
  SD_ERR_INVALID_ARGUMENT = 1,
  SD_ERR_INVALID_REGION = 2,
  SD_ERR_INVALID_POLYGON = 3,
  SD_ERR_IO = 4,
  SD_ERR_CORRUPT_INPUT = 5,
  SD_ERR_CONFIG = 6,
  SD_ERR_UNSUPPORTED_CATEGORIES = 7,
  SD_ERR_HETEROGENEOUS_RATERS = 8,
  SD_ERR_INVALID_DURATION = 9,
  SD_ERR_EMPTY_INPUT = 10,
  SD_ERR_SHAPE = 11,
  SD_ERR_MISSING_CITY = 12,
  SD_ERR_DEGENERATE_SAMPLE = 13,
  SD_ERR_INSUFFICIENT_FITS = 14,
  SD_ERR_UNDEFINED = 15,
  SD_ERR_INVALID_K = 16,
  SD_ERR_COLLINEARITY = 17,
  SD_ERR_UNDERDETERMINED = 18,
  SD_ERR_INVALID_NESTING = 19,
  SD_ERR_INVALID_GROUP = 20,
  SD_ERR_USAGE = 21,
  SD_ERR_INTERNAL = 22
} sd_status;

SD_API const char* sd_version(void);
SD_API const char* sd_status_name(sd_status status);
/* Message of the last failed call on this thread; "" after a success. */
SD_API const char* sd_last_error(void);

/* ---- pipeline ---- */

typedef struct sd_pipeline sd_pipeline;

SD_API sd_status sd_pipeline_open(const char* config_path, sd_pipeline** out);
SD_API void sd_pipeline_close(sd_pipeline* p);
SD_API sd_status sd_pipeline_set_seed(sd_pipeline* p, uint64_t seed);
SD_API sd_status sd_pipeline_set_jobs(sd_pipeline* p, int jobs);
/* rule: "single", "majority" or "threshold"; threshold in {10,30,50,70,90}. */
SD_API sd_status sd_pipeline_set_rule(sd_pipeline* p, const char* rule, int threshold);
SD_API sd_status sd_pipeline_set_k(sd_pipeline* p, int k);
/* Relative paths resolve against the current directory. */
SD_API sd_status sd_pipeline_set_out_dir(sd_pipeline* p, const char* dir);
SD_API sd_status sd_pipeline_run(sd_pipeline* p, const char* subcommand, size_t* files_written);
/* Path of the i-th file written by the last run, or NULL. Valid until the next run or close. */
SD_API const char* sd_pipeline_output(const sd_pipeline* p, size_t i);

SD_API size_t sd_subcommand_count(void);
SD_API const char* sd_subcommand_name(size_t i);

/* ---- grid ---- */

typedef struct sd_grid sd_grid;

SD_API sd_status sd_grid_from_bbox(double south, double west, double north, double east, double tile_size_m,
                                   sd_grid** out);
/* lonlat holds n_vertices (lon, lat) pairs. */
SD_API sd_status sd_grid_from_polygon(const double* lonlat, size_t n_vertices, double tile_size_m, sd_grid** out);
SD_API void sd_grid_free(sd_grid* g);
SD_API sd_status sd_grid_shape(const sd_grid* g, int* rows, int* cols, size_t* active_tiles);
/* *found is 0 when the point is outside the grid or on an inactive tile. */
SD_API sd_status sd_grid_locate(const sd_grid* g, double lat, double lon, int* row, int* col, int* found);

/* ---- primitives ---- */

SD_API sd_status sd_fleiss_kappa(const int* counts, size_t items, size_t categories, double* kappa);
/* frame_labels: 1 driving, 0 not. *label receives 1 or 0. */
SD_API sd_status sd_aggregate_votes(const int* frame_labels, size_t n, const char* rule, int threshold, int* label);
/* family: "power_law", "normal", "log_normal" or "exponential". params needs room for 2 values. */
SD_API sd_status sd_fit_mle(const double* x, size_t n, const char* family, double* params, size_t* n_params,
                            double* loglik, double* bic);
/* *family points at a static string. */
SD_API sd_status sd_best_by_bic(const double* x, size_t n, const char** family);
SD_API sd_status sd_pearson(const double* x, const double* y, size_t n, double* r);
SD_API sd_status sd_night_uplift(const int64_t* counts24, int start_hour, int end_hour, double* pct);
SD_API sd_status sd_welch_t(const double* a, size_t na, const double* b, size_t nb, double* t, double* df, double* p);
/* labels needs rows entries; silhouette may be NULL. */
SD_API sd_status sd_kmeans(const double* data, size_t rows, size_t cols, int k, uint64_t seed, int restarts,
                           int* labels, double* inertia, double* silhouette);
SD_API sd_status sd_silhouette(const double* data, size_t rows, size_t cols, const int* labels, double* score);
/* coef and se need cols entries; r_squared may be NULL. */
SD_API sd_status sd_ols(const double* x, size_t rows, size_t cols, const double* y, double* coef, double* se,
                        double* r_squared);

#ifdef __cplusplus
}
#endif

#endif /* SNAPDRIVE_H */
