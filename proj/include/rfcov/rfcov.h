/* C interface to the rfcov forest and uncertainty library.
 *
 * Every function that can fail returns an rfcov_status; on failure the
 * message is available from rfcov_last_error() on the same thread. Handles are
 * opaque and owned by the caller, who releases them with the matching _free
 * function. Strings returned through char** are released with
 * rfcov_string_free.
 */
#ifndef RFCOV_H
#define RFCOV_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RFCOV_API __declspec(dllexport)
#else
#define RFCOV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rfcov_status {
  RFCOV_OK = 0,
  RFCOV_ERR_ARGUMENT = 1,
  RFCOV_ERR_CONFIG = 2,
  RFCOV_ERR_DATA = 3,
  RFCOV_ERR_IO = 5,
  RFCOV_ERR_INTERNAL = 6
} rfcov_status;

typedef struct rfcov_dataset rfcov_dataset;
typedef struct rfcov_forest rfcov_forest;
typedef struct rfcov_report rfcov_report;
typedef struct rfcov_experiment rfcov_experiment;

/* One interval entry of an uncertainty report. */
typedef struct rfcov_interval {
  double estimate;
  double lower;
  double upper;
  double lower_clamped;
  double upper_clamped;
  double var_outcome;
  double var_mc;
  double var_floor;
  double floor_raw;
  double var_total;
  double z;
  double alpha;
} rfcov_interval;

RFCOV_API const char* rfcov_version(void);
/* Message of the last failed call on this thread, or "" */
RFCOV_API const char* rfcov_last_error(void);
RFCOV_API void rfcov_string_free(char* s);

/* ---- datasets ---- */

/* x is row-major n x p; y may be NULL. */
RFCOV_API rfcov_status rfcov_dataset_create(size_t n, size_t p, const double* x, const double* y,
                                            rfcov_dataset** out);
/* CSV with header x1..xp and optional y. require_y != 0 makes y mandatory. */
RFCOV_API rfcov_status rfcov_dataset_read_csv(const char* path, int require_y,
                                              rfcov_dataset** out);
/* metadata_json: flat JSON object written as "# key: value" lines, or NULL. */
RFCOV_API rfcov_status rfcov_dataset_write_csv(const rfcov_dataset* data, const char* path,
                                               const char* metadata_json);
RFCOV_API size_t rfcov_dataset_rows(const rfcov_dataset* data);
RFCOV_API size_t rfcov_dataset_cols(const rfcov_dataset* data);
RFCOV_API int rfcov_dataset_has_y(const rfcov_dataset* data);
/* Copies out covariates (row-major) and, when present, y. Either may be NULL. */
RFCOV_API rfcov_status rfcov_dataset_copy(const rfcov_dataset* data, double* x, double* y);
RFCOV_API void rfcov_dataset_free(rfcov_dataset* data);

/* Simulated design with outcomes drawn from the generating law, plus n_test
 * jittered test points whose y column holds the true conditional mean
 * (continuous) or probability (binary). kind is "continuous" or "binary". */
RFCOV_API rfcov_status rfcov_dgm_generate(size_t n, size_t p, const char* kind, uint64_t seed,
                                          size_t n_test, double jitter_sd, rfcov_dataset** train,
                                          rfcov_dataset** test);

/* ---- forests ---- */

/* config_json holds forest config keys (num_trees, candidates, sampling,
 * sample_fraction, min_leaf, max_depth, seed); missing keys take defaults. */
RFCOV_API rfcov_status rfcov_forest_fit(const rfcov_dataset* train, const char* kind,
                                        const char* config_json, size_t threads,
                                        rfcov_forest** out);
RFCOV_API rfcov_status rfcov_forest_save(const rfcov_forest* forest, const char* path);
RFCOV_API rfcov_status rfcov_forest_load(const char* path, rfcov_forest** out);
RFCOV_API size_t rfcov_forest_num_trees(const rfcov_forest* forest);
RFCOV_API size_t rfcov_forest_num_features(const rfcov_forest* forest);
/* "continuous" or "binary"; owned by the forest. */
RFCOV_API const char* rfcov_forest_kind(const rfcov_forest* forest);
/* Forest config as JSON. */
RFCOV_API rfcov_status rfcov_forest_config_json(const rfcov_forest* forest, char** out);
/* Per point: forest mean and tree variance (NaN when the forest has one tree). */
RFCOV_API rfcov_status rfcov_forest_predict(const rfcov_forest* forest,
                                            const rfcov_dataset* points, double* mean,
                                            double* tree_variance);
RFCOV_API void rfcov_forest_free(rfcov_forest* forest);

/* ---- uncertainty ---- */

/* Nuisance fit, covariance floor and intervals for a deployed forest.
 * kind may be NULL to accept the forest's kind; a different kind is a config
 * error. pasr_json holds pasr config keys or is NULL. */
RFCOV_API rfcov_status rfcov_uncertainty(const rfcov_forest* forest, const rfcov_dataset* train,
                                         const rfcov_dataset* points, const char* kind,
                                         const char* pasr_json, double alpha, size_t threads,
                                         rfcov_report** out);
RFCOV_API size_t rfcov_report_size(const rfcov_report* report);
/* Replicate count and trees per paired forest used for the floor. */
RFCOV_API rfcov_status rfcov_report_floor_info(const rfcov_report* report, size_t* replicates,
                                               size_t* mc_trees);
RFCOV_API rfcov_status rfcov_report_entry(const rfcov_report* report, size_t i,
                                          rfcov_interval* out);
/* Interval CSV: test_id, estimate, lo, hi, lo_clamped, hi_clamped,
 * var_outcome, var_mc, var_floor, alpha, var_total. */
RFCOV_API rfcov_status rfcov_report_write_csv(const rfcov_report* report, const char* path,
                                              const char* metadata_json);
/* Floor CSV: test_id, c_t_hat, c_t_hat_clamped, n_replicates, b_mc. */
RFCOV_API rfcov_status rfcov_report_write_floor_csv(const rfcov_report* report, const char* path,
                                                    const char* metadata_json);
RFCOV_API void rfcov_report_free(rfcov_report* report);

/* ---- experiments ---- */

/* Scenario preset as JSON ("favorable", "challenging", "stress"). */
RFCOV_API rfcov_status rfcov_scenario_preset(const char* name, const char* kind, char** out);
/* Comma-separated experiment names. */
RFCOV_API const char* rfcov_experiment_names(void);
/* scenario_json overlays a preset chosen by its "name" key (default
 * favorable). */
RFCOV_API rfcov_status rfcov_experiment_run(const char* name, const char* scenario_json,
                                            const char* metadata_json, rfcov_experiment** out);
/* Owned by the handle. */
RFCOV_API const char* rfcov_experiment_csv(const rfcov_experiment* exp);
RFCOV_API const char* rfcov_experiment_summary(const rfcov_experiment* exp);
RFCOV_API int rfcov_experiment_passed(const rfcov_experiment* exp);
RFCOV_API void rfcov_experiment_free(rfcov_experiment* exp);

#ifdef __cplusplus
}
#endif

#endif /* RFCOV_H */
