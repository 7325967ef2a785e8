#ifndef MRCGAT_H
#define MRCGAT_H

/* Generated by cbindgen from the mrcgat-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum MrcgatStatus {
  MRCGAT_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MRCGAT_STATUS_NULL_ARGUMENT = 1,
  /**
   * Invalid configuration, sampling precondition, or argument.
   */
  MRCGAT_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Input file violates the documented schema.
   */
  MRCGAT_STATUS_SCHEMA_ERROR = 3,
  /**
   * Numerical failure (non-finite loss, covariance not SPD).
   */
  MRCGAT_STATUS_NUMERIC_ERROR = 4,
  MRCGAT_STATUS_IO_ERROR = 5,
} MrcgatStatus;

typedef struct MrcgatConfig MrcgatConfig;

typedef struct MrcgatDataset MrcgatDataset;

typedef struct MrcgatModel MrcgatModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message of the current thread; valid until the next failing
 * call on this thread. Never null.
 */
const char *mrcgat_last_error(void);

/**
 * Library version as a static string.
 */
const char *mrcgat_version(void);

/**
 * Load a dataset CSV (schema: subject_id,label,rf_*,cog_*,mri_*).
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid
 * pointer; on success `*out` owns a new dataset handle.
 */
enum MrcgatStatus mrcgat_dataset_load_csv(const char *path, struct MrcgatDataset **out);

/**
 * Generate a synthetic three-class cohort.
 *
 * # Safety
 * `out` must be a valid pointer; on success `*out` owns a new handle.
 */
enum MrcgatStatus mrcgat_dataset_synth(uint64_t seed,
                                       size_t n_per_class,
                                       size_t d_rf,
                                       size_t d_cog,
                                       size_t d_mri,
                                       double separation,
                                       struct MrcgatDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle and `path` a valid string.
 */
enum MrcgatStatus mrcgat_dataset_save_csv(const struct MrcgatDataset *dataset, const char *path);

/**
 * # Safety
 * `dataset` must be a live handle (or null, which yields 0).
 */
size_t mrcgat_dataset_num_subjects(const struct MrcgatDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle (or null, which yields 0).
 */
size_t mrcgat_dataset_num_features(const struct MrcgatDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle (or null, which yields 0).
 */
size_t mrcgat_dataset_num_classes(const struct MrcgatDataset *dataset);

/**
 * # Safety
 * `dataset` must come from this library and not already be freed.
 */
void mrcgat_dataset_free(struct MrcgatDataset *dataset);

/**
 * New configuration with the documented defaults.
 */
struct MrcgatConfig *mrcgat_config_new(void);

/**
 * Set one configuration key from its string form, e.g.
 * ("iterations", "300"), ("lambda", "auto"), ("optimizer", "sgd").
 *
 * # Safety
 * `config` must be a live handle; `key`/`value` valid strings.
 */
enum MrcgatStatus mrcgat_config_set(struct MrcgatConfig *config,
                                    const char *key,
                                    const char *value);

/**
 * # Safety
 * `config` must come from this library and not already be freed.
 */
void mrcgat_config_free(struct MrcgatConfig *config);

/**
 * Train on every labeled subject of the dataset.
 *
 * # Safety
 * `dataset`/`config` must be live handles; on success `*out` owns a new
 * model handle.
 */
enum MrcgatStatus mrcgat_train(const struct MrcgatDataset *dataset,
                               const struct MrcgatConfig *config,
                               struct MrcgatModel **out);

/**
 * # Safety
 * `model` must be a live handle and `path` a valid string.
 */
enum MrcgatStatus mrcgat_model_save(const struct MrcgatModel *model, const char *path);

/**
 * # Safety
 * `path` must be a valid string; on success `*out` owns a new handle.
 */
enum MrcgatStatus mrcgat_model_load(const char *path, struct MrcgatModel **out);

/**
 * Number of classes the model predicts (0 for null).
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t mrcgat_model_num_classes(const struct MrcgatModel *model);

/**
 * # Safety
 * `model` must come from this library and not already be freed.
 */
void mrcgat_model_free(struct MrcgatModel *model);

/**
 * Classify one query subject inductively: supports are drawn from the
 * labeled subjects of `support_pool` and the averaged class distribution
 * is written to `probabilities_out` (length = number of classes).
 *
 * # Safety
 * `features` must point to `features_len` doubles and
 * `probabilities_out` to one double per class; handles must be live.
 */
enum MrcgatStatus mrcgat_infer(const struct MrcgatModel *model,
                               const struct MrcgatDataset *support_pool,
                               const struct MrcgatConfig *config,
                               const double *features,
                               size_t features_len,
                               double *probabilities_out);

/**
 * Cross-validate with retraining per fold; the JSON report is returned
 * through `report_json_out` and must be released with
 * `mrcgat_string_free`.
 *
 * # Safety
 * `dataset`/`config` must be live handles and `report_json_out` a valid
 * pointer.
 */
enum MrcgatStatus mrcgat_cross_validate(const struct MrcgatDataset *dataset,
                                        const struct MrcgatConfig *config,
                                        char **report_json_out);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must have been returned by this library and not already be freed.
 */
void mrcgat_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MRCGAT_H */
