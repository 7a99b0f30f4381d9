/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef OPTNET_H
#define OPTNET_H

#include <stddef.h>
#include <stdint.h>

typedef enum OptnetStatus {
  OPTNET_STATUS_OK = 0,
  OPTNET_STATUS_NULL_POINTER = 1,
  OPTNET_STATUS_INVALID_ARGUMENT = 2,
  OPTNET_STATUS_DATA_ERROR = 3,
  OPTNET_STATUS_CONFIG_ERROR = 4,
  OPTNET_STATUS_RUNTIME_ERROR = 5,
  OPTNET_STATUS_PANIC = 6,
} OptnetStatus;

/**
 * A dataset, plus its ground truth when it was generated.
 */
typedef struct OptnetDataset OptnetDataset;

typedef struct OptnetLinearModel OptnetLinearModel;

typedef struct OptnetPartition OptnetPartition;

typedef struct OptnetSelection OptnetSelection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next optnet call on the same thread.
 */
const char *optnet_last_error(void);

/**
 * Generates the synthetic sparse linear benchmark.
 *
 * # Safety
 * `out` must be a valid pointer to write the handle to.
 */
enum OptnetStatus optnet_benchmark_generate(uintptr_t n_observations,
                                            uintptr_t n_features,
                                            uintptr_t n_relevant,
                                            double noise_variance_fraction,
                                            uint64_t seed,
                                            struct OptnetDataset **out);

/**
 * Loads a CSV with a header row; `target` names the dependent column.
 *
 * # Safety
 * `path` and `target` must be NUL-terminated strings; `out` must be writable.
 */
enum OptnetStatus optnet_dataset_load_csv(const char *path,
                                          const char *target,
                                          struct OptnetDataset **out);

/**
 * Builds a dataset from a row-major `rows × cols` matrix and a target of length `rows`.
 *
 * # Safety
 * `x` must hold `rows * cols` values and `y` `rows` values.
 */
enum OptnetStatus optnet_dataset_from_arrays(const double *x,
                                             const double *y,
                                             uintptr_t rows,
                                             uintptr_t cols,
                                             struct OptnetDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle; `rows` and `cols` must be writable.
 */
enum OptnetStatus optnet_dataset_shape(const struct OptnetDataset *dataset,
                                       uintptr_t *rows,
                                       uintptr_t *cols);

/**
 * Writes up to `capacity` true feature indices and stores their total count
 * in `count`. Fails for datasets without ground truth.
 *
 * # Safety
 * `indices` must hold `capacity` entries (or be null when `capacity` is 0).
 */
enum OptnetStatus optnet_dataset_true_features(const struct OptnetDataset *dataset,
                                               uintptr_t *indices,
                                               uintptr_t capacity,
                                               uintptr_t *count);

/**
 * # Safety
 * `dataset` must come from this library and not be used afterwards.
 */
void optnet_dataset_free(struct OptnetDataset *dataset);

/**
 * Splits rows into train, validation and test shares that sum to 1.
 *
 * # Safety
 * `dataset` must be a live handle; `out` must be writable.
 */
enum OptnetStatus optnet_partition(const struct OptnetDataset *dataset,
                                   double train,
                                   double validation,
                                   double test,
                                   uint64_t seed,
                                   struct OptnetPartition **out);

/**
 * # Safety
 * `partition` must come from this library and not be used afterwards.
 */
void optnet_partition_free(struct OptnetPartition *partition);

/**
 * Fits ordinary least squares with intercept on every column.
 *
 * # Safety
 * `dataset` must be a live handle; `out` must be writable.
 */
enum OptnetStatus optnet_ols_fit(const struct OptnetDataset *dataset,
                                 struct OptnetLinearModel **out);

/**
 * Copies up to `capacity` weights, stores the weight count and intercept.
 *
 * # Safety
 * `weights` must hold `capacity` entries (or be null when `capacity` is 0);
 * `count` and `intercept` must be writable.
 */
enum OptnetStatus optnet_model_coefficients(const struct OptnetLinearModel *model,
                                            double *weights,
                                            uintptr_t capacity,
                                            uintptr_t *count,
                                            double *intercept);

/**
 * Predicts `rows` outputs from a row-major matrix with the model's column count.
 *
 * # Safety
 * `x` must hold `rows * cols` values and `predictions` `rows` values.
 */
enum OptnetStatus optnet_model_predict(const struct OptnetLinearModel *model,
                                       const double *x,
                                       uintptr_t rows,
                                       uintptr_t cols,
                                       double *predictions);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void optnet_model_free(struct OptnetLinearModel *model);

/**
 * Mean absolute error of two equally long arrays.
 *
 * # Safety
 * Both arrays must hold `len` values; `out` must be writable.
 */
enum OptnetStatus optnet_mae(const double *predicted,
                             const double *actual,
                             uintptr_t len,
                             double *out);

/**
 * Runs the feature-selection network. `settings_toml` may be null for the
 * defaults; otherwise it holds the selection settings as TOML
 * (`osga`, `init_density`, `crossover`, `fitness`, `model`).
 *
 * # Safety
 * `partition` must be a live handle, `settings_toml` null or NUL-terminated,
 * and `out` writable.
 */
enum OptnetStatus optnet_feature_selection_run(const struct OptnetPartition *partition,
                                               const char *settings_toml,
                                               uint64_t seed,
                                               uintptr_t workers,
                                               struct OptnetSelection **out);

/**
 * Copies up to `capacity` selected column indices and stores the count,
 * the refitted model's test MAE and the number of evaluations.
 *
 * # Safety
 * `indices` must hold `capacity` entries (or be null when `capacity` is 0);
 * the other outputs must be writable.
 */
enum OptnetStatus optnet_selection_summary(const struct OptnetSelection *selection,
                                           uintptr_t *indices,
                                           uintptr_t capacity,
                                           uintptr_t *count,
                                           double *test_mae,
                                           uintptr_t *evaluations);

/**
 * The full result as JSON. Release the string with [`optnet_string_free`].
 *
 * # Safety
 * `selection` must be a live handle; `out` must be writable.
 */
enum OptnetStatus optnet_selection_to_json(const struct OptnetSelection *selection, char **out);

/**
 * # Safety
 * `selection` must come from this library and not be used afterwards.
 */
void optnet_selection_free(struct OptnetSelection *selection);

/**
 * # Safety
 * `s` must be a string returned by this library, or null.
 */
void optnet_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPTNET_H */
