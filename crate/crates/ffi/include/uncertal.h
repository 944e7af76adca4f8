#ifndef UNCERTAL_H
#define UNCERTAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum UncertalStatus {
  UNCERTAL_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  UNCERTAL_STATUS_NULL_POINTER = 1,
  /**
   * An argument was out of range or malformed.
   */
  UNCERTAL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Dataset loading or validation failed.
   */
  UNCERTAL_STATUS_DATA = 3,
  /**
   * The numerical core failed (non-finite values, solver breakdown).
   */
  UNCERTAL_STATUS_NUMERICAL = 4,
  /**
   * A caller-provided buffer is too small; the required size was reported.
   */
  UNCERTAL_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * An internal panic was caught.
   */
  UNCERTAL_STATUS_PANIC = 6,
} UncertalStatus;

/**
 * Opaque dataset handle.
 */
typedef struct UncertalDataset UncertalDataset;

/**
 * Opaque trained-model handle.
 */
typedef struct UncertalModel UncertalModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or null if the
 * last call succeeded. The pointer stays valid until the next call into
 * this library on the same thread.
 */
const char *uncertal_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *uncertal_version(void);

/**
 * Load a dataset file. `format` is `"libsvm"`, `"csv"` or null to infer it
 * from the extension.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `format` null or NUL-terminated,
 * and `out` a valid pointer to writable storage for one handle.
 */
enum UncertalStatus uncertal_dataset_load(const char *path,
                                          const char *format,
                                          struct UncertalDataset **out);

/**
 * Build a dataset from a row-major `n x dim` feature matrix and `n`
 * labels in {-1, +1}.
 *
 * # Safety
 * `features` must point to `n * dim` doubles, `labels` to `n` ints, `name`
 * must be null or NUL-terminated, and `out` must be writable.
 */
enum UncertalStatus uncertal_dataset_from_arrays(const char *name,
                                                 const double *features,
                                                 const int32_t *labels,
                                                 size_t n,
                                                 size_t dim,
                                                 struct UncertalDataset **out);

/**
 * Number of instances, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t uncertal_dataset_len(const struct UncertalDataset *ds);

/**
 * Feature dimension, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t uncertal_dataset_dim(const struct UncertalDataset *ds);

/**
 * Release a dataset. Null is ignored.
 *
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void uncertal_dataset_free(struct UncertalDataset *ds);

/**
 * Fit the regularized logistic regression on the given rows of `ds` (all
 * rows when `rows` is null).
 *
 * # Safety
 * `ds` must be a live handle, `rows` null or pointing to `n_rows` indices,
 * and `out` writable.
 */
enum UncertalStatus uncertal_model_train(const struct UncertalDataset *ds,
                                         const size_t *rows,
                                         size_t n_rows,
                                         double lambda,
                                         struct UncertalModel **out);

/**
 * Feature dimension of a model (weights excluding the bias), or 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t uncertal_model_dim(const struct UncertalModel *model);

/**
 * Copy the `dim + 1` weights (bias last) into `out`.
 *
 * # Safety
 * `model` must be a live handle and `out` must hold `capacity` doubles.
 */
enum UncertalStatus uncertal_model_weights(const struct UncertalModel *model,
                                           double *out,
                                           size_t capacity);

/**
 * `P(+1 | x)` for a `dim`-vector `x`.
 *
 * # Safety
 * `model` must be a live handle, `x` must point to `dim` doubles and
 * `out_pos` must be writable.
 */
enum UncertalStatus uncertal_model_posterior(const struct UncertalModel *model,
                                             const double *x,
                                             size_t dim,
                                             double *out_pos);

/**
 * Release a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void uncertal_model_free(struct UncertalModel *model);

/**
 * Run one active-learning trial of `strategy` on `ds` and write the
 * learning curve (test accuracy after 0, 1, ..., budget queries).
 *
 * `budget` 0 selects the default `min(100, pool)`. On
 * [`UncertalStatus::BufferTooSmall`] `curve_len` holds the required
 * capacity.
 *
 * # Safety
 * `ds` must be a live handle, `strategy` NUL-terminated, `curve` must hold
 * `curve_capacity` doubles, and `curve_len` and `alc` must be writable.
 */
enum UncertalStatus uncertal_run_trial(const struct UncertalDataset *ds,
                                       const char *strategy,
                                       size_t trial,
                                       size_t budget,
                                       double lambda,
                                       uint64_t seed,
                                       double *curve,
                                       size_t curve_capacity,
                                       size_t *curve_len,
                                       double *alc);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNCERTAL_H */
