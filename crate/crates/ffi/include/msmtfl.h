#ifndef MSMTFL_H
#define MSMTFL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum MsmtflStatus {
  MSMTFL_STATUS_OK = 0,
  MSMTFL_STATUS_NULL_POINTER = 1,
  MSMTFL_STATUS_INVALID_ARGUMENT = 2,
  MSMTFL_STATUS_DIMENSION = 3,
  MSMTFL_STATUS_IO = 4,
  MSMTFL_STATUS_PARSE = 5,
  MSMTFL_STATUS_NUMERICAL = 6,
  MSMTFL_STATUS_PANIC = 7,
} MsmtflStatus;

/**
 * Opaque multi-task dataset.
 */
typedef struct MsmtflDataset MsmtflDataset;

/**
 * Opaque result of a solver run: one entry per stage (a single entry for
 * the convex baselines).
 */
typedef struct MsmtflRun MsmtflRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *msmtfl_last_error(void);

/**
 * Builds a dataset from `m` tasks. `x` holds the row-major `n_i x d`
 * design matrices of all tasks back to back and `y` the responses in the
 * same order.
 *
 * # Safety
 * `n_per_task` must point to `m` values, `x` to `d * sum(n_i)` values and
 * `y` to `sum(n_i)` values. `out` must be writable.
 */
enum MsmtflStatus msmtfl_dataset_new(size_t m,
                                     size_t d,
                                     const size_t *n_per_task,
                                     const double *x,
                                     const double *y,
                                     struct MsmtflDataset **out);

/**
 * Loads a dataset from a manifest file.
 *
 * # Safety
 * `manifest` must be a NUL-terminated string; `out` must be writable.
 */
enum MsmtflStatus msmtfl_dataset_load(const char *manifest, struct MsmtflDataset **out);

/**
 * Draws a synthetic instance with the default sparsity levels. When
 * `true_weights` is not NULL it receives the `d x m` ground truth.
 *
 * # Safety
 * `out` must be writable; `true_weights`, if not NULL, must hold `d * m`
 * values.
 */
enum MsmtflStatus msmtfl_synthetic_generate(size_t m,
                                            size_t n,
                                            size_t d,
                                            double sigma,
                                            uint64_t seed,
                                            struct MsmtflDataset **out,
                                            double *true_weights);

/**
 * Writes the number of tasks and features.
 *
 * # Safety
 * `data` must be a live handle; `m` and `d` must be writable.
 */
enum MsmtflStatus msmtfl_dataset_shape(const struct MsmtflDataset *data, size_t *m, size_t *d);

/**
 * # Safety
 * `data` must be NULL or a handle not yet freed.
 */
void msmtfl_dataset_free(struct MsmtflDataset *data);

/**
 * `alpha * sqrt(ln(d m) / n)`.
 */
double msmtfl_lambda_from_alpha(double alpha, size_t d, size_t m, size_t n);

/**
 * Multi-stage run with fixed threshold `theta`.
 *
 * # Safety
 * `data` must be a live handle; `out` must be writable.
 */
enum MsmtflStatus msmtfl_run_msmtfl(const struct MsmtflDataset *data,
                                    double lambda,
                                    double theta,
                                    size_t stages,
                                    struct MsmtflRun **out);

/**
 * Multi-stage run with the adaptive threshold.
 *
 * # Safety
 * `data` must be a live handle; `out` must be writable.
 */
enum MsmtflStatus msmtfl_run_msmtfl_at(const struct MsmtflDataset *data,
                                       double lambda,
                                       double tau_multiplier,
                                       size_t stages,
                                       struct MsmtflRun **out);

/**
 * l1,1-regularized baseline. The run has one stage with infinite theta.
 *
 * # Safety
 * `data` must be a live handle; `out` must be writable.
 */
enum MsmtflStatus msmtfl_run_lasso(const struct MsmtflDataset *data,
                                   double lambda,
                                   struct MsmtflRun **out);

/**
 * l2,1-regularized baseline. The run has one stage with infinite theta.
 *
 * # Safety
 * `data` must be a live handle; `out` must be writable.
 */
enum MsmtflStatus msmtfl_run_l21(const struct MsmtflDataset *data,
                                 double lambda,
                                 struct MsmtflRun **out);

/**
 * # Safety
 * `run` must be a live handle; `count` must be writable.
 */
enum MsmtflStatus msmtfl_run_stage_count(const struct MsmtflRun *run, size_t *count);

/**
 * Copies the `d x m` weights of a 1-based stage into `buffer`.
 *
 * # Safety
 * `run` must be a live handle; `buffer` must hold `len` values.
 */
enum MsmtflStatus msmtfl_run_weights(const struct MsmtflRun *run,
                                     size_t stage,
                                     double *buffer,
                                     size_t len);

/**
 * Threshold used after a 1-based stage (`inf` when no row was released).
 *
 * # Safety
 * `run` must be a live handle; `theta` must be writable.
 */
enum MsmtflStatus msmtfl_run_theta(const struct MsmtflRun *run, size_t stage, double *theta);

/**
 * # Safety
 * `run` must be NULL or a handle not yet freed.
 */
void msmtfl_run_free(struct MsmtflRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSMTFL_H */
