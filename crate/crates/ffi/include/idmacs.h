#ifndef IDMACS_H
#define IDMACS_H

/* Generated by cbindgen from idmacs-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum IdmacsStatus {
  IdmacsStatus_Ok = 0,
  IdmacsStatus_NullPointer = 1,
  IdmacsStatus_InvalidArgument = 2,
  IdmacsStatus_NumericalError = 3,
  IdmacsStatus_BufferTooSmall = 4,
  IdmacsStatus_Panic = 5,
} IdmacsStatus;

/**
 * Which objective a fit optimizes.
 */
typedef enum IdmacsObjective {
  IdmacsObjective_LeastSquares = 0,
  IdmacsObjective_MaxLikelihood = 1,
} IdmacsObjective;

/**
 * Opaque per-visit count table.
 */
typedef struct IdmacsAcsTable IdmacsAcsTable;

/**
 * Opaque batch of bootstrap replicates.
 */
typedef struct IdmacsBootstrap IdmacsBootstrap;

/**
 * The three-dimensional rate parameter: onset age (years), incidence
 * slope (per year²), mortality rate ratio.
 */
typedef struct IdmacsTheta {
  double onset_age;
  double incidence_slope;
  double mortality_rate_ratio;
} IdmacsTheta;

/**
 * Result of one fit.
 */
typedef struct IdmacsFitResult {
  struct IdmacsTheta theta;
  /**
   * Sum of squares (least squares) or negated log-likelihood.
   */
  double objective_value;
  size_t n_evaluations;
  bool converged;
} IdmacsFitResult;

/**
 * Per-component empirical quantiles over the converged replicates of
 * one estimator: arrays are indexed by component (onset age, incidence
 * slope, mortality rate ratio).
 */
typedef struct IdmacsQuantiles {
  double q025[3];
  double median[3];
  double q975[3];
  size_t n_converged;
  size_t b_total;
} IdmacsQuantiles;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the message of the most recent error on this thread into
 * `buffer` (NUL-terminated, truncated to `len`). Returns the full
 * message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buffer` must point to `len` writable bytes, or be NULL (only the
 * required length is returned then).
 */
size_t idmacs_last_error_message(char *buffer, size_t len);

/**
 * The parameter vector behind the built-in simulation defaults
 * (onset 30, slope 1/2000, ratio e^0.7).
 */
struct IdmacsTheta idmacs_theta_reference(void);

/**
 * Evaluates the model fractions p(t) at `n_times` output times, writing
 * `3 * n_times` values (p1, p2, p3 per time, row-major) to `out`.
 * Output times must be multiples of `step` and increasing.
 *
 * # Safety
 * `times` must point to `n_times` readable f64; `out` to `3 * n_times`
 * writable f64.
 */
enum IdmacsStatus idmacs_solve_fractions(struct IdmacsTheta theta,
                                         const double *times,
                                         size_t n_times,
                                         double step,
                                         double *out);

/**
 * Simulates a cohort of `n_subjects` through the model, samples each
 * subject at each visit with probability `p_part`, and returns the
 * aggregated count table as an opaque handle in `out_table` (free with
 * [`idmacs_acs_free`]). Deterministic in `seed`.
 *
 * # Safety
 * `visit_times` must point to `n_visits` readable f64; `out_table` to a
 * writable pointer slot.
 */
enum IdmacsStatus idmacs_simulate_acs(struct IdmacsTheta theta,
                                      size_t n_subjects,
                                      const double *visit_times,
                                      size_t n_visits,
                                      double p_part,
                                      uint64_t seed,
                                      struct IdmacsAcsTable **out_table);

/**
 * Builds a count table from raw arrays: `counts` holds `3 * n_visits`
 * values (non-diseased, diseased, dead per visit, row-major).
 *
 * # Safety
 * `visit_times` must point to `n_visits` readable f64, `counts` to
 * `3 * n_visits` readable u64, `out_table` to a writable pointer slot.
 */
enum IdmacsStatus idmacs_acs_from_counts(const double *visit_times,
                                         const uint64_t *counts,
                                         size_t n_visits,
                                         struct IdmacsAcsTable **out_table);

/**
 * Number of visits in the table.
 *
 * # Safety
 * `table` must be a live handle from this library.
 */
size_t idmacs_acs_n_visits(const struct IdmacsAcsTable *table);

/**
 * Copies the visit's counts (non-diseased, diseased, dead) into `out3`.
 *
 * # Safety
 * `table` must be a live handle; `out3` must point to 3 writable u64.
 */
enum IdmacsStatus idmacs_acs_counts(const struct IdmacsAcsTable *table,
                                    size_t visit,
                                    uint64_t *out3);

/**
 * The visit time of column `visit`, or NaN when out of range.
 *
 * # Safety
 * `table` must be a live handle from this library.
 */
double idmacs_acs_visit_time(const struct IdmacsAcsTable *table, size_t visit);

/**
 * Releases a table handle. NULL is a no-op.
 *
 * # Safety
 * `table` must be NULL or a handle not freed before.
 */
void idmacs_acs_free(struct IdmacsAcsTable *table);

/**
 * Fits the parameter to a count table. `initial` may be NULL for the
 * default starting point; `ode_step` ≤ 0 selects the default 0.1.
 *
 * # Safety
 * `table` must be a live handle; `out` must point to a writable result;
 * `initial`, when non-NULL, to a readable IdmacsTheta.
 */
enum IdmacsStatus idmacs_fit(const struct IdmacsAcsTable *table,
                             enum IdmacsObjective objective,
                             const struct IdmacsTheta *initial,
                             double ode_step,
                             struct IdmacsFitResult *out);

/**
 * Runs `b_total` schema-preserving bootstrap replicates at `theta_star`
 * (fresh Bernoulli masks per replicate) and returns an opaque batch in
 * `out_batch` (free with [`idmacs_bootstrap_free`]). Deterministic in
 * `master_seed` regardless of thread count.
 *
 * # Safety
 * `visit_times` must point to `n_visits` readable f64; `out_batch` to a
 * writable pointer slot.
 */
enum IdmacsStatus idmacs_bootstrap_run(struct IdmacsTheta theta_star,
                                       size_t n_subjects,
                                       const double *visit_times,
                                       size_t n_visits,
                                       double p_part,
                                       size_t b_total,
                                       uint64_t master_seed,
                                       struct IdmacsBootstrap **out_batch);

/**
 * Number of replicates in the batch.
 *
 * # Safety
 * `batch` must be a live handle from this library.
 */
size_t idmacs_bootstrap_len(const struct IdmacsBootstrap *batch);

/**
 * Copies replicate `b`'s estimate of the requested kind into
 * `out_theta` and its convergence flag into `out_converged`.
 *
 * # Safety
 * `batch` must be a live handle; `out_theta` and `out_converged` must
 * be writable.
 */
enum IdmacsStatus idmacs_bootstrap_get(const struct IdmacsBootstrap *batch,
                                       size_t b,
                                       enum IdmacsObjective objective,
                                       struct IdmacsTheta *out_theta,
                                       bool *out_converged);

/**
 * Summarizes a batch by empirical quantiles.
 *
 * # Safety
 * `batch` must be a live handle; `out` must point to a writable
 * IdmacsQuantiles.
 */
enum IdmacsStatus idmacs_bootstrap_quantiles(const struct IdmacsBootstrap *batch,
                                             enum IdmacsObjective objective,
                                             struct IdmacsQuantiles *out);

/**
 * Releases a bootstrap batch. NULL is a no-op.
 *
 * # Safety
 * `batch` must be NULL or a handle not freed before.
 */
void idmacs_bootstrap_free(struct IdmacsBootstrap *batch);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IDMACS_H */
