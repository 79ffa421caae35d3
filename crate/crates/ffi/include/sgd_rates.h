#ifndef SGD_RATES_H
#define SGD_RATES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SgdStatus {
  SGD_STATUS_OK = 0,
  SGD_STATUS_NULL_POINTER = 1,
  SGD_STATUS_INVALID_PARAMETER = 2,
  SGD_STATUS_DIMENSION_MISMATCH = 3,
  SGD_STATUS_INFEASIBLE = 4,
  SGD_STATUS_PRECONDITION = 5,
  SGD_STATUS_UNSUPPORTED = 6,
  SGD_STATUS_BUFFER_TOO_SMALL = 7,
  SGD_STATUS_PANIC = 8,
} SgdStatus;

typedef enum SgdScheduleKind {
  SGD_SCHEDULE_KIND_THM1 = 0,
  SGD_SCHEDULE_KIND_PROP_ORIGINAL = 1,
  SGD_SCHEDULE_KIND_PROP_INTERIOR = 2,
  SGD_SCHEDULE_KIND_THM2 = 3,
  /**
   * `param` is the exponent `r >= 0`
   */
  SGD_SCHEDULE_KIND_GENERALIZED_R = 4,
  /**
   * `param` is the rate `alpha` in (0, 1)
   */
  SGD_SCHEDULE_KIND_EXPONENTIAL = 5,
} SgdScheduleKind;

typedef enum SgdBoundSource {
  SGD_BOUND_SOURCE_THM1 = 0,
  SGD_BOUND_SOURCE_PROP_ORIGINAL = 1,
  SGD_BOUND_SOURCE_PROP_INTERIOR = 2,
  SGD_BOUND_SOURCE_THM2 = 3,
} SgdBoundSource;

typedef enum SgdSequence {
  SGD_SEQUENCE_P_BAR = 0,
  SGD_SEQUENCE_R_BAR = 1,
  SGD_SEQUENCE_P_TILDE_SQ = 2,
  SGD_SEQUENCE_R_TILDE_SQ = 3,
  SGD_SEQUENCE_R_HAT = 4,
} SgdSequence;

/**
 * Opaque problem handle.
 */
typedef struct SgdProblem SgdProblem;

/**
 * Opaque recursion sequences.
 */
typedef struct SgdRecursion SgdRecursion;

/**
 * Opaque run result.
 */
typedef struct SgdRunRecord SgdRunRecord;

typedef struct SgdSchedule {
  enum SgdScheduleKind kind;
  double param;
} SgdSchedule;

typedef struct SgdBoundTriple {
  double k_bar;
  double k_tilde;
  double k_hat;
} SgdBoundTriple;

/**
 * `failures[0]` counts the terminal check, `failures[i]` condition `i`.
 */
typedef struct SgdCheckSummary {
  size_t failures[8];
  size_t checks;
} SgdCheckSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the next failing call.
 */
const char *sgd_last_error_message(void);

/**
 * Quadratic over a ball; `center` may be NULL for the origin.
 *
 * # Safety
 * `center` must point to `d` doubles or be NULL; `out` must be writable.
 */
enum SgdStatus sgd_problem_new_ball(size_t d,
                                    double mu,
                                    double l,
                                    double q,
                                    uint64_t rotation_seed,
                                    bool interior,
                                    const double *center,
                                    double radius,
                                    struct SgdProblem **out);

/**
 * Quadratic over the box `[lower, upper]`.
 *
 * # Safety
 * `lower` and `upper` must point to `d` doubles; `out` must be writable.
 */
enum SgdStatus sgd_problem_new_box(size_t d,
                                   double mu,
                                   double l,
                                   double q,
                                   uint64_t rotation_seed,
                                   bool interior,
                                   const double *lower,
                                   const double *upper,
                                   struct SgdProblem **out);

/**
 * # Safety
 * `p` must come from a `sgd_problem_new_*` call and not be freed twice. NULL is ignored.
 */
void sgd_problem_free(struct SgdProblem *p);

/**
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum SgdStatus sgd_problem_dim(const struct SgdProblem *p, size_t *out);

/**
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum SgdStatus sgd_problem_kappa(const struct SgdProblem *p, double *out);

/**
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum SgdStatus sgd_problem_diameter(const struct SgdProblem *p, double *out);

/**
 * Optimality gap `f(x) - f(x*)`.
 *
 * # Safety
 * `x` must point to `len` doubles; `out` must be writable.
 */
enum SgdStatus sgd_problem_eval_f(const struct SgdProblem *p,
                                  const double *x,
                                  size_t len,
                                  double *out);

/**
 * # Safety
 * `buf` must have room for `len` doubles.
 */
enum SgdStatus sgd_problem_default_start(const struct SgdProblem *p, double *buf, size_t len);

/**
 * One seeded run. `x0` may be NULL for the problem's default start.
 *
 * # Safety
 * `p` must be a live handle, `x0` NULL or `dim` doubles, `out` writable.
 */
enum SgdStatus sgd_run(const struct SgdProblem *p,
                       struct SgdSchedule schedule,
                       size_t t_max,
                       const double *x0,
                       uint64_t seed,
                       bool assert_lemma,
                       struct SgdRunRecord **out);

/**
 * # Safety
 * `r` must come from `sgd_run`. NULL is ignored.
 */
void sgd_run_free(struct SgdRunRecord *r);

/**
 * # Safety
 * `r` must be a live handle; `out` writable.
 */
enum SgdStatus sgd_run_final_gap(const struct SgdRunRecord *r, double *out);

/**
 * # Safety
 * `r` must be a live handle; `out` writable.
 */
enum SgdStatus sgd_run_lemma_violations(const struct SgdRunRecord *r, size_t *out);

/**
 * Gap after each of the `T` iterations; `len` must be at least `T`.
 *
 * # Safety
 * `buf` must have room for `len` doubles.
 */
enum SgdStatus sgd_run_gaps(const struct SgdRunRecord *r, double *buf, size_t len);

/**
 * Returned point (average or last iterate); `len` must be at least the dimension.
 *
 * # Safety
 * `buf` must have room for `len` doubles.
 */
enum SgdStatus sgd_run_output(const struct SgdRunRecord *r, double *buf, size_t len);

/**
 * # Safety
 * `out` must be writable.
 */
enum SgdStatus sgd_bound(enum SgdBoundSource source,
                         double d,
                         double l,
                         double q,
                         double kappa,
                         size_t t_max,
                         struct SgdBoundTriple *out);

/**
 * `k_bar + sqrt(2 theta) k_tilde + theta k_hat`.
 *
 * # Safety
 * `t` must point to a triple; `out` writable.
 */
enum SgdStatus sgd_bound_quantile(const struct SgdBoundTriple *t, double theta, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum SgdStatus sgd_recursion_new(enum SgdBoundSource source,
                                 size_t t_max,
                                 double mu,
                                 double l,
                                 double q,
                                 double d,
                                 struct SgdRecursion **out);

/**
 * # Safety
 * `r` must come from `sgd_recursion_new`. NULL is ignored.
 */
void sgd_recursion_free(struct SgdRecursion *r);

/**
 * Scale one sequence in place.
 *
 * # Safety
 * `r` must be a live handle.
 */
enum SgdStatus sgd_recursion_corrupt(struct SgdRecursion *r, enum SgdSequence which, double factor);

/**
 * Run all inequality checks; failures are reported in `out`, not as an error status.
 *
 * # Safety
 * `r` must be a live handle; `out` writable.
 */
enum SgdStatus sgd_recursion_check(const struct SgdRecursion *r, struct SgdCheckSummary *out);

/**
 * `sum_{s=t+1}^{T} 1/s`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SgdStatus sgd_log_tilde(size_t t_max, size_t t, double *out);

/**
 * Sum of squared output weights of a schedule over `T` steps.
 *
 * # Safety
 * `out` must be writable.
 */
enum SgdStatus sgd_averaged_variance(struct SgdSchedule schedule, size_t t_max, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SGD_RATES_H */
