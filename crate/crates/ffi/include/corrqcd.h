#ifndef CORRQCD_H
#define CORRQCD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Window length meaning "derive from threshold and epsilon".
 */
#define CQ_WINDOW_AUTO 0

/**
 * Window length meaning "use every past change-point candidate".
 */
#define CQ_WINDOW_UNBOUNDED UINT64_MAX

/**
 * Status codes returned by every fallible call.
 */
typedef enum CqStatus {
  CQ_STATUS_OK = 0,
  CQ_STATUS_INVALID_ARGUMENT = 1,
  CQ_STATUS_NULL_POINTER = 2,
  CQ_STATUS_ZERO_VARIANCE = 3,
  CQ_STATUS_NON_FINITE = 4,
  CQ_STATUS_DOMAIN = 5,
  CQ_STATUS_DIVERGENT_DENSITY = 6,
  CQ_STATUS_INFINITE_ESTIMATE = 7,
  CQ_STATUS_NOT_POSITIVE_DEFINITE = 8,
  /**
   * The detector has not stopped, so there is no verdict yet.
   */
  CQ_STATUS_NOT_STOPPED = 9,
  CQ_STATUS_PANIC = 255,
} CqStatus;

/**
 * A GLR detector fed one summary value or one data block at a time.
 */
typedef struct CqDetector CqDetector;

/**
 * Limiting-density parameters for fixed (n, p, delta).
 */
typedef struct CqModel CqModel;

typedef struct CqVerdict {
  uint64_t stopping_time;
  uint64_t change_point_estimate;
  double j_estimate;
} CqVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *cq_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cq_version(void);

/**
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum CqStatus cq_model_new(size_t n, size_t p, size_t delta, struct CqModel **out);

/**
 * # Safety
 * `model` must come from `cq_model_new` and not be used afterwards. Null is ignored.
 */
void cq_model_free(struct CqModel *model);

/**
 * Limiting cdf of V at `rho` for shape `j`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for a write.
 */
enum CqStatus cq_cdf_v(const struct CqModel *model, double rho, double j, double *out);

/**
 * Log density of V at `rho` for shape `j`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for a write.
 */
enum CqStatus cq_log_pdf_v(const struct CqModel *model, double rho, double j, double *out);

/**
 * # Safety
 * `model` must be a live handle and `out` valid for a write.
 */
enum CqStatus cq_w_transform(const struct CqModel *model, double rho, double *out);

/**
 * Kullback-Leibler divergence between shapes `j` and 1.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum CqStatus cq_kl_divergence(double j, double *out);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum CqStatus cq_calibrate_threshold(double beta, double *out);

/**
 * Maximum-likelihood J from `len` summary values.
 *
 * # Safety
 * `model` must be a live handle, `values` readable for `len` doubles and
 * `out` valid for a write.
 */
enum CqStatus cq_mle_j(const struct CqModel *model, const double *values, size_t len, double *out);

/**
 * Summary statistic of a row-major `n × p` block.
 *
 * # Safety
 * `data` must be readable for `n*p` doubles and `out` valid for a write.
 */
enum CqStatus cq_summary_statistic(const double *data,
                                   size_t n,
                                   size_t p,
                                   size_t delta,
                                   double *out);

/**
 * Creates a detector. `window` is a length, `CQ_WINDOW_AUTO` or
 * `CQ_WINDOW_UNBOUNDED`; `two_sided` also tests decreases of J.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for a pointer write.
 */
enum CqStatus cq_detector_new(const struct CqModel *model,
                              double epsilon,
                              double threshold,
                              uint64_t window,
                              bool two_sided,
                              struct CqDetector **out);

/**
 * # Safety
 * `detector` must come from `cq_detector_new` and not be used afterwards. Null is ignored.
 */
void cq_detector_free(struct CqDetector *detector);

/**
 * Feeds one summary value; `stopped` receives whether the detector stopped.
 *
 * # Safety
 * `detector` must be a live handle and `stopped` valid for a write.
 */
enum CqStatus cq_detector_push_value(struct CqDetector *detector, double v, bool *stopped);

/**
 * Feeds one row-major `n × p` block.
 *
 * # Safety
 * `detector` must be a live handle, `data` readable for `n*p` doubles and
 * `stopped` valid for a write.
 */
enum CqStatus cq_detector_push_block(struct CqDetector *detector,
                                     const double *data,
                                     size_t n,
                                     size_t p,
                                     bool *stopped);

/**
 * Current GLR statistic.
 *
 * # Safety
 * `detector` must be a live handle and `out` valid for a write.
 */
enum CqStatus cq_detector_stat(const struct CqDetector *detector, double *out);

/**
 * Writes the verdict, or returns `NotStopped`.
 *
 * # Safety
 * `detector` must be a live handle and `out` valid for a write.
 */
enum CqStatus cq_detector_verdict(const struct CqDetector *detector, struct CqVerdict *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CORRQCD_H */
