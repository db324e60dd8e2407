#ifndef TSCONFORMAL_H
#define TSCONFORMAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum TscStatus {
  TSC_STATUS_OK = 0,
  TSC_STATUS_NULL_POINTER = 1,
  TSC_STATUS_INVALID_ARGUMENT = 2,
  TSC_STATUS_INVALID_CONFIG = 3,
  TSC_STATUS_INSUFFICIENT_DATA = 4,
  TSC_STATUS_STATE_SPACE_TOO_LARGE = 5,
  TSC_STATUS_IO = 6,
  TSC_STATUS_PANIC = 7,
} TscStatus;

/**
 * Opaque experiment configuration.
 */
typedef struct TscConfig TscConfig;

/**
 * Opaque split-calibration predictor.
 */
typedef struct TscPredictor TscPredictor;

/**
 * Opaque Monte Carlo coverage report.
 */
typedef struct TscReport TscReport;

/**
 * Prediction interval; bounds are `±∞` when unbounded.
 */
typedef struct TscInterval {
  double lower;
  double upper;
  double threshold;
  size_t m_cal;
} TscInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len − 1` bytes) and returns the full message length, or 0
 * when there is none. `buf` may be null to query the length.
 *
 * # Safety
 * `buf` is null or points to `len` writable bytes.
 */
size_t tsc_last_error_message(char *buf, size_t len);

/**
 * Parses a JSON experiment config into `*out`.
 *
 * # Safety
 * `json` is a NUL-terminated string; `out` is writable.
 */
enum TscStatus tsc_config_from_json(const char *json, struct TscConfig **out);

/**
 * # Safety
 * `cfg` is null or came from [`tsc_config_from_json`] and is not used again.
 */
void tsc_config_free(struct TscConfig *cfg);

/**
 * Overrides the master seed and trial count (`trials = 0` keeps the current one).
 *
 * # Safety
 * `cfg` is a live config handle.
 */
enum TscStatus tsc_config_set_run(struct TscConfig *cfg, uint64_t seed, uint64_t trials);

/**
 * Monte Carlo coverage of `cfg` into a new report handle.
 *
 * # Safety
 * `cfg` is a live config handle; `out` is writable.
 */
enum TscStatus tsc_coverage_sim(const struct TscConfig *cfg, struct TscReport **out);

/**
 * # Safety
 * `report` is null or came from [`tsc_coverage_sim`] and is not used again.
 */
void tsc_report_free(struct TscReport *report);

/**
 * Coverage estimate, its standard error and the trial count.
 *
 * # Safety
 * `report` is a live report handle; each out-pointer is null or writable.
 */
enum TscStatus tsc_report_summary(const struct TscReport *report,
                                  double *coverage,
                                  double *standard_error,
                                  uint64_t *trials);

/**
 * Whole report as a JSON string; free it with [`tsc_string_free`].
 *
 * # Safety
 * `report` is a live report handle; `out` is writable.
 */
enum TscStatus tsc_report_to_json(const struct TscReport *report, char **out);

/**
 * # Safety
 * `s` is null or came from this library and is not used again.
 */
void tsc_string_free(char *s);

/**
 * Exact coverage of a finite-process config.
 *
 * # Safety
 * `cfg` is a live config handle; `out` is writable.
 */
enum TscStatus tsc_exact_coverage(const struct TscConfig *cfg, double *out);

/**
 * Conformal threshold of `len` calibration scores: the
 * `⌈(1−α)(len+1)⌉`-th smallest, or `+∞` when that exceeds `len`.
 *
 * # Safety
 * `scores` points to `len` values; `out` is writable.
 */
enum TscStatus tsc_conformal_threshold(const double *scores, size_t len, double alpha, double *out);

/**
 * Coverage lower bound from a `β(0), β(1), …` table for `n` calibration
 * points and memory `L`; missing lags count as 1.
 *
 * # Safety
 * `beta` points to `beta_len` values; `out` is writable.
 */
enum TscStatus tsc_mixing_lower_bound(double alpha,
                                      size_t n,
                                      size_t memory,
                                      const double *beta,
                                      size_t beta_len,
                                      double *out);

/**
 * Predictor fitting a least-squares AR(`memory`) model on the first `n0`
 * points (`n0 = 0` for half the history) and calibrating on the rest.
 *
 * # Safety
 * `out` is writable.
 */
enum TscStatus tsc_predictor_new(double alpha, size_t memory, size_t n0, struct TscPredictor **out);

/**
 * # Safety
 * `p` is null or came from [`tsc_predictor_new`] and is not used again.
 */
void tsc_predictor_free(struct TscPredictor *p);

/**
 * Interval for `y` at `x_test` given `len` history points `(x[i], y[i])`.
 *
 * # Safety
 * `p` is a live predictor; `x` and `y` point to `len` values; `out` is
 * writable.
 */
enum TscStatus tsc_predict(const struct TscPredictor *p,
                           const double *x,
                           const double *y,
                           size_t len,
                           double x_test,
                           struct TscInterval *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSCONFORMAL_H */
