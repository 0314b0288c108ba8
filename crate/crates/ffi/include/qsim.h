#ifndef QSIM_H
#define QSIM_H

/* Generated by cbindgen from the qsim-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QsimStatus {
  QSIM_STATUS_OK = 0,
  QSIM_STATUS_NULL_POINTER = 1,
  QSIM_STATUS_INVALID_ARGUMENT = 2,
  QSIM_STATUS_CONFIG_ERROR = 3,
  QSIM_STATUS_RUNTIME_ERROR = 4,
  QSIM_STATUS_IO_ERROR = 5,
  QSIM_STATUS_NO_SAMPLES = 6,
  QSIM_STATUS_PANIC = 7,
} QsimStatus;

typedef enum QsimFormat {
  QSIM_FORMAT_CSV = 0,
  QSIM_FORMAT_JSON = 1,
} QsimFormat;

/**
 * Opaque result of one run.
 */
typedef struct QsimReport QsimReport;

/**
 * Opaque scenario handle.
 */
typedef struct QsimScenario QsimScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a scenario directory. On success `*out` owns a new handle.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QsimStatus qsim_scenario_load(const char *dir, struct QsimScenario **out);

/**
 * Builds a built-in scenario such as `"two_tier"` or `"fanout:16"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QsimStatus qsim_scenario_builtin(const char *name, uint64_t seed, struct QsimScenario **out);

/**
 * # Safety
 * `scenario` must be null or a handle from this library not yet freed.
 */
void qsim_scenario_free(struct QsimScenario *scenario);

/**
 * # Safety
 * `scenario` must be a live handle.
 */
enum QsimStatus qsim_scenario_set_seed(struct QsimScenario *scenario, uint64_t seed);

/**
 * Sets the client duration, keeping the warmup share.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum QsimStatus qsim_scenario_set_duration(struct QsimScenario *scenario, double duration_s);

/**
 * Replaces the load pattern with a constant rate.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum QsimStatus qsim_scenario_set_rate(struct QsimScenario *scenario, double qps);

/**
 * Simulates the scenario. On success `*out` owns a new report handle.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum QsimStatus qsim_run(const struct QsimScenario *scenario, struct QsimReport **out);

/**
 * # Safety
 * `report` must be null or a handle from this library not yet freed.
 */
void qsim_report_free(struct QsimReport *report);

/**
 * End-to-end latency percentile in milliseconds, `p` in (0, 100].
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum QsimStatus qsim_report_percentile_ms(const struct QsimReport *report, double p, double *out);

/**
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum QsimStatus qsim_report_mean_ms(const struct QsimReport *report, double *out);

/**
 * Requests measured after warmup.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum QsimStatus qsim_report_measured(const struct QsimReport *report, uint64_t *out);

/**
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum QsimStatus qsim_report_achieved_qps(const struct QsimReport *report, double *out);

/**
 * Largest number of requests outstanding at once.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum QsimStatus qsim_report_max_outstanding(const struct QsimReport *report, uint64_t *out);

/**
 * Digest of the processed event sequence; equal digests mean equal runs.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum QsimStatus qsim_report_digest(const struct QsimReport *report, uint64_t *out);

/**
 * Writes the one-row summary to `path` as CSV or JSON.
 *
 * # Safety
 * `report` must be a live handle and `path` a NUL-terminated string.
 */
enum QsimStatus qsim_report_export(const struct QsimReport *report,
                                   enum QsimFormat format,
                                   const char *path);

/**
 * Closed-form M/M/1 mean sojourn and p99, both in units of `1 / mu`.
 *
 * # Safety
 * `mean` and `p99` must be valid pointers.
 */
enum QsimStatus qsim_oracle_mm1(double lambda, double mu, double *mean, double *p99);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * always NUL-terminated when `len > 0`). Returns the full message length
 * excluding the terminator, so a caller can size a retry.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t qsim_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qsim_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSIM_H */
