#ifndef QUTRIT_TRANSFER_H
#define QUTRIT_TRANSFER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum QstStatus {
  QST_STATUS_OK = 0,
  QST_STATUS_NULL_POINTER = 1,
  QST_STATUS_INVALID_UTF8 = 2,
  QST_STATUS_CONFIG = 3,
  QST_STATUS_INVALID_ARGUMENT = 4,
  QST_STATUS_NUMERICAL = 5,
  QST_STATUS_IO = 6,
  QST_STATUS_OUT_OF_RANGE = 7,
  QST_STATUS_PANIC = 8,
} QstStatus;

typedef enum QstSweepKind {
  QST_SWEEP_KIND_DETUNING = 0,
  QST_SWEEP_KIND_STATE_GRID = 1,
  QST_SWEEP_KIND_COUPLING = 2,
  QST_SWEEP_KIND_CONVERGENCE = 3,
} QstSweepKind;

/**
 * Configuration: the source text plus `key=value` overrides, revalidated
 * on every change.
 */
typedef struct QstConfig QstConfig;

typedef struct QstSweep QstSweep;

typedef struct QstTransfer QstTransfer;

/**
 * Scalar outcome of one transfer. Frequencies are ω/2π in MHz, times in ns.
 */
typedef struct QstTransferSummary {
  double fidelity;
  double lambda1_mhz;
  double lambda2_mhz;
  double t1_ns;
  double t2_ns;
  double q_a;
  double q_b;
  double peak_photons;
  double max_trace_error;
  double min_eigenvalue;
} QstTransferSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qst_version(void);

/**
 * Copies the calling thread's last error message into `buf` (always
 * NUL-terminated when `len > 0`) and returns the full message length
 * including the terminator; 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t qst_last_error_message(char *buf, size_t len);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum QstStatus qst_config_new(struct QstConfig **out);

/**
 * Configuration parsed from `key = value` text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` valid for a pointer write.
 */
enum QstStatus qst_config_from_str(const char *text, struct QstConfig **out);

/**
 * Sets one key. On error the configuration is left unchanged.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` NUL-terminated.
 */
enum QstStatus qst_config_set(struct QstConfig *cfg, const char *key, const char *value);

/**
 * # Safety
 * `cfg` must be null or come from this library and not be used again.
 */
void qst_config_free(struct QstConfig *cfg);

/**
 * Runs one transfer.
 *
 * # Safety
 * `cfg` must come from this library; `out` valid for a pointer write.
 */
enum QstStatus qst_transfer_run(const struct QstConfig *cfg, struct QstTransfer **out);

/**
 * # Safety
 * `t` must come from this library; `out` valid for a struct write.
 */
enum QstStatus qst_transfer_summary(const struct QstTransfer *t, struct QstTransferSummary *out);

/**
 * # Safety
 * `t` must be null or come from this library and not be used again.
 */
void qst_transfer_free(struct QstTransfer *t);

/**
 * Runs a parameter sweep with the configuration's sweep settings.
 *
 * # Safety
 * `cfg` must come from this library; `out` valid for a pointer write.
 */
enum QstStatus qst_sweep_run(const struct QstConfig *cfg,
                             enum QstSweepKind kind,
                             struct QstSweep **out);

/**
 * Number of rows; 0 for a null handle.
 *
 * # Safety
 * `s` must be null or come from this library.
 */
size_t qst_sweep_rows(const struct QstSweep *s);

/**
 * Number of columns per row; 0 for a null handle.
 *
 * # Safety
 * `s` must be null or come from this library.
 */
size_t qst_sweep_columns(const struct QstSweep *s);

/**
 * Name of column `i`, valid until the sweep is freed; null when out of
 * range.
 *
 * # Safety
 * `s` must be null or come from this library.
 */
const char *qst_sweep_column_name(const struct QstSweep *s, size_t i);

/**
 * Copies row `i` into `buf`, which must hold `qst_sweep_columns` values.
 *
 * # Safety
 * `s` must come from this library; `buf` valid for `len` doubles.
 */
enum QstStatus qst_sweep_row(const struct QstSweep *s, size_t i, double *buf, size_t len);

/**
 * Writes the sweep as CSV.
 *
 * # Safety
 * `s` must come from this library; `path` NUL-terminated.
 */
enum QstStatus qst_sweep_write_csv(const struct QstSweep *s, const char *path);

/**
 * # Safety
 * `s` must be null or come from this library and not be used again.
 */
void qst_sweep_free(struct QstSweep *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUTRIT_TRANSFER_H */
