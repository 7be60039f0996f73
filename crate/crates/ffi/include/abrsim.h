#ifndef ABRSIM_H
#define ABRSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Queue classification of a finished run.
 */
typedef enum AbrsimDivergence {
  ABRSIM_DIVERGENCE_CONVERGENT = 0,
  ABRSIM_DIVERGENCE_DIVERGENT = 1,
  ABRSIM_DIVERGENCE_UNKNOWN = 2,
} AbrsimDivergence;

/**
 * Status codes returned by fallible calls.
 */
typedef enum AbrsimStatus {
  ABRSIM_STATUS_OK = 0,
  ABRSIM_STATUS_NULL_POINTER = 1,
  ABRSIM_STATUS_INVALID_UTF8 = 2,
  ABRSIM_STATUS_CONFIG_ERROR = 3,
  ABRSIM_STATUS_IO_ERROR = 4,
  ABRSIM_STATUS_OUT_OF_RANGE = 5,
  ABRSIM_STATUS_PANIC = 6,
} AbrsimStatus;

/**
 * Scenario configuration handle.
 */
typedef struct AbrsimConfig AbrsimConfig;

/**
 * Results of one run: metrics plus the sampled trace.
 */
typedef struct AbrsimMetrics AbrsimMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message on this thread into `buf` (NUL terminated,
 * truncated to `len`). Returns the full message length excluding the NUL,
 * so a caller can size a buffer with a first call passing `len = 0`.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null when `len` is 0.
 */
size_t abrsim_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *abrsim_version(void);

/**
 * Default configuration: 15 TCP sources, 1000 km links, ERICA+, no VBR.
 */
struct AbrsimConfig *abrsim_config_default(void);

/**
 * Parses a `key = value` scenario document.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum AbrsimStatus abrsim_config_parse(const char *text, struct AbrsimConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards.
 */
void abrsim_config_free(struct AbrsimConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AbrsimStatus abrsim_config_set_duration_s(struct AbrsimConfig *cfg, double seconds);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
size_t abrsim_config_n_sources(const struct AbrsimConfig *cfg);

/**
 * ERICA+ queue-control factor for `q` cells under this configuration.
 * Returns NaN for a null handle.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
double abrsim_queue_control_factor(const struct AbrsimConfig *cfg, double q);

/**
 * Cells needed to carry a TCP segment of `payload_bytes` over AAL5.
 */
uint64_t abrsim_segment_to_cells(uint64_t payload_bytes);

/**
 * Runs the scenario to completion.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be writable.
 */
enum AbrsimStatus abrsim_run(const struct AbrsimConfig *cfg, struct AbrsimMetrics **out);

/**
 * # Safety
 * `m` must come from [`abrsim_run`] and not be used afterwards.
 */
void abrsim_metrics_free(struct AbrsimMetrics *m);

/**
 * Aggregate TCP goodput in Mbps; NaN for a null handle.
 *
 * # Safety
 * `m` must be a live metrics handle or null.
 */
double abrsim_metrics_goodput_mbps(const struct AbrsimMetrics *m);

/**
 * # Safety
 * `m` must be a live metrics handle or null.
 */
uint64_t abrsim_metrics_max_switch_queue(const struct AbrsimMetrics *m);

/**
 * Mean switch queue over the final third of the run.
 *
 * # Safety
 * `m` must be a live metrics handle or null.
 */
double abrsim_metrics_steady_switch_queue(const struct AbrsimMetrics *m);

/**
 * # Safety
 * `m` must be a live metrics handle; `out` must be writable.
 */
enum AbrsimStatus abrsim_metrics_max_source_queue(const struct AbrsimMetrics *m,
                                                  size_t vc,
                                                  uint64_t *out);

/**
 * # Safety
 * `m` must be a live metrics handle or null.
 */
uint64_t abrsim_metrics_drops_source(const struct AbrsimMetrics *m);

/**
 * # Safety
 * `m` must be a live metrics handle or null.
 */
uint64_t abrsim_metrics_drops_switch(const struct AbrsimMetrics *m);

/**
 * # Safety
 * `m` must be a live metrics handle or null.
 */
enum AbrsimDivergence abrsim_metrics_divergence(const struct AbrsimMetrics *m);

/**
 * Writes the one-row metrics CSV.
 *
 * # Safety
 * `m` must be a live metrics handle; `path` a NUL-terminated string.
 */
enum AbrsimStatus abrsim_metrics_write_csv(const struct AbrsimMetrics *m, const char *path);

/**
 * Writes the sampled trace CSV.
 *
 * # Safety
 * `m` must be a live metrics handle; `path` a NUL-terminated string.
 */
enum AbrsimStatus abrsim_trace_write_csv(const struct AbrsimMetrics *m, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ABRSIM_H */
