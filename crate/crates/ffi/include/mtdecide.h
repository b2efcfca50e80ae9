#ifndef MTDECIDE_H
#define MTDECIDE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MtdMode {
  MTD_MODE_DECIDE = 0,
  MTD_MODE_FOLLOW = 1,
  MTD_MODE_MOBILE = 2,
} MtdMode;

/**
 * Status code of a fallible call.
 */
typedef enum MtdStatus {
  MTD_STATUS_OK = 0,
  MTD_STATUS_NULL_POINTER = 1,
  MTD_STATUS_INVALID_ARGUMENT = 2,
  MTD_STATUS_CONFIG = 3,
  MTD_STATUS_INFEASIBLE_TOPOLOGY = 4,
  MTD_STATUS_DIVERGENCE = 5,
  MTD_STATUS_IO = 6,
  MTD_STATUS_PANIC = 7,
} MtdStatus;

/**
 * Experiment configuration.
 */
typedef struct MtdConfig MtdConfig;

/**
 * Result of one trial.
 */
typedef struct MtdRecord MtdRecord;

/**
 * Aggregate of a Monte Carlo run.
 */
typedef struct MtdSummary MtdSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *mtd_last_error(void);

/**
 * Library version as a static string.
 */
const char *mtd_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void mtd_string_free(char *s);

/**
 * Default configuration for `mode`.
 */
struct MtdConfig *mtd_config_new(enum MtdMode mode);

/**
 * Parses TOML laid over the defaults of `mode` and validates the result.
 *
 * # Safety
 * `text` must be a nul-terminated string; `out` must be writable.
 */
enum MtdStatus mtd_config_from_toml(enum MtdMode mode, const char *text, struct MtdConfig **out);

/**
 * Serializes the configuration as TOML.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum MtdStatus mtd_config_to_toml(const struct MtdConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum MtdStatus mtd_config_set_trials(struct MtdConfig *cfg, size_t n_trials);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum MtdStatus mtd_config_set_max_iters(struct MtdConfig *cfg, size_t max_iters);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum MtdStatus mtd_config_set_models(struct MtdConfig *cfg, size_t n_models);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum MtdStatus mtd_config_set_seed(struct MtdConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum MtdStatus mtd_config_set_equilibrium_breaking(struct MtdConfig *cfg, bool enabled);

/**
 * # Safety
 * `cfg` must be null or a live handle.
 */
void mtd_config_free(struct MtdConfig *cfg);

/**
 * Runs trial `trial` of `cfg`. A diverged trial still yields a record, with
 * `success` false.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum MtdStatus mtd_run_trial(const struct MtdConfig *cfg, size_t trial, struct MtdRecord **out);

/**
 * # Safety
 * `rec` must be a live handle.
 */
bool mtd_record_success(const struct MtdRecord *rec);

/**
 * One-based model the network agreed on, 0 when it did not agree.
 *
 * # Safety
 * `rec` must be a live handle.
 */
size_t mtd_record_final_label(const struct MtdRecord *rec);

/**
 * # Safety
 * `rec` must be a live handle.
 */
size_t mtd_record_iterations(const struct MtdRecord *rec);

/**
 * `MSD_d` at zero-based row `index`; NaN where undefined or out of range.
 *
 * # Safety
 * `rec` must be a live handle.
 */
double mtd_record_msd_d(const struct MtdRecord *rec, size_t index);

/**
 * # Safety
 * `rec` must be a live handle.
 */
uint64_t mtd_record_total_switches(const struct MtdRecord *rec);

/**
 * JSON form of the record, without per-iteration rows.
 *
 * # Safety
 * `rec` must be a live handle; `out` must be writable.
 */
enum MtdStatus mtd_record_to_json(const struct MtdRecord *rec, char **out);

/**
 * # Safety
 * `rec` must be null or a live handle.
 */
void mtd_record_free(struct MtdRecord *rec);

/**
 * Runs `n_trials` trials. The summary does not depend on `parallel`.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum MtdStatus mtd_run_monte_carlo(const struct MtdConfig *cfg,
                                   bool parallel,
                                   struct MtdSummary **out);

/**
 * # Safety
 * `s` must be a live handle.
 */
size_t mtd_summary_trials(const struct MtdSummary *s);

/**
 * # Safety
 * `s` must be a live handle.
 */
size_t mtd_summary_successes(const struct MtdSummary *s);

/**
 * # Safety
 * `s` must be a live handle.
 */
double mtd_summary_success_rate(const struct MtdSummary *s);

/**
 * Mobile runs whose agents all ended near one source.
 *
 * # Safety
 * `s` must be a live handle.
 */
size_t mtd_summary_captures(const struct MtdSummary *s);

/**
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum MtdStatus mtd_summary_to_json(const struct MtdSummary *s, char **out);

/**
 * # Safety
 * `s` must be null or a live handle.
 */
void mtd_summary_free(struct MtdSummary *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MTDECIDE_H */
