#ifndef DMAQ_H
#define DMAQ_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DmaqStatus {
  DMAQ_STATUS_OK = 0,
  DMAQ_STATUS_NULL_POINTER = 1,
  DMAQ_STATUS_INVALID_ARGUMENT = 2,
  DMAQ_STATUS_INVALID_CONFIG = 3,
  DMAQ_STATUS_NUMERICAL = 4,
  DMAQ_STATUS_IO = 5,
  DMAQ_STATUS_PARSE = 6,
  DMAQ_STATUS_TRIAL_FAILED = 7,
  DMAQ_STATUS_PANIC = 8,
} DmaqStatus;

typedef enum DmaqReceiver {
  DMAQ_RECEIVER_R1 = 1,
  DMAQ_RECEIVER_R2 = 2,
  DMAQ_RECEIVER_R3 = 3,
  DMAQ_RECEIVER_R4 = 4,
  DMAQ_RECEIVER_R5 = 5,
} DmaqReceiver;

typedef enum DmaqFormat {
  DMAQ_FORMAT_CSV = 0,
  DMAQ_FORMAT_JSON = 1,
} DmaqFormat;

typedef enum DmaqConfigFormat {
  DMAQ_CONFIG_FORMAT_JSON = 0,
  DMAQ_CONFIG_FORMAT_TOML = 1,
} DmaqConfigFormat;

/**
 * Opaque experiment configuration.
 */
typedef struct DmaqConfig DmaqConfig;

/**
 * Opaque receiver design.
 */
typedef struct DmaqDesign DmaqDesign;

/**
 * Opaque list of result records.
 */
typedef struct DmaqResults DmaqResults;

/**
 * One Monte Carlo data point.
 */
typedef struct DmaqRecord {
  enum DmaqReceiver receiver;
  double snr_db;
  uint32_t b_overall;
  double mse;
  double ber;
  double overload;
  double e_o;
  double wall_time;
  uint64_t seed;
} DmaqRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *dmaq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dmaq_version(void);

double dmaq_snr_to_noise_power(double snr_db);

/**
 * Quantizer levels per real dimension for an overall budget.
 *
 * # Safety
 * `out` must be null or valid for a write.
 */
enum DmaqStatus dmaq_levels_for_budget(double bits_overall, size_t microstrips, size_t *out);

/**
 * Shipped default configuration.
 *
 * # Safety
 * `out` must be null or valid for a write.
 */
enum DmaqStatus dmaq_config_default(struct DmaqConfig **out);

/**
 * Loads a configuration from a `.json` or `.toml` file.
 *
 * # Safety
 * `path` must be null or NUL-terminated; `out` null or valid for a write.
 */
enum DmaqStatus dmaq_config_from_file(const char *path, struct DmaqConfig **out);

/**
 * Parses a configuration from JSON or TOML text; `format` is a
 * [`DmaqConfigFormat`] value.
 *
 * # Safety
 * `text` must be null or NUL-terminated; `out` null or valid for a write.
 */
enum DmaqStatus dmaq_config_from_str(const char *text, uint32_t format, struct DmaqConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from this library, not yet freed.
 */
void dmaq_config_free(struct DmaqConfig *cfg);

/**
 * # Safety
 * `cfg` must be null or a live handle.
 */
enum DmaqStatus dmaq_config_set_trials(struct DmaqConfig *cfg, size_t trials);

/**
 * # Safety
 * `cfg` must be null or a live handle.
 */
enum DmaqStatus dmaq_config_set_seed(struct DmaqConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be null or a live handle; `snr_db` valid for `len` reads.
 */
enum DmaqStatus dmaq_config_set_snr(struct DmaqConfig *cfg, const double *snr_db, size_t len);

/**
 * # Safety
 * `cfg` must be null or a live handle; `budgets` valid for `len` reads.
 */
enum DmaqStatus dmaq_config_set_budgets(struct DmaqConfig *cfg,
                                        const uint32_t *budgets,
                                        size_t len);

/**
 * Receivers given as codes 1..=5.
 *
 * # Safety
 * `cfg` must be null or a live handle; `codes` valid for `len` reads.
 */
enum DmaqStatus dmaq_config_set_receivers(struct DmaqConfig *cfg,
                                          const uint32_t *codes,
                                          size_t len);

/**
 * Checks the configuration without running it.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
enum DmaqStatus dmaq_config_validate(const struct DmaqConfig *cfg);

/**
 * Runs the Monte Carlo experiment described by `cfg`.
 *
 * # Safety
 * `cfg` must be null or a live handle; `out` null or valid for a write.
 */
enum DmaqStatus dmaq_run_experiment(const struct DmaqConfig *cfg, struct DmaqResults **out);

/**
 * Number of records, or 0 for a null handle.
 *
 * # Safety
 * `results` must be null or a live handle.
 */
size_t dmaq_results_len(const struct DmaqResults *results);

/**
 * # Safety
 * `results` must be null or a live handle; `out` null or valid for a write.
 */
enum DmaqStatus dmaq_results_get(const struct DmaqResults *results,
                                 size_t index,
                                 struct DmaqRecord *out);

/**
 * Writes the records; `format` is a [`DmaqFormat`] value.
 *
 * # Safety
 * `results` must be null or a live handle; `path` null or NUL-terminated.
 */
enum DmaqStatus dmaq_results_write(const struct DmaqResults *results,
                                   const char *path,
                                   uint32_t format);

/**
 * # Safety
 * `results` must be null or a handle from this library, not yet freed.
 */
void dmaq_results_free(struct DmaqResults *results);

/**
 * Designs one quantized receiver for the channel of `trial`; `receiver`
 * is a [`DmaqReceiver`] value other than R5.
 *
 * # Safety
 * `cfg` must be null or a live handle; `out` null or valid for a write.
 */
enum DmaqStatus dmaq_design_receiver(const struct DmaqConfig *cfg,
                                     uint32_t receiver,
                                     double snr_db,
                                     uint32_t b_overall,
                                     size_t trial,
                                     struct DmaqDesign **out);

/**
 * ADC support and number of levels of a design.
 *
 * # Safety
 * `design` must be null or a live handle; outputs null or valid for a write.
 */
enum DmaqStatus dmaq_design_quantizer(const struct DmaqDesign *design,
                                      double *support,
                                      size_t *levels);

/**
 * Serializes a design as JSON. Release the string with [`dmaq_string_free`].
 *
 * # Safety
 * `design` must be null or a live handle; `out` null or valid for a write.
 */
enum DmaqStatus dmaq_design_to_json(const struct DmaqDesign *design, char **out);

/**
 * # Safety
 * `design` must be null or a handle from this library, not yet freed.
 */
void dmaq_design_free(struct DmaqDesign *design);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void dmaq_string_free(char *s);

/**
 * Runs the built-in invariant checks; `passed` and `total` receive counts.
 *
 * # Safety
 * Outputs must be null or valid for a write.
 */
enum DmaqStatus dmaq_verify(uint64_t seed, size_t *passed, size_t *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DMAQ_H */
