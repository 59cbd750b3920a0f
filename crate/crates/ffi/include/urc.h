#ifndef URC_H
#define URC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum UrcStatus {
  URC_STATUS_OK = 0,
  URC_STATUS_INVALID_ARGUMENT = 1,
  URC_STATUS_DOMAIN = 2,
  URC_STATUS_NO_SOLUTION = 3,
  URC_STATUS_INFEASIBLE = 4,
  URC_STATUS_CONFIG = 5,
  URC_STATUS_UNSUPPORTED_FORMAT = 6,
  URC_STATUS_IO = 7,
  URC_STATUS_NULL_POINTER = 8,
  URC_STATUS_PANIC = 9,
} UrcStatus;

typedef enum UrcMode {
  URC_MODE_REAL = 0,
  URC_MODE_COMPLEX = 1,
} UrcMode;

typedef enum UrcFading {
  URC_FADING_CONSTANT = 0,
  URC_FADING_RAYLEIGH_BLOCK = 1,
  URC_FADING_LOGNORMAL_SHADOW = 2,
  URC_FADING_RAYLEIGH_PLUS_SHADOW = 3,
} UrcFading;

/**
 * Opaque generated SNR/SINR trace.
 */
typedef struct UrcTrace UrcTrace;

typedef struct UrcBudgetPlan {
  uint64_t required_cu;
  double required_bandwidth_hz;
  double effective_bandwidth_hz;
  uint32_t spatial_streams;
  bool feasible;
} UrcBudgetPlan;

typedef struct UrcComparison {
  uint64_t header_cu;
  uint64_t total_cu;
  double separate_success;
  double joint_success;
  double separate_failure;
  double joint_failure;
  bool joint_wins;
} UrcComparison;

/**
 * Channel description for trace generation. SNR and INR are linear.
 * `interferer_activity_prob = 0` disables the interferer.
 */
typedef struct UrcChannel {
  enum UrcFading kind;
  double mean_snr;
  double shadow_sigma_db;
  size_t block_length;
  double interferer_activity_prob;
  double interferer_inr;
} UrcChannel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until
 * the next library call on the same thread.
 */
const char *urc_last_error_message(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *urc_version(void);

/**
 * Gaussian tail probability `Q(x)`.
 */
enum UrcStatus urc_qfunc(double x, double *out);

/**
 * Inverse of `Q` on `(0, 1)`.
 */
enum UrcStatus urc_qfunc_inv(double p, double *out);

/**
 * Capacity in bits per channel use at linear SNR `gamma`.
 */
enum UrcStatus urc_capacity_per_cu(double gamma, enum UrcMode mode, double *out);

/**
 * Channel dispersion in bits² per channel use.
 */
enum UrcStatus urc_dispersion(double gamma, enum UrcMode mode, double *out);

/**
 * Information bits carried by `n` channel uses at error probability `epsilon`.
 */
enum UrcStatus urc_max_info_bits(uint64_t n,
                                 double epsilon,
                                 double gamma,
                                 enum UrcMode mode,
                                 double *out);

/**
 * Smallest blocklength carrying `k_bits` at error probability `epsilon`.
 */
enum UrcStatus urc_min_blocklength(double k_bits,
                                   double epsilon,
                                   double gamma,
                                   enum UrcMode mode,
                                   uint64_t *out);

/**
 * Error probability of `k_bits` over `n` channel uses.
 */
enum UrcStatus urc_achieved_error(uint64_t n,
                                  double k_bits,
                                  double gamma,
                                  enum UrcMode mode,
                                  double *out);

/**
 * Linear SNR needed to carry `k_bits` over `n` channel uses.
 */
enum UrcStatus urc_min_snr(uint64_t n,
                           double k_bits,
                           double epsilon,
                           enum UrcMode mode,
                           double *out);

/**
 * Real degrees of freedom `2WT`.
 */
enum UrcStatus urc_degrees_of_freedom(double bandwidth_hz, double latency_s, double *out);

/**
 * Bandwidth `N/(2T)` for `channel_uses` within `latency_s`.
 */
enum UrcStatus urc_required_bandwidth(double channel_uses, double latency_s, double *out);

/**
 * Resource plan for a payload. `max_bandwidth_hz <= 0` and
 * `max_streams == 0` mean unlimited.
 */
enum UrcStatus urc_budget_plan(double payload_bits,
                               double epsilon,
                               double gamma,
                               double latency_s,
                               double max_bandwidth_hz,
                               uint32_t max_streams,
                               enum UrcMode mode,
                               struct UrcBudgetPlan *out);

/**
 * Separate vs. joint header/data encoding over `total_cu` channel uses.
 * `header_cu == 0` sizes the header adaptively for `data_epsilon`.
 */
enum UrcStatus urc_compare_encodings(double header_bits,
                                     double data_bits,
                                     uint64_t total_cu,
                                     double symbol_duration_s,
                                     double gamma,
                                     enum UrcMode mode,
                                     uint64_t header_cu,
                                     double data_epsilon,
                                     struct UrcComparison *out);

/**
 * Generate a trace of `length` samples. Free with [`urc_trace_free`].
 *
 * # Safety
 * `channel` must point to a valid `UrcChannel`; `out` to writable storage.
 */
enum UrcStatus urc_trace_generate(const struct UrcChannel *channel,
                                  size_t length,
                                  double sample_period_s,
                                  uint64_t seed,
                                  struct UrcTrace **out);

/**
 * Number of samples in `trace`; 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or a live handle from [`urc_trace_generate`].
 */
size_t urc_trace_len(const struct UrcTrace *trace);

/**
 * Copy up to `capacity` samples into `buffer`; the count copied goes to
 * `written`.
 *
 * # Safety
 * `trace` must be a live handle; `buffer` must hold `capacity` doubles.
 */
enum UrcStatus urc_trace_copy_samples(const struct UrcTrace *trace,
                                      double *buffer,
                                      size_t capacity,
                                      size_t *written);

/**
 * Fraction of samples at or above `threshold` (linear).
 *
 * # Safety
 * `trace` must be a live handle.
 */
enum UrcStatus urc_trace_availability(const struct UrcTrace *trace, double threshold, double *out);

/**
 * Release a trace. NULL is ignored.
 *
 * # Safety
 * `trace` must be NULL or a handle not yet freed.
 */
void urc_trace_free(struct UrcTrace *trace);

/**
 * Run a subcommand on a scenario document (TOML or JSON) and return the
 * JSON report. Free the string with [`urc_string_free`].
 *
 * # Safety
 * `command` and `config_text` must be NUL-terminated strings.
 */
enum UrcStatus urc_run_config(const char *command,
                              const char *config_text,
                              uint32_t threads,
                              char **out_json);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a string from [`urc_run_config`] not yet freed.
 */
void urc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* URC_H */
