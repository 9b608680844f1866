#ifndef WIMAX_QOE_H
#define WIMAX_QOE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WimaxStatus {
  WIMAX_STATUS_OK = 0,
  WIMAX_STATUS_NULL_POINTER = 1,
  WIMAX_STATUS_INVALID_ARGUMENT = 2,
  WIMAX_STATUS_CONFIG_ERROR = 3,
  WIMAX_STATUS_IO_ERROR = 4,
  WIMAX_STATUS_OUT_OF_RANGE = 5,
  WIMAX_STATUS_PANIC = 6,
} WimaxStatus;

typedef enum WimaxScheduler {
  WIMAX_SCHEDULER_BASELINE = 0,
  WIMAX_SCHEDULER_QOE = 1,
} WimaxScheduler;

/**
 * Opaque scenario configuration.
 */
typedef struct WimaxConfig WimaxConfig;

/**
 * Opaque set of finished runs (one for a single run, one per variant for a
 * sweep).
 */
typedef struct WimaxRun WimaxRun;

/**
 * Whole-run statistics for one flow of one variant.
 */
typedef struct WimaxFlowSummary {
  uint32_t flow_id;
  /**
   * 0 = baseline, 1 = qoe.
   */
  uint32_t scheduler;
  /**
   * Loss threshold as a fraction; negative for baseline rows.
   */
  double threshold;
  uint64_t generated;
  uint64_t delivered;
  uint64_t dropped;
  uint64_t in_queue;
  uint64_t bytes_delivered;
  double throughput_bps;
  double loss_rate;
  double mean_delay_s;
  double mean_jitter_s;
  double initial_rate_bps;
  double min_rate_bps;
  double final_rate_bps;
} WimaxFlowSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL. The pointer
 * stays valid until the next library call on the same thread.
 */
const char *wimax_last_error(void);

/**
 * Reference scenario with default parameters. Never NULL.
 */
struct WimaxConfig *wimax_config_default(void);

enum WimaxStatus wimax_config_load(const char *path, struct WimaxConfig **out);

enum WimaxStatus wimax_config_parse(const char *text, struct WimaxConfig **out);

/**
 * `scheduler` takes a `WimaxScheduler` value.
 */
enum WimaxStatus wimax_config_set_scheduler(struct WimaxConfig *cfg, uint32_t scheduler);

/**
 * Sets the loss threshold (fraction in (0, 1]) of every user.
 */
enum WimaxStatus wimax_config_set_threshold(struct WimaxConfig *cfg, double threshold);

/**
 * Replaces the sweep's threshold list.
 */
enum WimaxStatus wimax_config_set_thresholds(struct WimaxConfig *cfg,
                                             const double *thresholds,
                                             size_t len);

enum WimaxStatus wimax_config_set_sim_time(struct WimaxConfig *cfg, double seconds);

enum WimaxStatus wimax_config_set_epoch(struct WimaxConfig *cfg, double seconds);

/**
 * Bytes per frame; `UINT64_MAX` means unlimited.
 */
enum WimaxStatus wimax_config_set_uplink_capacity(struct WimaxConfig *cfg,
                                                  uint64_t bytes_per_frame);

size_t wimax_config_user_count(const struct WimaxConfig *cfg);

void wimax_config_free(struct WimaxConfig *cfg);

/**
 * Runs the configured scheduler once.
 */
enum WimaxStatus wimax_run(const struct WimaxConfig *cfg, struct WimaxRun **out);

/**
 * Runs the baseline followed by the QoE scheduler at every configured
 * threshold.
 */
enum WimaxStatus wimax_sweep(const struct WimaxConfig *cfg, struct WimaxRun **out);

size_t wimax_run_variant_count(const struct WimaxRun *run);

size_t wimax_run_flow_count(const struct WimaxRun *run);

enum WimaxStatus wimax_run_flow_summary(const struct WimaxRun *run,
                                        size_t variant,
                                        size_t flow,
                                        struct WimaxFlowSummary *out);

/**
 * Writes `summary.csv`, `series.csv` and `rates.csv` into `dir`.
 */
enum WimaxStatus wimax_run_write_csv(const struct WimaxRun *run, const char *dir);

void wimax_run_free(struct WimaxRun *run);

/**
 * One controller decision. `increase_step` is in bytes per second.
 * Returns the new rate, or a negative value for invalid input.
 */
double wimax_decide(double rate,
                    double min_rate,
                    double rate_ceiling,
                    double threshold,
                    uint64_t sent,
                    uint64_t lost,
                    double decrease_factor,
                    double increase_step);

/**
 * Packet spacing in microseconds, or -1 for a non-positive rate or size.
 */
int64_t wimax_emission_interval_us(double rate, uint32_t packet_size);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WIMAX_QOE_H */
