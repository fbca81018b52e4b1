#ifndef SPM_DSE_H
#define SPM_DSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SPM_FAMILY_SMP 1

#define SPM_FAMILY_SEP 2

#define SPM_FAMILY_HY 4

/**
 * Which power-gating variants to enumerate.
 */
typedef enum SpmPgMode {
  SPM_PG_MODE_BOTH = 0,
  SPM_PG_MODE_ONLY_GATED = 1,
  SPM_PG_MODE_ONLY_UNGATED = 2,
} SpmPgMode;

/**
 * Result of every call.
 */
typedef enum SpmStatus {
  SPM_STATUS_OK = 0,
  SPM_STATUS_NULL_ARGUMENT = 1,
  SPM_STATUS_PARSE = 2,
  SPM_STATUS_VALIDATION = 3,
  SPM_STATUS_EVALUATION = 4,
  SPM_STATUS_IO = 5,
  SPM_STATUS_USAGE = 6,
  SPM_STATUS_OUT_OF_RANGE = 7,
  SPM_STATUS_PANIC = 8,
} SpmStatus;

/**
 * Loaded cost table.
 */
typedef struct SpmCostTable SpmCostTable;

/**
 * Results of one exploration.
 */
typedef struct SpmExploration SpmExploration;

/**
 * Loaded workload trace.
 */
typedef struct SpmWorkload SpmWorkload;

typedef struct SpmPeakUsage {
  uint64_t max_data;
  uint64_t max_weight;
  uint64_t max_acc;
  uint64_t max_sum;
} SpmPeakUsage;

/**
 * Exploration limits. Zero means "no limit" / "default" in every field.
 */
typedef struct SpmConstraints {
  uint64_t max_shared_size;
  uint8_t shared_ports;
  /**
   * Bit set of `SPM_FAMILY_*`.
   */
  uint32_t families;
  enum SpmPgMode power_gating;
  uint32_t banks;
} SpmConstraints;

/**
 * One evaluated configuration. Arrays are indexed shared, data, weight, acc;
 * absent memories have size 0.
 */
typedef struct SpmResult {
  uint64_t config_id;
  /**
   * 0 SMP, 1 SEP, 2 HY.
   */
  uint32_t kind;
  bool power_gated;
  uint64_t size_b[4];
  uint32_t sectors[4];
  uint8_t ports[4];
  double area_mm2;
  double energy_j;
  double dynamic_j;
  double static_j;
  double wakeup_j;
  uint8_t required_shared_ports;
} SpmResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a workload JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SpmStatus spm_workload_load(const char *path, struct SpmWorkload **out);

/**
 * # Safety
 * `w` must come from [`spm_workload_load`] or be null.
 */
void spm_workload_free(struct SpmWorkload *w);

/**
 * # Safety
 * Pointers must be valid.
 */
enum SpmStatus spm_workload_operation_count(const struct SpmWorkload *w, size_t *out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum SpmStatus spm_workload_peak(const struct SpmWorkload *w, struct SpmPeakUsage *out);

/**
 * SMP shared size and SEP (data, weight, acc) sizes in bytes.
 *
 * # Safety
 * `w` must be valid; `smp` and `sep` must point to 1 and 3 `uint64_t`.
 */
enum SpmStatus spm_workload_sizing(const struct SpmWorkload *w, uint64_t *smp, uint64_t *sep);

/**
 * Number of configurations an exploration would evaluate. `c` may be null.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SpmStatus spm_count_configurations(const struct SpmWorkload *w,
                                        const struct SpmConstraints *c,
                                        uint64_t *out);

/**
 * Loads a cost-table JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SpmStatus spm_cost_table_load(const char *path, struct SpmCostTable **out);

/**
 * # Safety
 * `t` must come from [`spm_cost_table_load`] or be null.
 */
void spm_cost_table_free(struct SpmCostTable *t);

/**
 * Evaluates every configuration. `c` may be null; `jobs` 0 uses all cores.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SpmStatus spm_explore(const struct SpmWorkload *w,
                           const struct SpmCostTable *t,
                           const struct SpmConstraints *c,
                           size_t jobs,
                           struct SpmExploration **out);

/**
 * # Safety
 * `e` must come from [`spm_explore`] or be null.
 */
void spm_exploration_free(struct SpmExploration *e);

/**
 * # Safety
 * Pointers must be valid.
 */
enum SpmStatus spm_exploration_len(const struct SpmExploration *e, size_t *out);

/**
 * Copies result `index` (which equals its config id).
 *
 * # Safety
 * Pointers must be valid.
 */
enum SpmStatus spm_exploration_get(const struct SpmExploration *e,
                                   size_t index,
                                   struct SpmResult *out);

/**
 * Writes up to `cap` Pareto-optimal config ids to `ids` and the full front
 * size to `len`. Call with `cap` 0 to size the buffer.
 *
 * # Safety
 * `ids` must hold `cap` elements (may be null when `cap` is 0).
 */
enum SpmStatus spm_exploration_pareto(const struct SpmExploration *e,
                                      uint64_t *ids,
                                      size_t cap,
                                      size_t *len);

/**
 * Writes the report bundle of an exploration to `dir`.
 *
 * # Safety
 * Pointers must be valid and `dir` NUL-terminated.
 */
enum SpmStatus spm_exploration_write_report(const struct SpmExploration *e,
                                            const struct SpmWorkload *w,
                                            const struct SpmCostTable *t,
                                            const char *dir);

/**
 * Copies the calling thread's last error message into `buf` (always
 * NUL-terminated when `cap > 0`) and returns its full length in bytes.
 *
 * # Safety
 * `buf` must hold `cap` bytes (may be null when `cap` is 0).
 */
size_t spm_last_error(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *spm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPM_DSE_H */
