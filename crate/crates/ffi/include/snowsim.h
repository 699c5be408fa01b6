#ifndef SNOWSIM_H
#define SNOWSIM_H

/* Generated by cbindgen from the snowsim-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SnowsimStatus {
  SNOWSIM_STATUS_OK = 0,
  SNOWSIM_STATUS_NULL_POINTER = 1,
  SNOWSIM_STATUS_INVALID_ARGUMENT = 2,
  SNOWSIM_STATUS_CONFIG = 3,
  SNOWSIM_STATUS_PROTOCOL = 4,
  SNOWSIM_STATUS_LOOKUP = 5,
  SNOWSIM_STATUS_DEPENDENCY = 6,
  SNOWSIM_STATUS_VALIDATION = 7,
  SNOWSIM_STATUS_DOMAIN = 8,
  /**
   * No parameter choice meets the requested bound.
   */
  SNOWSIM_STATUS_INFEASIBLE = 9,
  SNOWSIM_STATUS_PANIC = 10,
} SnowsimStatus;

typedef enum SnowsimStrategy {
  SNOWSIM_STRATEGY_NONE = 0,
  SNOWSIM_STRATEGY_REFUSE = 1,
  SNOWSIM_STRATEGY_BALANCE_KEEPER = 2,
  SNOWSIM_STRATEGY_MINORITY_PUSH = 3,
} SnowsimStrategy;

typedef enum SnowsimVariant {
  SNOWSIM_VARIANT_SLUSH = 0,
  SNOWSIM_VARIANT_SNOWFLAKE = 1,
  SNOWSIM_VARIANT_SNOWBALL = 2,
} SnowsimVariant;

typedef enum SnowsimColor {
  SNOWSIM_COLOR_RED = 0,
  SNOWSIM_COLOR_BLUE = 1,
  SNOWSIM_COLOR_UNSET = 2,
} SnowsimColor;

/**
 * Opaque Avalanche DAG of one node.
 */
typedef struct SnowsimDag SnowsimDag;

/**
 * Opaque single-node Snow state.
 */
typedef struct SnowsimSnow SnowsimSnow;

/**
 * Parameters found by [`snowsim_design`].
 */
typedef struct SnowsimDesign {
  uint64_t n;
  uint64_t b;
  uint64_t c;
  uint64_t k;
  uint64_t a;
  uint64_t beta;
  uint64_t delta;
  uint64_t s_ps;
  uint64_t phi;
  double eps;
  double c1_prob;
  double c2_prob;
  double failure_bound;
} SnowsimDesign;

/**
 * Summary of one [`snowsim_run`].
 */
typedef struct SnowsimRunSummary {
  uint64_t rounds_used;
  double per_node_iterations;
  uint64_t decided;
  uint64_t final_reds;
  uint64_t messages_sent;
  bool safety_violation;
} SnowsimRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *snowsim_version(void);

/**
 * Message of the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *snowsim_last_error(void);

/**
 * `P[X >= a]` for `X ~ Hypergeometric(n, x, k)`.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `double`.
 */
enum SnowsimStatus snowsim_hyper_tail(uint64_t n, uint64_t x, uint64_t k, uint64_t a, double *out);

/**
 * Absorption probability at all-blue and expected absorption steps for
 * the chain of `c` correct and `b` Byzantine nodes started at `start`
 * red nodes.
 *
 * # Safety
 * Output pointers must be null or writable.
 */
enum SnowsimStatus snowsim_absorption(uint64_t c,
                                      uint64_t b,
                                      uint64_t k,
                                      uint64_t a,
                                      uint64_t start,
                                      double *out_blue,
                                      double *out_steps);

/**
 * Safety design for `n` nodes with `b` Byzantine at failure budget `eps`
 * over `phi` rounds, holding `k` fixed. Returns
 * [`SnowsimStatus::Infeasible`] when no design exists.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SnowsimStatus snowsim_design(uint64_t n,
                                  uint64_t b,
                                  uint64_t k,
                                  double eps,
                                  uint64_t phi,
                                  struct SnowsimDesign *out);

/**
 * One global-scheduler run. Slush requires `b = 0`, stops at unanimity,
 * and reads `beta` as its per-node round budget; the other variants run
 * until every correct node decided or `phi` rounds passed.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SnowsimStatus snowsim_run(uint64_t c,
                               uint64_t b,
                               uint32_t k,
                               uint32_t a,
                               uint32_t beta,
                               uint64_t phi,
                               enum SnowsimStrategy strategy,
                               enum SnowsimVariant variant,
                               uint64_t initial_reds,
                               uint64_t seed,
                               struct SnowsimRunSummary *out);

/**
 * Creates a node state with initial color `color`.
 *
 * # Safety
 * `out` must be null or writable; the handle is released with
 * [`snowsim_snow_free`].
 */
enum SnowsimStatus snowsim_snow_new(enum SnowsimVariant variant,
                                    enum SnowsimColor color,
                                    uint32_t k,
                                    uint32_t a,
                                    uint32_t beta,
                                    struct SnowsimSnow **out);

/**
 * Feeds one sample result of `red` and `blue` answers.
 *
 * # Safety
 * `h` must be a live handle from [`snowsim_snow_new`].
 */
enum SnowsimStatus snowsim_snow_on_sample(struct SnowsimSnow *h, uint32_t red, uint32_t blue);

/**
 * Current color and decision (`Unset` while undecided).
 *
 * # Safety
 * `h` must be a live handle; output pointers must be null or writable.
 */
enum SnowsimStatus snowsim_snow_state(const struct SnowsimSnow *h,
                                      enum SnowsimColor *out_color,
                                      enum SnowsimColor *out_decided);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void snowsim_snow_free(struct SnowsimSnow *h);

/**
 * Creates a DAG whose genesis vertex has `genesis_outputs` outputs.
 *
 * # Safety
 * `out` must be null or writable; release with [`snowsim_dag_free`].
 */
enum SnowsimStatus snowsim_dag_new(uint32_t k,
                                   uint32_t a,
                                   uint32_t beta1,
                                   uint32_t beta2,
                                   uint32_t genesis_outputs,
                                   struct SnowsimDag **out);

/**
 * Issues a transaction with payload `data` spending genesis output
 * `output`, and writes the 32-byte id of its vertex to `out_id`.
 *
 * # Safety
 * `h` must be a live handle, `data` must point to `len` readable bytes
 * (or be null with `len = 0`), and `out_id` to 32 writable bytes.
 */
enum SnowsimStatus snowsim_dag_spend_genesis(struct SnowsimDag *h,
                                             const uint8_t *data,
                                             size_t len,
                                             uint32_t output,
                                             uint8_t *out_id);

/**
 * Records the query result for a vertex; writes how many vertices became
 * accepted.
 *
 * # Safety
 * `h` must be a live handle, `id` must point to 32 readable bytes.
 */
enum SnowsimStatus snowsim_dag_record_query(struct SnowsimDag *h,
                                            const uint8_t *id,
                                            uint32_t yes_votes,
                                            size_t *out_accepted);

/**
 * Confidence and acceptance of a vertex.
 *
 * # Safety
 * `h` must be a live handle, `id` must point to 32 readable bytes, and
 * output pointers must be null or writable.
 */
enum SnowsimStatus snowsim_dag_vertex(const struct SnowsimDag *h,
                                      const uint8_t *id,
                                      uint64_t *out_confidence,
                                      bool *out_accepted);

/**
 * Number of vertices, genesis included; 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t snowsim_dag_len(const struct SnowsimDag *h);

/**
 * The DAG as JSON lines. Free the string with [`snowsim_string_free`].
 *
 * # Safety
 * `h` must be a live handle and `out` null or writable.
 */
enum SnowsimStatus snowsim_dag_export(const struct SnowsimDag *h, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void snowsim_string_free(char *s);

/**
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void snowsim_dag_free(struct SnowsimDag *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNOWSIM_H */
