#ifndef PUSHSUM_FFI_H
#define PUSHSUM_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum PushsumStatus {
  PUSHSUM_STATUS_OK = 0,
  PUSHSUM_STATUS_NULL_POINTER = 1,
  PUSHSUM_STATUS_INVALID_ARGUMENT = 2,
  PUSHSUM_STATUS_GRAPH = 3,
  PUSHSUM_STATUS_WEIGHTS = 4,
  PUSHSUM_STATUS_ENGINE = 5,
  PUSHSUM_STATUS_ATTACK = 6,
  PUSHSUM_STATUS_NUMERICS = 7,
  PUSHSUM_STATUS_BUFFER_TOO_SMALL = 8,
  PUSHSUM_STATUS_PANIC = 9,
} PushsumStatus;

/*
 Opaque directed graph.
 */
typedef struct PushsumGraph PushsumGraph;

/*
 Opaque recorded run.
 */
typedef struct PushsumRun PushsumRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *pushsum_last_error(void);

/*
 Builds a graph from 1-based edge lists `from[i] -> to[i]`.
 */
enum PushsumStatus pushsum_graph_new(size_t n,
                                     const uint32_t *from,
                                     const uint32_t *to,
                                     size_t edge_count,
                                     struct PushsumGraph **out);

/*
 The built-in 5-agent network.
 */
enum PushsumStatus pushsum_graph_five_agent(struct PushsumGraph **out);

/*
 Directed ring plus `extra_out` random out-neighbors per agent.
 */
enum PushsumStatus pushsum_graph_ring_plus_random(size_t n,
                                                  size_t extra_out,
                                                  uint64_t seed,
                                                  struct PushsumGraph **out);

void pushsum_graph_free(struct PushsumGraph *g);

/*
 Number of agents, or 0 for a null handle.
 */
size_t pushsum_graph_agent_count(const struct PushsumGraph *g);

/*
 Number of edges, or 0 for a null handle.
 */
size_t pushsum_graph_edge_count(const struct PushsumGraph *g);

/*
 1 if strongly connected, 0 otherwise or for a null handle.
 */
int32_t pushsum_graph_is_strongly_connected(const struct PushsumGraph *g);

/*
 Runs private push-sum for `rounds` rounds with default weight and
 perturbation distributions. `x0` is agent-major with `n * dim` entries.
 */
enum PushsumStatus pushsum_run_private(const struct PushsumGraph *g,
                                       const double *x0,
                                       size_t dim,
                                       size_t horizon,
                                       double eta,
                                       size_t rounds,
                                       uint64_t seed,
                                       struct PushsumRun **out);

void pushsum_run_free(struct PushsumRun *r);

/*
 Rounds executed, or 0 for a null handle.
 */
size_t pushsum_run_rounds(const struct PushsumRun *r);

/*
 Copies `x`, `y`, `z` at `round`. `x` and `z` need `n * dim` entries, `y`
 needs `n`; any of them may be null to skip it.
 */
enum PushsumStatus pushsum_run_state(const struct PushsumRun *r,
                                     size_t round,
                                     double *x,
                                     size_t x_len,
                                     double *y,
                                     size_t y_len,
                                     double *z,
                                     size_t z_len);

/*
 Writes `e(k)` for `k = 0..=rounds` (needs `rounds + 1` entries).
 */
enum PushsumStatus pushsum_run_consensus_error(const struct PushsumRun *r, double *out, size_t len);

/*
 Least-squares estimate of `target`'s initial value by the coalition
 `members` from its first `m + 1` rounds of observations.
 */
enum PushsumStatus pushsum_attack_hbc(const struct PushsumRun *r,
                                      const uint32_t *members,
                                      size_t member_count,
                                      uint32_t target,
                                      size_t m,
                                      double *estimate,
                                      size_t *rank);

/*
 Eavesdropper least-squares estimate of `target`'s initial value.
 */
enum PushsumStatus pushsum_attack_eve(const struct PushsumRun *r,
                                      uint32_t target,
                                      size_t m,
                                      double *estimate);

/*
 Minimum-norm least squares for a row-major `rows x cols` matrix. `x`
 needs `cols` entries; `rank` and `residual` may be null.
 */
enum PushsumStatus pushsum_min_norm_lstsq(size_t rows,
                                          size_t cols,
                                          const double *a,
                                          const double *b,
                                          double *x,
                                          size_t x_len,
                                          size_t *rank,
                                          double *residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PUSHSUM_FFI_H */
