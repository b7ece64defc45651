#ifndef RANKAUDIT_H
#define RANKAUDIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RaBaselineMode {
  RA_BASELINE_MODE_COMPACT = 0,
  RA_BASELINE_MODE_GAP = 1,
} RaBaselineMode;

typedef enum RaHitsScore {
  RA_HITS_SCORE_AUTHORITY = 0,
  RA_HITS_SCORE_HUB = 1,
} RaHitsScore;

typedef enum RaMethod {
  RA_METHOD_PAGE_RANK = 0,
  RA_METHOD_HITS = 1,
} RaMethod;

/**
 * Result code of every fallible call.
 */
typedef enum RaStatus {
  RA_STATUS_OK = 0,
  RA_STATUS_NULL_POINTER = 1,
  RA_STATUS_INVALID_UTF8 = 2,
  RA_STATUS_PARSE_ERROR = 3,
  RA_STATUS_INVALID_ARGUMENT = 4,
  RA_STATUS_NOT_FOUND = 5,
  RA_STATUS_RANKING_FAILED = 6,
  RA_STATUS_IO = 7,
  RA_STATUS_CORRUPT_CACHE = 8,
  RA_STATUS_FINGERPRINT_MISMATCH = 9,
  RA_STATUS_PANIC = 10,
} RaStatus;

/**
 * Completed audit together with the graph it was computed on.
 */
typedef struct RaAudit RaAudit;

/**
 * Parsed labeled graph.
 */
typedef struct RaGraph RaGraph;

/**
 * Ranking and baseline settings; fill with [`ra_config_default`] first.
 * `method`, `hits_score` and `mode` hold [`RaMethod`], [`RaHitsScore`] and
 * [`RaBaselineMode`] values; anything else is rejected.
 */
typedef struct RaConfig {
  uint32_t method;
  double damping;
  double tolerance;
  uint32_t max_iterations;
  uint32_t hits_score;
  uint32_t mode;
} RaConfig;

/**
 * Sensitivity indices of one removal.
 */
typedef struct RaRecord {
  uint32_t original_rank;
  uint64_t si;
  uint64_t si_pos;
  uint64_t si_neg;
} RaRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL. The pointer
 * stays valid until the next library call on the same thread.
 */
const char *ra_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void ra_string_free(char *s);

/**
 * Parses edge text (`source,target` rows) and optional label text
 * (`node,label` rows; NULL for none).
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum RaStatus ra_graph_parse(const char *edges,
                             const char *labels,
                             bool header,
                             struct RaGraph **out);

/**
 * # Safety
 * `g` must come from [`ra_graph_parse`] and not have been freed. NULL is ignored.
 */
void ra_graph_free(struct RaGraph *g);

/**
 * # Safety
 * `g` must be a live graph handle; out-pointers must be writable.
 */
enum RaStatus ra_graph_counts(const struct RaGraph *g, size_t *nodes, size_t *edges);

/**
 * In- and out-degree of `node`.
 *
 * # Safety
 * `g` must be a live graph handle, `node` NUL-terminated, out-pointers writable.
 */
enum RaStatus ra_graph_degree(const struct RaGraph *g,
                              const char *node,
                              size_t *in_degree,
                              size_t *out_degree);

/**
 * Fills `out` with PageRank, damping 0.85, tolerance 1e-8, 1000 iterations,
 * HITS authority scores and the compact baseline.
 *
 * # Safety
 * `out` must be writable.
 */
enum RaStatus ra_config_default(struct RaConfig *out);

/**
 * Runs the full removal sweep. `threads == 0` uses every available core.
 * The audit keeps its own copy of the graph.
 *
 * # Safety
 * `g` and `cfg` must be valid; `out` must be writable.
 */
enum RaStatus ra_audit_run(const struct RaGraph *g,
                           const struct RaConfig *cfg,
                           uint32_t threads,
                           struct RaAudit **out);

/**
 * Loads a cache file (gzip when the path ends in `.gz`) and checks that it
 * was computed from `g`.
 *
 * # Safety
 * `path` must be NUL-terminated, `g` a live graph handle, `out` writable.
 */
enum RaStatus ra_audit_read(const char *path, const struct RaGraph *g, struct RaAudit **out);

/**
 * # Safety
 * `a` must be a live audit handle and `path` NUL-terminated.
 */
enum RaStatus ra_audit_write(const struct RaAudit *a, const char *path);

/**
 * # Safety
 * `a` must come from this library and not have been freed. NULL is ignored.
 */
void ra_audit_free(struct RaAudit *a);

/**
 * Serialized cache document; free with [`ra_string_free`].
 *
 * # Safety
 * `a` must be a live audit handle; `out` must be writable.
 */
enum RaStatus ra_audit_to_json(const struct RaAudit *a, char **out);

/**
 * Hex fingerprint of graph and configuration; free with [`ra_string_free`].
 *
 * # Safety
 * `a` must be a live audit handle; `out` must be writable.
 */
enum RaStatus ra_audit_fingerprint(const struct RaAudit *a, char **out);

/**
 * Sensitivity indices for removing `node`.
 *
 * # Safety
 * `a` must be a live audit handle, `node` NUL-terminated, `out` writable.
 */
enum RaStatus ra_audit_record(const struct RaAudit *a, const char *node, struct RaRecord *out);

/**
 * Position change of `node` when `removed` is deleted; positive means it
 * moved up.
 *
 * # Safety
 * `a` must be a live audit handle, strings NUL-terminated, `out` writable.
 */
enum RaStatus ra_audit_delta(const struct RaAudit *a,
                             const char *removed,
                             const char *node,
                             int64_t *out);

/**
 * Full diagnosis of removing `node` as JSON. `k == 0` picks
 * `min(100, n - 1)`. Free the result with [`ra_string_free`].
 *
 * # Safety
 * `a` must be a live audit handle, `node` NUL-terminated, `out` writable.
 */
enum RaStatus ra_audit_report_json(const struct RaAudit *a,
                                   const char *node,
                                   uint32_t k,
                                   char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RANKAUDIT_H */
