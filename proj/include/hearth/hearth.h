/* Public C interface to the coordination kernel: trace replay, commit
 * store inspection, policy checking, and the lease-validation bench.
 * Handles are opaque; every function returns 0 on success or a negative
 * HEARTH_ERR_* code, with a thread-local message from
 * hearth_last_error(). Strings returned through char** are heap
 * allocated and released with hearth_string_free(). */

#ifndef HEARTH_H
#define HEARTH_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define HEARTH_OK 0
#define HEARTH_ERR_IO (-1)
#define HEARTH_ERR_PARSE (-2)
#define HEARTH_ERR_CORRUPT (-3)
#define HEARTH_ERR_UNKNOWN_COMMIT (-4)
#define HEARTH_ERR_ASSERT (-5)
#define HEARTH_ERR_INVALID_ARGUMENT (-6)
#define HEARTH_ERR_INTERNAL (-7)

/* Chain verification found a mismatching commit (not an error state). */
#define HEARTH_VERIFY_BAD_COMMIT 1

typedef struct hearth_store hearth_store_t;
typedef struct hearth_report hearth_report_t;

const char* hearth_version(void);
/* Message for the most recent failure on this thread. */
const char* hearth_last_error(void);
void hearth_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Trace replay                                                        */

typedef struct hearth_replay_options {
  uint64_t seed;
  int real_clock;        /* 0: deterministic virtual clock */
  double scale;          /* protocol ms per wall ms (real clock); 0 = default */
  const char* store_dir; /* NULL: throwaway temp store */
} hearth_replay_options_t;

int hearth_replay(const char* trace_path, const hearth_replay_options_t* options,
                  hearth_report_t** out);

int64_t hearth_report_counter(const hearth_report_t* r, const char* name);
double hearth_report_latency(const hearth_report_t* r, const char* name);
/* buf holds 64 hex chars plus NUL. */
int hearth_report_head(const hearth_report_t* r, char buf[65]);
int hearth_report_text(const hearth_report_t* r, char** out);
int hearth_report_json(const hearth_report_t* r, char** out);
void hearth_report_free(hearth_report_t* r);

/* ------------------------------------------------------------------ */
/* Commit store                                                        */

int hearth_store_open(const char* dir, hearth_store_t** out);
void hearth_store_close(hearth_store_t* s);
int hearth_store_head(const hearth_store_t* s, char buf[65]);
int hearth_store_depth(const hearth_store_t* s, uint64_t* out);
/* HEARTH_OK: every digest matches; HEARTH_VERIFY_BAD_COMMIT: first bad
 * commit hash written to bad_hash. */
int hearth_store_verify(const hearth_store_t* s, char bad_hash[65]);
/* Human-readable timeline. device and since_hash may be NULL. */
int hearth_store_log(const hearth_store_t* s, const char* device, const char* since_hash,
                     char** out);
int hearth_store_show(const hearth_store_t* s, const char* commit_hash, char** out_json);

/* ------------------------------------------------------------------ */
/* Policy and bench                                                    */

/* 0 when the file parses cleanly; otherwise the parse diagnostic is in
 * hearth_last_error(). */
int hearth_policy_check(const char* path);

typedef struct hearth_bench_result {
  double p50_us, p95_us, p99_us;                /* metadata-only path */
  double full_p50_us, full_p95_us, full_p99_us; /* with staleness probe */
  uint64_t chain_depth;
  uint64_t iterations;
} hearth_bench_result_t;

int hearth_bench_lease_validation(uint64_t iterations, uint64_t chain_depth,
                                  hearth_bench_result_t* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* HEARTH_H */
