#ifndef ALB_H
#define ALB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  ALB_STATUS_OK = 0,
  ALB_STATUS_INVALID_ARGUMENT = 1,
  ALB_STATUS_CONFIG = 2,
  ALB_STATUS_INGESTION = 3,
  ALB_STATUS_BUDGET = 4,
  ALB_STATUS_NUMERIC = 5,
  ALB_STATUS_IO = 6,
  ALB_STATUS_PANIC = 7,
} AlbStatus;

// A prepared experiment (config plus any loaded dataset).
typedef struct AlbExperiment AlbExperiment;

// A policy driven step by step from the caller.
typedef struct AlbPolicy AlbPolicy;

// The per-step record of one completed run.
typedef struct AlbRun AlbRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after success.
// Valid until the next call into the library on this thread.
const char *alb_last_error_message(void);

// NUL-terminated library version.
const char *alb_version(void);

// Parses and validates a TOML experiment configuration, loading any replay
// dataset it names.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
AlbStatus alb_experiment_from_toml(const char *toml, AlbExperiment **out);

// # Safety
// `exp` must come from `alb_experiment_from_toml` and not be used again.
void alb_experiment_free(AlbExperiment *exp);

// Number of hyperparameter grid points.
//
// # Safety
// `exp` must be a live handle; `out` must be writable.
AlbStatus alb_experiment_grid_points(const AlbExperiment *exp, uintptr_t *out);

// Runs grid point `point` with master seed `seed`.
//
// # Safety
// `exp` must be a live handle; `out` must be writable.
AlbStatus alb_experiment_run(const AlbExperiment *exp,
                             uintptr_t point,
                             uint64_t seed,
                             AlbRun **out);

// # Safety
// `run` must come from `alb_experiment_run` and not be used again.
void alb_run_free(AlbRun *run);

// Number of steps in the run; 0 for a null handle.
//
// # Safety
// `run` must be null or a live handle.
uintptr_t alb_run_len(const AlbRun *run);

// Copies the instantaneous regrets into `buf`, which must hold `len` values
// with `len` at least the run length.
//
// # Safety
// `run` must be a live handle; `buf` must be writable for `len` doubles.
AlbStatus alb_run_regrets(const AlbRun *run, double *buf, uintptr_t len);

// Final cumulative regret.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
AlbStatus alb_run_cumulative_regret(const AlbRun *run, double *out);

// Writes the run as a per-step CSV file (header included).
//
// # Safety
// `run` must be a live handle; `path` a NUL-terminated string.
AlbStatus alb_run_write_csv(const AlbRun *run, const char *path);

// Creates a policy by name: `"alb"`, `"egreedy"` or `"random"`. `lambda`
// regularizes both factors; `sigma` is used by ALB, `epsilon` by
// ε-greedy. `seed` drives initialization and policy randomness.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
AlbStatus alb_policy_new(const char *name,
                         uintptr_t n_users,
                         uintptr_t n_items,
                         uintptr_t rank,
                         double lambda,
                         double sigma,
                         double epsilon,
                         uint64_t seed,
                         AlbPolicy **out);

// # Safety
// `policy` must come from `alb_policy_new` and not be used again.
void alb_policy_free(AlbPolicy *policy);

// Chooses an item for `user` among `candidates`. When `scores` is non-null
// it receives one score per candidate.
//
// # Safety
// `policy` must be a live handle; `candidates` readable for `n` values;
// `scores` null or writable for `n` doubles; `out_item` writable.
AlbStatus alb_policy_select(AlbPolicy *policy,
                            uintptr_t user,
                            const uintptr_t *candidates,
                            uintptr_t n,
                            double *scores,
                            uintptr_t *out_item);

// Feeds back the rating `user` gave to `item`.
//
// # Safety
// `policy` must be a live handle.
AlbStatus alb_policy_observe(AlbPolicy *policy, uintptr_t user, uintptr_t item, double rating);

// NDCG@k of the ranking induced by `scores` (descending, ties to the lower
// position) against `relevance`, both of length `n`.
//
// # Safety
// `scores` and `relevance` readable for `n` doubles; `out` writable.
AlbStatus alb_ndcg_at_k(const double *scores,
                        const double *relevance,
                        uintptr_t n,
                        uintptr_t k,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ALB_H */
