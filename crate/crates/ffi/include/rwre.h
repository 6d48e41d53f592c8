#ifndef RWRE_H
#define RWRE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum RwreStatus {
  RWRE_STATUS_OK = 0,
  RWRE_STATUS_NULL_POINTER = 1,
  RWRE_STATUS_INVALID_UTF8 = 2,
  RWRE_STATUS_INVALID_ARGUMENT = 3,
  RWRE_STATUS_INVALID_SPEC = 4,
  RWRE_STATUS_INVALID_CONFIG = 5,
  RWRE_STATUS_INVALID_INSTANCE = 6,
  RWRE_STATUS_SCAN_BUDGET_EXCEEDED = 7,
  RWRE_STATUS_UNREACHED = 8,
  RWRE_STATUS_REJECTION_BUDGET_EXCEEDED = 9,
  RWRE_STATUS_TAIL_NOT_CONVERGED = 10,
  RWRE_STATUS_SINGULAR_SYSTEM = 11,
  RWRE_STATUS_PATH_INVALID = 12,
  RWRE_STATUS_NUMERIC_RANGE = 13,
  RWRE_STATUS_IO = 14,
  RWRE_STATUS_JSON = 15,
  RWRE_STATUS_PANIC = 16,
} RwreStatus;

// The walk restricted to a box with reflecting walls.
typedef struct RwreChain RwreChain;

// An environment; shared by chains and walks created from it.
typedef struct RwreEnvironment RwreEnvironment;

// Valley landmarks for one horizon. `found` is false when the environment
// has no valley; the other fields are then zero.
typedef struct RwreLandmarks {
  bool found;
  uint64_t big_m;
  uint64_t m_n;
  double delta_n;
  bool c1;
  bool c2;
  bool c3;
} RwreLandmarks;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *rwre_version(void);

// Message of the last failed call on this thread, or NULL. Valid until
// the next call into the library from the same thread.
const char *rwre_last_error(void);

// Build an environment from a JSON spec such as
// `{"d":2,"increment_law":{"kind":"rademacher"},"delta_law":{"kind":"zero"},"seed":1}`.
//
// # Safety
// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
enum RwreStatus rwre_env_new(const char *spec_json, struct RwreEnvironment **out);

// # Safety
// `env` must come from [`rwre_env_new`] and not be used afterwards. NULL is
// ignored.
void rwre_env_free(struct RwreEnvironment *env);

// # Safety
// Pointers must be valid.
enum RwreStatus rwre_env_dim(const struct RwreEnvironment *env, uint32_t *out);

// `S_k`.
//
// # Safety
// Pointers must be valid.
enum RwreStatus rwre_env_s_value(const struct RwreEnvironment *env, int64_t k, double *out);

// `V(x)` at the site with `d` coordinates `coords`.
//
// # Safety
// `coords` must point to `d` integers; other pointers must be valid.
enum RwreStatus rwre_env_potential(const struct RwreEnvironment *env,
                                   const int32_t *coords,
                                   uintptr_t d,
                                   double *out);

// Capacitance `pi(x)` on the full lattice.
//
// # Safety
// As [`rwre_env_potential`].
enum RwreStatus rwre_env_capacitance(const struct RwreEnvironment *env,
                                     const int32_t *coords,
                                     uintptr_t d,
                                     double *out);

// Landmarks at horizon `n` with default parameters.
//
// # Safety
// Pointers must be valid.
enum RwreStatus rwre_env_landmarks(const struct RwreEnvironment *env,
                                   uint64_t n,
                                   struct RwreLandmarks *out);

// Run `n` steps from `start` and write the local time of shells
// `0..len` into `counts`. `shells` receives the number of shells reached,
// which may exceed `len`.
//
// # Safety
// `start` must point to `d` integers and `counts` to `len` writable slots.
enum RwreStatus rwre_walk_shells(const struct RwreEnvironment *env,
                                 const int32_t *start,
                                 uintptr_t d,
                                 uint64_t n,
                                 uint64_t seed,
                                 uint64_t *counts,
                                 uintptr_t len,
                                 uintptr_t *shells);

// Reflecting restriction of the walk to `B_radius`.
//
// # Safety
// Pointers must be valid.
enum RwreStatus rwre_chain_new(const struct RwreEnvironment *env,
                               uint32_t radius,
                               struct RwreChain **out);

// # Safety
// `chain` must come from [`rwre_chain_new`]. NULL is ignored.
void rwre_chain_free(struct RwreChain *chain);

// # Safety
// Pointers must be valid.
enum RwreStatus rwre_chain_len(const struct RwreChain *chain, uintptr_t *out);

// State index of a site.
//
// # Safety
// `coords` must point to `d` integers; other pointers must be valid.
enum RwreStatus rwre_chain_index(const struct RwreChain *chain,
                                 const int32_t *coords,
                                 uintptr_t d,
                                 uintptr_t *out);

// `h(x) = P_x(hit target before avoid)` for every state, written to
// `values` (length at least the chain length).
//
// # Safety
// `target` and `avoid` must point to `n_target` and `n_avoid` indices;
// `values` to `len` writable doubles.
enum RwreStatus rwre_chain_hitting(const struct RwreChain *chain,
                                   const uintptr_t *target,
                                   uintptr_t n_target,
                                   const uintptr_t *avoid,
                                   uintptr_t n_avoid,
                                   double *values,
                                   uintptr_t len);

// Run an experiment command (`env_dump`, `walk_run`, `levelsets`,
// `landmarks`, `quenched`, `annealed`, `oracle`) on a JSON configuration.
// The JSON report is returned in `out` and must be released with
// [`rwre_string_free`].
//
// # Safety
// Strings must be NUL-terminated; `out` must be valid.
enum RwreStatus rwre_run_json(const char *command, const char *config_json, char **out);

// # Safety
// `s` must come from this library. NULL is ignored.
void rwre_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RWRE_H */
