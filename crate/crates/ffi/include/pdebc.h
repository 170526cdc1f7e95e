#ifndef PDEBC_H
#define PDEBC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum PdebcStatus {
  PDEBC_STATUS_OK = 0,
  PDEBC_STATUS_NULL_POINTER = 1,
  PDEBC_STATUS_CONFIG = 2,
  PDEBC_STATUS_INPUT = 3,
  PDEBC_STATUS_STATE = 4,
  PDEBC_STATUS_BLOW_UP = 5,
  PDEBC_STATUS_BUFFER_TOO_SMALL = 6,
  PDEBC_STATUS_PANIC = 7,
  PDEBC_STATUS_OTHER = 8,
} PdebcStatus;

// Opaque environment handle.
typedef struct PdebcEnv PdebcEnv;

// Scalars produced by one step.
typedef struct PdebcStepResult {
  double reward;
  double l2;
  double applied_action;
  bool terminated;
  bool truncated;
} PdebcStepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates an environment from a NUL-terminated JSON document.
//
// # Safety
// `config_json` must be a valid C string and `out` a valid pointer.
enum PdebcStatus pdebc_env_new(const char *config_json, struct PdebcEnv **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `env` must come from [`pdebc_env_new`] and not be used afterwards.
void pdebc_env_free(struct PdebcEnv *env);

// Number of doubles in an observation (0 for a null handle).
//
// # Safety
// `env` must be null or a live handle.
size_t pdebc_env_observation_len(const struct PdebcEnv *env);

// Number of control steps in a full episode (0 for a null handle).
//
// # Safety
// `env` must be null or a live handle.
size_t pdebc_env_episode_steps(const struct PdebcEnv *env);

// # Safety
// `env` must be a live handle; `lo` and `hi` valid pointers.
enum PdebcStatus pdebc_env_action_bounds(const struct PdebcEnv *env, double *lo, double *hi);

// Starts an episode and writes the first observation.
//
// # Safety
// `env` must be a live handle and `obs` point to `obs_len` writable doubles.
enum PdebcStatus pdebc_env_reset(struct PdebcEnv *env, uint64_t seed, double *obs, size_t obs_len);

// Advances one control step, writing the next observation and the step scalars.
//
// # Safety
// `env` must be a live handle, `obs` point to `obs_len` writable doubles and `result` be valid.
enum PdebcStatus pdebc_env_step(struct PdebcEnv *env,
                                double action,
                                double *obs,
                                size_t obs_len,
                                struct PdebcStepResult *result);

// Copies the last error message of this thread into `buf` (NUL-terminated, truncated to fit).
//
// Returns the full message length excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t pdebc_last_error(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDEBC_H */
