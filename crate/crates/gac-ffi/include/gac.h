/* C interface of the generative actor-critic laboratory. */

#ifndef GAC_H
#define GAC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Kernel selectors accepted by `gac_mmd_estimate`; `sigma` only applies
 * to the Gaussian kernel.
 */
typedef enum {
  GacKernel_EnergySquared = 0,
  GacKernel_Energy = 1,
  GacKernel_Gaussian = 2,
} GacKernel;

/**
 * Result code of every fallible call.
 */
typedef enum {
  GacStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  GacStatus_NullArgument = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  GacStatus_Utf8 = 2,
  /**
   * Rejected input: unknown name, wrong buffer length, bad numeric value.
   */
  GacStatus_InvalidArgument = 3,
  GacStatus_Io = 4,
  /**
   * A checkpoint file was missing, tampered with, or incompatible.
   */
  GacStatus_Checkpoint = 5,
  /**
   * A computation produced a non-finite number.
   */
  GacStatus_Numeric = 6,
  /**
   * An internal invariant failed; the handle may be unusable.
   */
  GacStatus_Internal = 7,
} GacStatus;

/**
 * Opaque environment handle: one environment instance plus its episode
 * RNG.
 */
typedef struct GacEnv GacEnv;

/**
 * Opaque policy handle: a trained agent restored from a checkpoint, the
 * run's frozen observation statistics, and a private latent RNG.
 */
typedef struct GacPolicy GacPolicy;

/**
 * Scalar results of one environment step; the next observation goes to
 * the caller's buffer.
 */
typedef struct {
  double reward;
  /**
   * True end state (the bootstrap mask), not the step limit.
   */
  bool terminal;
  /**
   * Episode cut off by the step limit.
   */
  bool truncated;
} GacStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread; the string is
 * empty if nothing has failed yet.
 */
const char *gac_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gac_version(void);

/**
 * Creates an environment by name: "bimodal_bandit", "multigoal", or
 * "pendulum". `seed` drives episode resets; `reward_scale` is carried in
 * the spec for training code and does not change the rewards this
 * interface returns.
 */
GacStatus gac_env_new(const char *name, double reward_scale, uint64_t seed, GacEnv **out);

/**
 * Releases an environment handle; null is a no-op.
 */
void gac_env_free(GacEnv *env);

/**
 * Observation dimension, or 0 for a null handle.
 */
size_t gac_env_state_dim(const GacEnv *env);

/**
 * Action dimension, or 0 for a null handle.
 */
size_t gac_env_action_dim(const GacEnv *env);

/**
 * Episode step limit, or 0 for a null handle.
 */
uint64_t gac_env_max_episode_steps(const GacEnv *env);

/**
 * Writes the per-component raw action bounds into two buffers of `len`
 * elements; `len` must equal the action dimension.
 */
GacStatus gac_env_action_bounds(const GacEnv *env, double *out_low, double *out_high, size_t len);

/**
 * Starts a new episode, writing the initial raw observation into
 * `out_obs`; `obs_len` must equal the state dimension.
 */
GacStatus gac_env_reset(GacEnv *env, double *out_obs, size_t obs_len);

/**
 * Advances one step on a raw action (components outside the bounds are
 * clipped), writing the next raw observation and the step's scalar
 * results. After a terminal or truncated step, call `gac_env_reset`
 * before stepping again.
 */
GacStatus gac_env_step(GacEnv *env,
                       const double *action,
                       size_t action_len,
                       double *out_obs,
                       size_t obs_len,
                       GacStep *out_step);

/**
 * Loads a trained policy (actor network plus the run's frozen observation
 * statistics) from a checkpoint file. `seed` drives the latent draws of
 * `gac_policy_act`.
 */
GacStatus gac_policy_load(const char *path, uint64_t seed, GacPolicy **out);

/**
 * Releases a policy handle; null is a no-op.
 */
void gac_policy_free(GacPolicy *policy);

/**
 * Observation dimension the policy expects, or 0 for a null handle.
 */
size_t gac_policy_state_dim(const GacPolicy *policy);

/**
 * Raw action dimension the policy produces, or 0 for a null handle.
 */
size_t gac_policy_action_dim(const GacPolicy *policy);

/**
 * Copies the policy's NUL-terminated environment name into `buf`.
 */
GacStatus gac_policy_env_name(const GacPolicy *policy, char *buf, size_t buf_len);

/**
 * One action from a raw observation: the observation is normalized with
 * the checkpoint's frozen statistics, the latent draw uses `latent_sigma`
 * (0 gives the deterministic center action), and the result is written in
 * raw environment units. `obs_len` and `action_len` must match the
 * policy's dimensions.
 */
GacStatus gac_policy_act(GacPolicy *policy,
                         const double *obs,
                         size_t obs_len,
                         double latent_sigma,
                         double *out_action,
                         size_t action_len);

/**
 * MMD between two sample sets laid out row-major as `rows x dim`.
 * `kernel` is one of the `GacKernel` values; `sigma` is the Gaussian
 * bandwidth and is ignored by the other kernels.
 */
GacStatus gac_mmd_estimate(const double *x,
                           size_t x_rows,
                           const double *y,
                           size_t y_rows,
                           size_t dim,
                           uint32_t kernel,
                           double sigma,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAC_H */
