//! C ABI over the core crate: create environments, load trained policies
//! from checkpoints, and score sample sets with the MMD estimator.
//!
//! Every fallible call returns a [`GacStatus`]; 0 means success. On failure
//! the call stores a message retrievable with [`gac_last_error`], valid on
//! the calling thread until the next failure there. Handles are opaque and
//! must be released with their `_free` function, which accepts null. The
//! generated header lives at `include/gac.h` and is refreshed by the build
//! script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use rand_chacha::ChaCha8Rng;

use gac::agent::core::ActNoise;
use gac::agent::Trainer;
use gac::diffcore::Tensor;
use gac::envs::{make_env, Env};
use gac::harness::checkpoint;
use gac::harness::stream;
use gac::mmd::{mmd_estimate, KernelSpec};
use gac::GacError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GacStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// Rejected input: unknown name, wrong buffer length, bad numeric value.
    InvalidArgument = 3,
    Io = 4,
    /// A checkpoint file was missing, tampered with, or incompatible.
    Checkpoint = 5,
    /// A computation produced a non-finite number.
    Numeric = 6,
    /// An internal invariant failed; the handle may be unusable.
    Internal = 7,
}

/// Kernel selectors accepted by `gac_mmd_estimate`; `sigma` only applies
/// to the Gaussian kernel.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GacKernel {
    EnergySquared = 0,
    Energy = 1,
    Gaussian = 2,
}

/// Opaque environment handle: one environment instance plus its episode
/// RNG.
pub struct GacEnv {
    env: Box<dyn Env>,
    rng: ChaCha8Rng,
}

/// Opaque policy handle: a trained agent restored from a checkpoint, the
/// run's frozen observation statistics, and a private latent RNG.
pub struct GacPolicy {
    trainer: Trainer,
    rng: ChaCha8Rng,
}

/// Scalar results of one environment step; the next observation goes to
/// the caller's buffer.
#[repr(C)]
pub struct GacStep {
    pub reward: f64,
    /// True end state (the bootstrap mask), not the step limit.
    pub terminal: bool,
    /// Episode cut off by the step limit.
    pub truncated: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: GacStatus, msg: &str) -> GacStatus {
    let owned = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
    status
}

fn fail_with(err: &GacError) -> GacStatus {
    let status = match err {
        GacError::InvalidArgument(_) | GacError::Config(_) | GacError::ShapeMismatch { .. } => {
            GacStatus::InvalidArgument
        }
        GacError::Io { .. } => GacStatus::Io,
        GacError::Checkpoint(_) => GacStatus::Checkpoint,
        GacError::NonFiniteGradient { .. } => GacStatus::Numeric,
        GacError::NonScalarOutput { .. } | GacError::Metrics(_) => GacStatus::Internal,
    };
    fail(status, &err.to_string())
}

fn guarded<F: FnOnce() -> GacStatus>(body: F) -> GacStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(GacStatus::Internal, "panic across the C boundary"),
    }
}

macro_rules! try_mut {
    ($ptr:expr, $what:expr) => {
        match unsafe { $ptr.as_mut() } {
            Some(r) => r,
            None => return fail(GacStatus::NullArgument, concat!($what, " is null")),
        }
    };
}

fn utf8<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, GacStatus> {
    if ptr.is_null() {
        return Err(fail(GacStatus::NullArgument, &format!("{what} is null")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| fail(GacStatus::Utf8, &format!("{what} is not valid UTF-8")))
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; the string is
/// empty if nothing has failed yet.
#[no_mangle]
pub extern "C" fn gac_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an environment by name: "bimodal_bandit", "multigoal", or
/// "pendulum". `seed` drives episode resets; `reward_scale` is carried in
/// the environment description for training code and does not change the
/// rewards this interface returns.
#[no_mangle]
pub extern "C" fn gac_env_new(
    name: *const c_char,
    reward_scale: f64,
    seed: u64,
    out: *mut *mut GacEnv,
) -> GacStatus {
    guarded(|| {
        let out = try_mut!(out, "out");
        let name = match utf8(name, "name") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match make_env(name, reward_scale) {
            Ok(env) => {
                *out = Box::into_raw(Box::new(GacEnv { env, rng: stream(seed, "ffi-env") }));
                GacStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Releases an environment handle; null is a no-op.
#[no_mangle]
pub extern "C" fn gac_env_free(env: *mut GacEnv) {
    if !env.is_null() {
        drop(unsafe { Box::from_raw(env) });
    }
}

/// Observation dimension, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn gac_env_state_dim(env: *const GacEnv) -> usize {
    unsafe { env.as_ref() }.map_or(0, |e| e.env.spec().state_dim)
}

/// Action dimension, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn gac_env_action_dim(env: *const GacEnv) -> usize {
    unsafe { env.as_ref() }.map_or(0, |e| e.env.spec().action_dim)
}

/// Episode step limit, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn gac_env_max_episode_steps(env: *const GacEnv) -> u64 {
    unsafe { env.as_ref() }.map_or(0, |e| e.env.spec().max_episode_steps)
}

/// Writes the per-component raw action bounds into two buffers of `len`
/// elements; `len` must equal the action dimension.
#[no_mangle]
pub extern "C" fn gac_env_action_bounds(
    env: *const GacEnv,
    out_low: *mut f64,
    out_high: *mut f64,
    len: usize,
) -> GacStatus {
    guarded(|| {
        let handle = match unsafe { env.as_ref() } {
            Some(h) => h,
            None => return fail(GacStatus::NullArgument, "env is null"),
        };
        if out_low.is_null() || out_high.is_null() {
            return fail(GacStatus::NullArgument, "bounds buffer is null");
        }
        let spec = handle.env.spec();
        if len != spec.action_dim {
            return fail(
                GacStatus::InvalidArgument,
                &format!("bounds buffers hold {len} values, action dimension is {}", spec.action_dim),
            );
        }
        unsafe { slice::from_raw_parts_mut(out_low, len) }.copy_from_slice(&spec.action_low);
        unsafe { slice::from_raw_parts_mut(out_high, len) }.copy_from_slice(&spec.action_high);
        GacStatus::Ok
    })
}

/// Starts a new episode, writing the initial raw observation into
/// `out_obs`; `obs_len` must equal the state dimension.
#[no_mangle]
pub extern "C" fn gac_env_reset(env: *mut GacEnv, out_obs: *mut f64, obs_len: usize) -> GacStatus {
    guarded(|| {
        let handle = try_mut!(env, "env");
        if out_obs.is_null() {
            return fail(GacStatus::NullArgument, "out_obs is null");
        }
        let state_dim = handle.env.spec().state_dim;
        if obs_len != state_dim {
            return fail(
                GacStatus::InvalidArgument,
                &format!("out_obs holds {obs_len} values, state dimension is {state_dim}"),
            );
        }
        let obs = handle.env.reset(&mut handle.rng);
        unsafe { slice::from_raw_parts_mut(out_obs, obs_len) }.copy_from_slice(&obs);
        GacStatus::Ok
    })
}

/// Advances one step on a raw action (components outside the bounds are
/// clipped), writing the next raw observation and the step's scalar
/// results. After a terminal or truncated step, call `gac_env_reset`
/// before stepping again.
#[no_mangle]
pub extern "C" fn gac_env_step(
    env: *mut GacEnv,
    action: *const f64,
    action_len: usize,
    out_obs: *mut f64,
    obs_len: usize,
    out_step: *mut GacStep,
) -> GacStatus {
    guarded(|| {
        let handle = try_mut!(env, "env");
        let out_step = try_mut!(out_step, "out_step");
        if action.is_null() || out_obs.is_null() {
            return fail(GacStatus::NullArgument, "action or out_obs is null");
        }
        let spec = handle.env.spec();
        if action_len != spec.action_dim {
            return fail(
                GacStatus::InvalidArgument,
                &format!("action holds {action_len} values, action dimension is {}", spec.action_dim),
            );
        }
        if obs_len != spec.state_dim {
            return fail(
                GacStatus::InvalidArgument,
                &format!("out_obs holds {obs_len} values, state dimension is {}", spec.state_dim),
            );
        }
        let action = unsafe { slice::from_raw_parts(action, action_len) };
        match handle.env.step(action) {
            Ok(outcome) => {
                unsafe { slice::from_raw_parts_mut(out_obs, obs_len) }
                    .copy_from_slice(&outcome.obs);
                out_step.reward = outcome.reward;
                out_step.terminal = outcome.terminal;
                out_step.truncated = outcome.truncated;
                GacStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Loads a trained policy (actor network plus the run's frozen observation
/// statistics) from a checkpoint file. `seed` drives the latent draws of
/// `gac_policy_act`.
#[no_mangle]
pub extern "C" fn gac_policy_load(
    path: *const c_char,
    seed: u64,
    out: *mut *mut GacPolicy,
) -> GacStatus {
    guarded(|| {
        let out = try_mut!(out, "out");
        let path = match utf8(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match checkpoint::load(Path::new(path)) {
            Ok((trainer, _config)) => {
                *out = Box::into_raw(Box::new(GacPolicy {
                    trainer,
                    rng: stream(seed, "ffi-policy"),
                }));
                GacStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Releases a policy handle; null is a no-op.
#[no_mangle]
pub extern "C" fn gac_policy_free(policy: *mut GacPolicy) {
    if !policy.is_null() {
        drop(unsafe { Box::from_raw(policy) });
    }
}

/// Observation dimension the policy expects, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn gac_policy_state_dim(policy: *const GacPolicy) -> usize {
    unsafe { policy.as_ref() }.map_or(0, |p| p.trainer.env().spec().state_dim)
}

/// Raw action dimension the policy produces, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn gac_policy_action_dim(policy: *const GacPolicy) -> usize {
    unsafe { policy.as_ref() }.map_or(0, |p| p.trainer.env().spec().action_dim)
}

/// Copies the policy's NUL-terminated environment name into `buf`.
#[no_mangle]
pub extern "C" fn gac_policy_env_name(
    policy: *const GacPolicy,
    buf: *mut c_char,
    buf_len: usize,
) -> GacStatus {
    guarded(|| {
        let handle = match unsafe { policy.as_ref() } {
            Some(h) => h,
            None => return fail(GacStatus::NullArgument, "policy is null"),
        };
        if buf.is_null() {
            return fail(GacStatus::NullArgument, "buf is null");
        }
        let name = handle.trainer.env().spec().name.as_bytes();
        if buf_len < name.len() + 1 {
            return fail(
                GacStatus::InvalidArgument,
                &format!("buffer of {buf_len} bytes cannot hold a {}-byte name", name.len() + 1),
            );
        }
        let out = unsafe { slice::from_raw_parts_mut(buf.cast::<u8>(), name.len() + 1) };
        out[..name.len()].copy_from_slice(name);
        out[name.len()] = 0;
        GacStatus::Ok
    })
}

/// One action from a raw observation: the observation is normalized with
/// the checkpoint's frozen statistics, the latent draw uses `latent_sigma`
/// (0 gives the deterministic center action), and the result is written in
/// raw environment units. `obs_len` and `action_len` must match the
/// policy's dimensions.
#[no_mangle]
pub extern "C" fn gac_policy_act(
    policy: *mut GacPolicy,
    obs: *const f64,
    obs_len: usize,
    latent_sigma: f64,
    out_action: *mut f64,
    action_len: usize,
) -> GacStatus {
    guarded(|| {
        let handle = try_mut!(policy, "policy");
        if obs.is_null() || out_action.is_null() {
            return fail(GacStatus::NullArgument, "obs or out_action is null");
        }
        let spec = handle.trainer.env().spec().clone();
        if obs_len != spec.state_dim {
            return fail(
                GacStatus::InvalidArgument,
                &format!("obs holds {obs_len} values, state dimension is {}", spec.state_dim),
            );
        }
        if action_len != spec.action_dim {
            return fail(
                GacStatus::InvalidArgument,
                &format!("out_action holds {action_len} values, action dimension is {}", spec.action_dim),
            );
        }
        if !latent_sigma.is_finite() || latent_sigma < 0.0 {
            return fail(
                GacStatus::InvalidArgument,
                &format!("latent sigma must be finite and non-negative, got {latent_sigma}"),
            );
        }
        let raw_obs = unsafe { slice::from_raw_parts(obs, obs_len) };
        let norm = handle.trainer.normalizer.normalize(raw_obs);
        match handle.trainer.agent.act(&norm, ActNoise::Sigma(latent_sigma), &mut handle.rng) {
            Ok(action_norm) => {
                let raw = spec.denormalize_action(&action_norm);
                unsafe { slice::from_raw_parts_mut(out_action, action_len) }
                    .copy_from_slice(&raw);
                GacStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// MMD between two sample sets laid out row-major as `rows x dim`.
/// `kernel` is one of the `GacKernel` values; `sigma` is the Gaussian
/// bandwidth and is ignored by the other kernels.
#[no_mangle]
pub extern "C" fn gac_mmd_estimate(
    x: *const f64,
    x_rows: usize,
    y: *const f64,
    y_rows: usize,
    dim: usize,
    kernel: u32,
    sigma: f64,
    out: *mut f64,
) -> GacStatus {
    guarded(|| {
        let out = try_mut!(out, "out");
        if x.is_null() || y.is_null() {
            return fail(GacStatus::NullArgument, "sample buffer is null");
        }
        let spec = match kernel {
            k if k == GacKernel::EnergySquared as u32 => KernelSpec::EnergySquared,
            k if k == GacKernel::Energy as u32 => KernelSpec::Energy,
            k if k == GacKernel::Gaussian as u32 => KernelSpec::Gaussian { sigma },
            other => {
                return fail(GacStatus::InvalidArgument, &format!("unknown kernel selector {other}"))
            }
        };
        if let Err(e) = spec.validate() {
            return fail_with(&e);
        }
        let tensor = |ptr: *const f64, rows: usize| -> Result<Tensor, GacError> {
            let len = rows.checked_mul(dim).ok_or_else(|| {
                GacError::InvalidArgument(format!("sample set of {rows} x {dim} overflows"))
            })?;
            Tensor::matrix(rows, dim, unsafe { slice::from_raw_parts(ptr, len) }.to_vec())
        };
        let xt = match tensor(x, x_rows) {
            Ok(t) => t,
            Err(e) => return fail_with(&e),
        };
        let yt = match tensor(y, y_rows) {
            Ok(t) => t,
            Err(e) => return fail_with(&e),
        };
        match mmd_estimate(&xt, &yt, &spec) {
            Ok(v) => {
                *out = v;
                GacStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    use std::ffi::CString;
    use std::ptr;

    use gac::agent::{Algorithm, GacConfig};
    use gac::harness::RunConfig;
    use gac::nets::LatentSpec;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(gac_last_error()) }.to_string_lossy().into_owned()
    }

    fn new_env(name: &str, seed: u64) -> *mut GacEnv {
        let cname = CString::new(name).unwrap();
        let mut handle: *mut GacEnv = ptr::null_mut();
        let status = gac_env_new(cname.as_ptr(), 1.0, seed, &mut handle);
        assert_eq!(status, GacStatus::Ok, "{}", last_error());
        assert!(!handle.is_null());
        handle
    }

    #[test]
    fn version_is_a_nul_terminated_string() {
        let v = unsafe { CStr::from_ptr(gac_version()) }.to_str().unwrap();
        assert!(!v.is_empty());
    }

    #[test]
    fn unknown_environment_name_is_rejected_with_a_message() {
        let cname = CString::new("cartpole").unwrap();
        let mut handle: *mut GacEnv = ptr::null_mut();
        let status = gac_env_new(cname.as_ptr(), 1.0, 0, &mut handle);
        assert_eq!(status, GacStatus::InvalidArgument);
        assert!(handle.is_null());
        assert!(last_error().contains("unknown environment"), "{}", last_error());
    }

    #[test]
    fn null_arguments_are_reported_not_crashed() {
        let mut handle: *mut GacEnv = ptr::null_mut();
        assert_eq!(gac_env_new(ptr::null(), 1.0, 0, &mut handle), GacStatus::NullArgument);
        let cname = CString::new("pendulum").unwrap();
        assert_eq!(gac_env_new(cname.as_ptr(), 1.0, 0, ptr::null_mut()), GacStatus::NullArgument);
        assert_eq!(gac_env_reset(ptr::null_mut(), ptr::null_mut(), 0), GacStatus::NullArgument);
        assert_eq!(gac_env_state_dim(ptr::null()), 0);
        gac_env_free(ptr::null_mut());
        gac_policy_free(ptr::null_mut());
    }

    #[test]
    fn pendulum_episode_runs_to_its_step_limit() {
        let env = new_env("pendulum", 11);
        assert_eq!(gac_env_state_dim(env), 3);
        assert_eq!(gac_env_action_dim(env), 1);
        assert_eq!(gac_env_max_episode_steps(env), 200);

        let (mut low, mut high) = ([0.0; 1], [0.0; 1]);
        assert_eq!(
            gac_env_action_bounds(env, low.as_mut_ptr(), high.as_mut_ptr(), 1),
            GacStatus::Ok
        );
        assert_eq!((low[0], high[0]), (-2.0, 2.0));

        let mut obs = [0.0; 3];
        assert_eq!(gac_env_reset(env, obs.as_mut_ptr(), 3), GacStatus::Ok);
        let mut step = GacStep { reward: 0.0, terminal: false, truncated: false };
        for i in 0..200 {
            let action = [0.5];
            let status =
                gac_env_step(env, action.as_ptr(), 1, obs.as_mut_ptr(), 3, &mut step);
            assert_eq!(status, GacStatus::Ok, "step {i}: {}", last_error());
            assert!(step.reward.is_finite() && step.reward <= 0.0);
            assert!(!step.terminal);
            assert_eq!(step.truncated, i == 199);
        }
        gac_env_free(env);
    }

    #[test]
    fn bandit_episodes_are_single_terminal_steps() {
        let env = new_env("bimodal_bandit", 3);
        let mut obs = [0.0; 1];
        assert_eq!(gac_env_reset(env, obs.as_mut_ptr(), 1), GacStatus::Ok);
        let mut step = GacStep { reward: 0.0, terminal: false, truncated: false };
        let action = [0.7];
        assert_eq!(gac_env_step(env, action.as_ptr(), 1, obs.as_mut_ptr(), 1, &mut step), GacStatus::Ok);
        assert!(step.terminal);
        assert!(step.reward > 0.9, "peak action should score near 1, got {}", step.reward);
        gac_env_free(env);
    }

    #[test]
    fn wrong_buffer_lengths_are_rejected() {
        let env = new_env("multigoal", 0);
        let mut obs = [0.0; 2];
        assert_eq!(gac_env_reset(env, obs.as_mut_ptr(), 1), GacStatus::InvalidArgument);
        assert!(last_error().contains("state dimension"), "{}", last_error());
        assert_eq!(gac_env_reset(env, obs.as_mut_ptr(), 2), GacStatus::Ok);
        let mut step = GacStep { reward: 0.0, terminal: false, truncated: false };
        let action = [0.1];
        assert_eq!(
            gac_env_step(env, action.as_ptr(), 1, obs.as_mut_ptr(), 2, &mut step),
            GacStatus::InvalidArgument
        );
        assert!(last_error().contains("action dimension"), "{}", last_error());
        gac_env_free(env);
    }

    #[test]
    fn mmd_estimate_matches_the_core_library() {
        let x: Vec<f64> = vec![0.1, 0.4, -0.3, 0.9, 0.5, -0.2];
        let y: Vec<f64> = vec![0.0, 0.2, 0.7, -0.5];
        for (code, kernel) in [
            (GacKernel::EnergySquared as u32, KernelSpec::EnergySquared),
            (GacKernel::Energy as u32, KernelSpec::Energy),
            (GacKernel::Gaussian as u32, KernelSpec::Gaussian { sigma: 0.8 }),
        ] {
            let mut got = f64::NAN;
            let status =
                gac_mmd_estimate(x.as_ptr(), 3, y.as_ptr(), 2, 2, code, 0.8, &mut got);
            assert_eq!(status, GacStatus::Ok, "{}", last_error());
            let want = mmd_estimate(
                &Tensor::matrix(3, 2, x.clone()).unwrap(),
                &Tensor::matrix(2, 2, y.clone()).unwrap(),
                &kernel,
            )
            .unwrap();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn bad_kernel_arguments_are_rejected() {
        let x = [0.0, 1.0];
        let mut got = 0.0;
        assert_eq!(
            gac_mmd_estimate(x.as_ptr(), 2, x.as_ptr(), 2, 1, 9, 1.0, &mut got),
            GacStatus::InvalidArgument
        );
        assert!(last_error().contains("kernel"), "{}", last_error());
        assert_eq!(
            gac_mmd_estimate(
                x.as_ptr(),
                2,
                x.as_ptr(),
                2,
                1,
                GacKernel::Gaussian as u32,
                0.0,
                &mut got
            ),
            GacStatus::InvalidArgument
        );
    }

    fn trained_checkpoint(dir: &Path) -> std::path::PathBuf {
        let config = GacConfig {
            algorithm: Algorithm::GacAdaptive { alpha_min: 1.0, alpha_max: 1.8, delta_beta: 0.01 },
            gamma: 0.99,
            iterations: 2,
            updates_per_iteration: 2,
            steps_per_iteration: 5,
            batch_size: 8,
            action_samples: 4,
            adam_step: 1e-3,
            gd_step: 5e-3,
            kernel: KernelSpec::EnergySquared,
            latent: LatentSpec { noise_dim: 1, train_sigma: 1.0, test_sigma: 0.5 },
            hidden: vec![8, 8],
            buffer_capacity: 200,
            eval_episodes: 1,
        };
        let mut trainer = Trainer::new("bimodal_bandit", 1.0, config.clone(), 5).unwrap();
        for _ in 0..2 {
            trainer.run_iteration().unwrap();
        }
        let run = RunConfig {
            env_name: "bimodal_bandit".into(),
            reward_scale: 1.0,
            seeds: vec![5],
            output_dir: dir.to_path_buf(),
            checkpoint_every: 50,
            gac: config,
        };
        let path = dir.join("checkpoint_final.ckpt");
        checkpoint::save(&path, &trainer, &run).unwrap();
        path
    }

    #[test]
    fn policy_loads_acts_and_reports_its_shape() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = trained_checkpoint(dir.path());
        let cpath = CString::new(ckpt.to_str().unwrap()).unwrap();
        let mut policy: *mut GacPolicy = ptr::null_mut();
        let status = gac_policy_load(cpath.as_ptr(), 9, &mut policy);
        assert_eq!(status, GacStatus::Ok, "{}", last_error());
        assert_eq!(gac_policy_state_dim(policy), 1);
        assert_eq!(gac_policy_action_dim(policy), 1);

        let mut name = [0 as c_char; 32];
        assert_eq!(gac_policy_env_name(policy, name.as_mut_ptr(), 32), GacStatus::Ok);
        let name = unsafe { CStr::from_ptr(name.as_ptr()) }.to_str().unwrap();
        assert_eq!(name, "bimodal_bandit");
        let mut tiny = [0 as c_char; 4];
        assert_eq!(
            gac_policy_env_name(policy, tiny.as_mut_ptr(), 4),
            GacStatus::InvalidArgument
        );

        let obs = [0.0];
        let mut a1 = [f64::NAN];
        let mut a2 = [f64::NAN];
        assert_eq!(
            gac_policy_act(policy, obs.as_ptr(), 1, 0.0, a1.as_mut_ptr(), 1),
            GacStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(
            gac_policy_act(policy, obs.as_ptr(), 1, 0.0, a2.as_mut_ptr(), 1),
            GacStatus::Ok
        );
        assert_eq!(a1[0], a2[0], "zero latent sigma must be deterministic");
        assert!((-1.0..=1.0).contains(&a1[0]), "bandit action out of bounds: {}", a1[0]);

        let mut noisy = [f64::NAN];
        assert_eq!(
            gac_policy_act(policy, obs.as_ptr(), 1, 0.5, noisy.as_mut_ptr(), 1),
            GacStatus::Ok
        );
        assert!(noisy[0].is_finite());

        assert_eq!(
            gac_policy_act(policy, obs.as_ptr(), 1, -0.5, noisy.as_mut_ptr(), 1),
            GacStatus::InvalidArgument
        );
        assert!(last_error().contains("latent sigma"), "{}", last_error());
        assert_eq!(
            gac_policy_act(policy, obs.as_ptr(), 1, 0.5, noisy.as_mut_ptr(), 2),
            GacStatus::InvalidArgument
        );
        gac_policy_free(policy);
    }

    #[test]
    fn missing_checkpoint_reports_io_failure() {
        let cpath = CString::new("/nonexistent/checkpoint_final.ckpt").unwrap();
        let mut policy: *mut GacPolicy = ptr::null_mut();
        let status = gac_policy_load(cpath.as_ptr(), 0, &mut policy);
        assert_eq!(status, GacStatus::Io);
        assert!(policy.is_null());
        assert!(!last_error().is_empty());
    }

    #[test]
    fn committed_header_exports_the_surface() {
        let header =
            std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/gac.h"))
                .expect("include/gac.h is generated by the build script");
        for symbol in [
            "GAC_H",
            "GacStatus",
            "GacKernel",
            "gac_last_error",
            "gac_env_new",
            "gac_env_step",
            "gac_policy_load",
            "gac_policy_act",
            "gac_mmd_estimate",
        ] {
            assert!(header.contains(symbol), "header is missing {symbol}");
        }
    }
}
