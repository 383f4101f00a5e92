//! In-repo continuous-control environments and observation/action scaling.
//!
//! Environments expose raw observations and take raw actions in their native
//! bounds; the training pipeline converts between those and the normalized
//! [-1, 1] space the networks operate in. Out-of-bounds action components
//! are clipped and counted as a diagnostic.

mod bandit;
mod normalize;
mod pendulum;
mod point_mass;

pub use bandit::BimodalBandit1D;
pub use normalize::ObsNormalizer;
pub use pendulum::PendulumSwingup;
pub use point_mass::MultiGoalPointMass2D;

use rand_chacha::ChaCha8Rng;

use crate::error::{GacError, Result};

/// Static description of an environment.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: u64,
    /// Multiplier applied to rewards before they are stored for training.
    /// Reported evaluation returns are always unscaled.
    pub reward_scale: f64,
}

impl EnvSpec {
    /// Reward as stored in the replay buffer.
    pub fn scale_reward(&self, r: f64) -> f64 {
        r * self.reward_scale
    }

    /// Maps a raw action into [-1, 1] per component:
    /// `(2 a - high - low) / (high - low)`.
    pub fn normalize_action(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| (2.0 * a - hi - lo) / (hi - lo))
            .collect()
    }

    /// Inverse of `normalize_action`.
    pub fn denormalize_action(&self, norm: &[f64]) -> Vec<f64> {
        norm.iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&n, (&lo, &hi))| (n * (hi - lo) + hi + lo) / 2.0)
            .collect()
    }
}

/// Result of one environment step. `terminal` marks a true end state;
/// `truncated` marks hitting the step limit. Only `terminal` feeds the
/// bootstrap mask.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub truncated: bool,
}

/// Serializable environment state for checkpointing.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvSnapshot {
    pub state: Vec<f64>,
    pub steps: u64,
    pub clipped: u64,
}

pub trait Env {
    fn spec(&self) -> &EnvSpec;

    fn set_reward_scale(&mut self, scale: f64);

    /// Starts a new episode and returns the initial raw observation.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// Advances one step on a raw action (clipped into bounds if needed).
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;

    /// Running count of actions that had at least one component clipped.
    fn clipped_actions(&self) -> u64;

    fn snapshot(&self) -> EnvSnapshot;

    fn restore(&mut self, snap: &EnvSnapshot) -> Result<()>;
}

pub const ENV_NAMES: [&str; 3] = ["bimodal_bandit", "multigoal", "pendulum"];

pub fn make_env(name: &str, reward_scale: f64) -> Result<Box<dyn Env>> {
    if reward_scale == 0.0 || !reward_scale.is_finite() {
        return Err(GacError::InvalidArgument(format!(
            "reward_scale must be finite and nonzero, got {reward_scale}"
        )));
    }
    let mut env: Box<dyn Env> = match name {
        "bimodal_bandit" => Box::new(BimodalBandit1D::new()),
        "multigoal" => Box::new(MultiGoalPointMass2D::new()),
        "pendulum" => Box::new(PendulumSwingup::new()),
        other => {
            return Err(GacError::InvalidArgument(format!(
                "unknown environment {other:?}; known: {}",
                ENV_NAMES.join(", ")
            )))
        }
    };
    env.set_reward_scale(reward_scale);
    Ok(env)
}

/// Clips `action` into the box, returning whether anything changed.
pub(crate) fn clip_action(action: &[f64], low: &[f64], high: &[f64]) -> (Vec<f64>, bool) {
    let mut clipped = false;
    let out = action
        .iter()
        .zip(low.iter().zip(high))
        .map(|(&a, (&lo, &hi))| {
            let c = a.clamp(lo, hi);
            if c != a {
                clipped = true;
            }
            c
        })
        .collect();
    (out, clipped)
}

pub(crate) fn check_action_len(spec: &EnvSpec, action: &[f64]) -> Result<()> {
    if action.len() != spec.action_dim {
        return Err(GacError::InvalidArgument(format!(
            "{} expects {}-dimensional actions, got {}",
            spec.name,
            spec.action_dim,
            action.len()
        )));
    }
    Ok(())
}
