//! The training agent: replay storage, loss construction, the adaptive
//! entropy mechanism, and the environment-facing training loop.

pub mod adaptive;
pub mod core;
pub mod losses;
pub mod replay;
pub mod trainer;

pub use adaptive::{sign, AdaptiveAlpha, BETA_FLOOR};
pub use core::{ActNoise, Agent, AlphaMode, TrainStats};
pub use replay::{Batch, ReplayBuffer, TransitionView};
pub use trainer::{EvalStats, IterationRow, Trainer};

use crate::error::{GacError, Result};
use crate::mmd::KernelSpec;
use crate::nets::LatentSpec;

/// Which objective variant a run trains.
#[derive(Clone, Debug, PartialEq)]
pub enum Algorithm {
    /// Entropy-regularized actor with the α/β dual mechanism.
    GacAdaptive { alpha_min: f64, alpha_max: f64, delta_beta: f64 },
    /// Entropy-regularized actor with a constant weight.
    GacFixed { alpha: f64 },
    /// Deterministic-actor baseline: a = G(s, 0), Gaussian exploration
    /// noise during collection, no entropy term.
    DdpgBaseline { exploration_noise: f64 },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::GacAdaptive { .. } => "gac_adaptive",
            Algorithm::GacFixed { .. } => "gac_fixed",
            Algorithm::DdpgBaseline { .. } => "ddpg_baseline",
        }
    }

    /// True for the push-forward variants that carry the entropy term.
    pub fn uses_mmd(&self) -> bool {
        !matches!(self, Algorithm::DdpgBaseline { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Algorithm::GacAdaptive { alpha_min, alpha_max, delta_beta } => {
                if !(alpha_min.is_finite() && alpha_max.is_finite() && delta_beta.is_finite()) {
                    return Err(GacError::Config("adaptive alpha settings must be finite".into()));
                }
                if *alpha_min <= 0.0 || *alpha_max <= *alpha_min {
                    return Err(GacError::Config(format!(
                        "need 0 < alpha_min < alpha_max, got [{alpha_min}, {alpha_max}]"
                    )));
                }
                if *delta_beta <= 0.0 {
                    return Err(GacError::Config(format!(
                        "delta_beta must be positive, got {delta_beta}"
                    )));
                }
            }
            Algorithm::GacFixed { alpha } => {
                if !alpha.is_finite() || *alpha < 0.0 {
                    return Err(GacError::Config(format!(
                        "fixed alpha must be finite and non-negative, got {alpha}"
                    )));
                }
            }
            Algorithm::DdpgBaseline { exploration_noise } => {
                if !exploration_noise.is_finite() || *exploration_noise < 0.0 {
                    return Err(GacError::Config(format!(
                        "exploration_noise must be finite and non-negative, got {exploration_noise}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Hyperparameters of one training run, environment-independent.
#[derive(Clone, Debug, PartialEq)]
pub struct GacConfig {
    pub algorithm: Algorithm,
    /// Discount factor.
    pub gamma: f64,
    /// Outer iterations N.
    pub iterations: usize,
    /// Gradient updates per iteration N'.
    pub updates_per_iteration: usize,
    /// Environment steps collected per iteration m.
    pub steps_per_iteration: usize,
    /// Minibatch size m'.
    pub batch_size: usize,
    /// Action samples per state in the actor objective m''.
    pub action_samples: usize,
    pub adam_step: f64,
    /// Step size of the target-network tracking update.
    pub gd_step: f64,
    pub kernel: KernelSpec,
    pub latent: LatentSpec,
    /// Hidden layer widths shared by actor and critics.
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
    pub eval_episodes: usize,
}

impl GacConfig {
    pub fn validate(&self) -> Result<()> {
        self.algorithm.validate()?;
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(GacError::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        for (name, v) in [
            ("iterations", self.iterations),
            ("updates_per_iteration", self.updates_per_iteration),
            ("steps_per_iteration", self.steps_per_iteration),
            ("batch_size", self.batch_size),
            ("action_samples", self.action_samples),
            ("buffer_capacity", self.buffer_capacity),
            ("eval_episodes", self.eval_episodes),
        ] {
            if v == 0 {
                return Err(GacError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.algorithm.uses_mmd() && self.action_samples < 2 {
            return Err(GacError::Config(
                "action_samples must be at least 2 for the entropy estimate".into(),
            ));
        }
        if self.batch_size > self.buffer_capacity {
            return Err(GacError::Config(format!(
                "batch_size {} exceeds buffer_capacity {}",
                self.batch_size, self.buffer_capacity
            )));
        }
        for (name, v) in [("adam_step", self.adam_step), ("gd_step", self.gd_step)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(GacError::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(GacError::Config("hidden layer widths must be positive".into()));
        }
        self.kernel.validate().map_err(|e| GacError::Config(e.to_string()))?;
        self.latent.validate().map_err(|e| GacError::Config(e.to_string()))?;
        Ok(())
    }

    /// Action samples per state actually used by the actor objective; the
    /// deterministic baseline collapses to a single zero-noise sample.
    pub fn effective_action_samples(&self) -> usize {
        if self.algorithm.uses_mmd() {
            self.action_samples
        } else {
            1
        }
    }
}
