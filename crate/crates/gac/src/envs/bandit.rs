//! One-step bandit with a symmetric bimodal reward over a scalar action.

use rand_chacha::ChaCha8Rng;

use super::{check_action_len, clip_action, Env, EnvSnapshot, EnvSpec, StepOutcome};
use crate::error::{GacError, Result};

/// Reward `exp(-(a-0.7)^2/0.01) + exp(-(a+0.7)^2/0.01)`: two sharp, equally
/// tall peaks at a = +-0.7. Every episode is a single terminal step from the
/// constant state 0.
pub struct BimodalBandit1D {
    spec: EnvSpec,
    steps: u64,
    clipped: u64,
}

pub(crate) fn bandit_reward(a: f64) -> f64 {
    let d1 = a - 0.7;
    let d2 = a + 0.7;
    (-d1 * d1 / 0.01).exp() + (-d2 * d2 / 0.01).exp()
}

impl BimodalBandit1D {
    pub fn new() -> Self {
        BimodalBandit1D {
            spec: EnvSpec {
                name: "bimodal_bandit",
                state_dim: 1,
                action_dim: 1,
                action_low: vec![-1.0],
                action_high: vec![1.0],
                max_episode_steps: 1,
                reward_scale: 1.0,
            },
            steps: 0,
            clipped: 0,
        }
    }
}

impl Default for BimodalBandit1D {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for BimodalBandit1D {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn set_reward_scale(&mut self, scale: f64) {
        self.spec.reward_scale = scale;
    }

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.steps = 0;
        vec![0.0]
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        check_action_len(&self.spec, action)?;
        let (a, clipped) = clip_action(action, &self.spec.action_low, &self.spec.action_high);
        if clipped {
            self.clipped += 1;
        }
        self.steps += 1;
        Ok(StepOutcome {
            obs: vec![0.0],
            reward: bandit_reward(a[0]),
            terminal: true,
            truncated: false,
        })
    }

    fn clipped_actions(&self) -> u64 {
        self.clipped
    }

    fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot { state: vec![], steps: self.steps, clipped: self.clipped }
    }

    fn restore(&mut self, snap: &EnvSnapshot) -> Result<()> {
        if !snap.state.is_empty() {
            return Err(GacError::InvalidArgument(
                "bimodal_bandit snapshot carries no state".into(),
            ));
        }
        self.steps = snap.steps;
        self.clipped = snap.clipped;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn reward_peaks_and_valley() {
        assert!((bandit_reward(0.7) - 1.0).abs() < 1e-6);
        assert!((bandit_reward(-0.7) - 1.0).abs() < 1e-6);
        assert!((bandit_reward(0.0) - 2.0 * (-49.0f64).exp()).abs() < 1e-12);
        // Symmetry of the two modes.
        for a in [0.1, 0.33, 0.64, 0.92] {
            assert!((bandit_reward(a) - bandit_reward(-a)).abs() < 1e-15);
        }
    }

    #[test]
    fn episodes_are_single_terminal_steps() {
        let mut env = BimodalBandit1D::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = env.reset(&mut rng);
        assert_eq!(obs, vec![0.0]);
        let out = env.step(&[0.5]).unwrap();
        assert!(out.terminal);
        assert!(!out.truncated);
        assert_eq!(out.obs, vec![0.0]);
    }

    #[test]
    fn out_of_bounds_actions_are_clipped_and_counted() {
        let mut env = BimodalBandit1D::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng);
        let out = env.step(&[3.0]).unwrap();
        assert_eq!(out.reward, bandit_reward(1.0));
        assert_eq!(env.clipped_actions(), 1);
    }

    #[test]
    fn wrong_action_dimension_errors() {
        let mut env = BimodalBandit1D::new();
        assert!(env.step(&[0.0, 0.0]).is_err());
    }
}
