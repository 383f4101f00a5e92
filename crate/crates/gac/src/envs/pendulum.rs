//! Torque-limited pendulum swing-up.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_action_len, clip_action, Env, EnvSnapshot, EnvSpec, StepOutcome};
use crate::error::{GacError, Result};

const GRAVITY: f64 = 9.8;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;

/// Underactuated pendulum: angle 0 is upright, torque is too weak to swing
/// up directly, so the agent must pump energy. Observation is
/// (cos th, sin th, thdot); reward penalizes angle from upright, speed, and
/// torque, using the state before the transition. Episodes always run the
/// full 200 steps.
pub struct PendulumSwingup {
    spec: EnvSpec,
    theta: f64,
    theta_dot: f64,
    steps: u64,
    clipped: u64,
}

/// Maps an angle to [-pi, pi].
pub(crate) fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl PendulumSwingup {
    pub fn new() -> Self {
        PendulumSwingup {
            spec: EnvSpec {
                name: "pendulum",
                state_dim: 3,
                action_dim: 1,
                action_low: vec![-MAX_TORQUE],
                action_high: vec![MAX_TORQUE],
                max_episode_steps: 200,
                reward_scale: 1.0,
            },
            theta: PI,
            theta_dot: 0.0,
            steps: 0,
            clipped: 0,
        }
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Default for PendulumSwingup {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for PendulumSwingup {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn set_reward_scale(&mut self, scale: f64) {
        self.spec.reward_scale = scale;
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.theta = rng.random_range(-PI..PI);
        self.theta_dot = rng.random_range(-1.0..1.0);
        self.steps = 0;
        self.obs()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        check_action_len(&self.spec, action)?;
        let (a, clipped) = clip_action(action, &self.spec.action_low, &self.spec.action_high);
        if clipped {
            self.clipped += 1;
        }
        let u = a[0];
        let th = wrap_angle(self.theta);
        let reward = -(th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u);

        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * self.theta.sin()
            + 3.0 / (MASS * LENGTH * LENGTH) * u;
        self.theta_dot = (self.theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += self.theta_dot * DT;
        self.steps += 1;
        Ok(StepOutcome {
            obs: self.obs(),
            reward,
            terminal: false,
            truncated: self.steps >= self.spec.max_episode_steps,
        })
    }

    fn clipped_actions(&self) -> u64 {
        self.clipped
    }

    fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot {
            state: vec![self.theta, self.theta_dot],
            steps: self.steps,
            clipped: self.clipped,
        }
    }

    fn restore(&mut self, snap: &EnvSnapshot) -> Result<()> {
        if snap.state.len() != 2 {
            return Err(GacError::InvalidArgument(format!(
                "pendulum snapshot needs 2 state values, got {}",
                snap.state.len()
            )));
        }
        self.theta = snap.state[0];
        self.theta_dot = snap.state[1];
        self.steps = snap.steps;
        self.clipped = snap.clipped;
        Ok(())
    }
}
