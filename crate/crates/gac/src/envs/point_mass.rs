//! Planar point mass with four symmetric goals.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_action_len, clip_action, Env, EnvSnapshot, EnvSpec, StepOutcome};
use crate::error::{GacError, Result};

const GOAL_RADIUS: f64 = 0.05;
const ARENA: f64 = 2.0;

/// The four goals sit on the unit circle at 45, 135, 225, and 315 degrees.
pub const GOALS: [[f64; 2]; 4] = {
    const C: f64 = std::f64::consts::FRAC_1_SQRT_2;
    [[C, C], [-C, C], [-C, -C], [C, -C]]
};

/// Observation is the position in [-2, 2]^2; the action is a velocity in
/// [-0.2, 0.2]^2 applied directly. Reward is the negative distance to the
/// nearest goal; reaching any goal within 0.05 ends the episode, otherwise
/// it truncates after 40 steps. Episodes start near the origin, equidistant
/// from all four goals.
pub struct MultiGoalPointMass2D {
    spec: EnvSpec,
    pos: [f64; 2],
    steps: u64,
    clipped: u64,
}

impl MultiGoalPointMass2D {
    pub fn new() -> Self {
        MultiGoalPointMass2D {
            spec: EnvSpec {
                name: "multigoal",
                state_dim: 2,
                action_dim: 2,
                action_low: vec![-0.2, -0.2],
                action_high: vec![0.2, 0.2],
                max_episode_steps: 40,
                reward_scale: 1.0,
            },
            pos: [0.0, 0.0],
            steps: 0,
            clipped: 0,
        }
    }

    fn min_goal_dist(p: &[f64; 2]) -> f64 {
        GOALS
            .iter()
            .map(|g| ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

impl Default for MultiGoalPointMass2D {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for MultiGoalPointMass2D {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn set_reward_scale(&mut self, scale: f64) {
        self.spec.reward_scale = scale;
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.pos = [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)];
        self.steps = 0;
        self.pos.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        check_action_len(&self.spec, action)?;
        let (a, clipped) = clip_action(action, &self.spec.action_low, &self.spec.action_high);
        if clipped {
            self.clipped += 1;
        }
        self.pos[0] = (self.pos[0] + a[0]).clamp(-ARENA, ARENA);
        self.pos[1] = (self.pos[1] + a[1]).clamp(-ARENA, ARENA);
        self.steps += 1;
        let dist = Self::min_goal_dist(&self.pos);
        let terminal = dist < GOAL_RADIUS;
        Ok(StepOutcome {
            obs: self.pos.to_vec(),
            reward: -dist,
            terminal,
            truncated: !terminal && self.steps >= self.spec.max_episode_steps,
        })
    }

    fn clipped_actions(&self) -> u64 {
        self.clipped
    }

    fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot { state: self.pos.to_vec(), steps: self.steps, clipped: self.clipped }
    }

    fn restore(&mut self, snap: &EnvSnapshot) -> Result<()> {
        if snap.state.len() != 2 {
            return Err(GacError::InvalidArgument(format!(
                "multigoal snapshot needs 2 state values, got {}",
                snap.state.len()
            )));
        }
        self.pos = [snap.state[0], snap.state[1]];
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
    fn origin_is_unit_distance_from_every_goal() {
        for g in GOALS {
            let d = (g[0] * g[0] + g[1] * g[1]).sqrt();
            assert!((d - 1.0).abs() < 1e-12);
        }
        // Standing still at the origin earns reward -1.
        let mut env = MultiGoalPointMass2D::new();
        env.pos = [0.0, 0.0];
        let out = env.step(&[0.0, 0.0]).unwrap();
        assert!((out.reward + 1.0).abs() < 1e-12);
        assert!(!out.terminal);
    }

    #[test]
    fn reaching_a_goal_terminates() {
        let mut env = MultiGoalPointMass2D::new();
        let c = std::f64::consts::FRAC_1_SQRT_2;
        env.pos = [c - 0.1, c];
        let out = env.step(&[0.09, 0.0]).unwrap();
        assert!(out.terminal, "distance {} should terminate", -out.reward);
        assert!(!out.truncated);
    }

    #[test]
    fn episode_truncates_after_forty_steps() {
        let mut env = MultiGoalPointMass2D::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        env.reset(&mut rng);
        for i in 1..=40 {
            let out = env.step(&[0.0, 0.0]).unwrap();
            assert!(!out.terminal);
            assert_eq!(out.truncated, i == 40, "step {i}");
        }
    }

    #[test]
    fn reset_starts_near_origin() {
        let mut env = MultiGoalPointMass2D::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let obs = env.reset(&mut rng);
            assert!(obs.iter().all(|v| v.abs() < 0.1));
        }
    }

    #[test]
    fn position_stays_in_arena() {
        let mut env = MultiGoalPointMass2D::new();
        env.pos = [1.95, -1.95];
        let out = env.step(&[0.2, -0.2]).unwrap();
        assert_eq!(out.obs, vec![2.0, -2.0]);
    }

    #[test]
    fn same_seed_reproduces_resets() {
        let mut a = MultiGoalPointMass2D::new();
        let mut b = MultiGoalPointMass2D::new();
        let mut ra = ChaCha8Rng::seed_from_u64(21);
        let mut rb = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            assert_eq!(a.reset(&mut ra), b.reset(&mut rb));
        }
    }
}
