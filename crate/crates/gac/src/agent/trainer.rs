//! The outer training loop: collection, updates, the β drift, and policy
//! evaluation, one iteration at a time.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::agent::core::{ActNoise, Agent, TrainStats};
use crate::agent::replay::ReplayBuffer;
use crate::agent::{Algorithm, GacConfig};
use crate::envs::{make_env, Env, ObsNormalizer};
use crate::error::{GacError, Result};
use crate::harness::rngs::RunRngs;

/// One metrics row, produced per outer iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRow {
    pub step: u64,
    pub env_steps: u64,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub mmd_value: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Evaluation summary over a batch of episodes.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalStats {
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
    /// Whether each episode ended on a true terminal state (goal reached)
    /// rather than the step limit.
    pub terminals: Vec<bool>,
}

/// Agent, environment, buffer, and normalizer wired together for one run.
pub struct Trainer {
    pub agent: Agent,
    env: Box<dyn Env>,
    eval_env: Box<dyn Env>,
    pub buffer: ReplayBuffer,
    pub normalizer: ObsNormalizer,
    pub rngs: RunRngs,
    /// Current raw observation of the training episode.
    obs: Vec<f64>,
    env_steps: u64,
    iteration: u64,
    root_seed: u64,
}

impl std::fmt::Debug for Trainer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trainer")
            .field("algorithm", &self.agent.config().algorithm.name())
            .field("iteration", &self.iteration)
            .field("env_steps", &self.env_steps)
            .field("root_seed", &self.root_seed)
            .finish_non_exhaustive()
    }
}

impl Trainer {
    /// Builds everything for one (environment, config, seed) run. Draws
    /// network initializations from the seed's `init` stream and the first
    /// episode start from its `env` stream.
    pub fn new(
        env_name: &str,
        reward_scale: f64,
        config: GacConfig,
        root_seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut env = make_env(env_name, reward_scale)?;
        let eval_env = make_env(env_name, reward_scale)?;
        let spec = env.spec();
        let (state_dim, action_dim) = (spec.state_dim, spec.action_dim);
        let mut rngs = RunRngs::new(root_seed);
        let agent = Agent::new(state_dim, action_dim, config.clone(), &mut rngs.init)?;
        let buffer = ReplayBuffer::new(config.buffer_capacity, state_dim, action_dim)?;
        let normalizer = ObsNormalizer::new(state_dim);
        let obs = env.reset(&mut rngs.env);
        Ok(Trainer {
            agent,
            env,
            eval_env,
            buffer,
            normalizer,
            rngs,
            obs,
            env_steps: 0,
            iteration: 0,
            root_seed,
        })
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn env(&self) -> &dyn Env {
        self.env.as_ref()
    }

    pub fn env_mut(&mut self) -> &mut dyn Env {
        self.env.as_mut()
    }

    /// Current raw observation, for checkpointing.
    pub fn current_obs(&self) -> &[f64] {
        &self.obs
    }

    /// Restores the loop counters and episode cursor from a checkpoint.
    pub fn restore_cursor(&mut self, obs: Vec<f64>, env_steps: u64, iteration: u64) -> Result<()> {
        if obs.len() != self.env.spec().state_dim {
            return Err(GacError::Checkpoint(format!(
                "restored observation has dimension {}, environment expects {}",
                obs.len(),
                self.env.spec().state_dim
            )));
        }
        self.obs = obs;
        self.env_steps = env_steps;
        self.iteration = iteration;
        Ok(())
    }

    /// One environment interaction. Warmup steps act uniformly at random;
    /// policy steps query the actor (plus exploration noise for the
    /// baseline). Observations update the running statistics before being
    /// normalized, and the stored reward carries the configured scale.
    fn collect_step(&mut self, warmup: bool) -> Result<()> {
        let action_dim = self.env.spec().action_dim;
        self.normalizer.update(&self.obs);
        let obs_norm = self.normalizer.normalize(&self.obs);
        let mut action_norm = if warmup {
            (0..action_dim).map(|_| self.rngs.exploration.random_range(-1.0..1.0)).collect()
        } else {
            self.agent.act(&obs_norm, ActNoise::Train, &mut self.rngs.latent)?
        };
        if !warmup {
            if let Algorithm::DdpgBaseline { exploration_noise } = &self.agent.config().algorithm {
                let sigma = *exploration_noise;
                for a in &mut action_norm {
                    let n: f64 = self.rngs.exploration.sample(StandardNormal);
                    *a = (*a + sigma * n).clamp(-1.0, 1.0);
                }
            }
        }
        let raw_action = self.env.spec().denormalize_action(&action_norm);
        let outcome = self.env.step(&raw_action)?;
        let next_norm = self.normalizer.normalize(&outcome.obs);
        let scaled_reward = self.env.spec().scale_reward(outcome.reward);
        self.buffer.push(&obs_norm, &action_norm, scaled_reward, &next_norm, outcome.terminal);
        self.env_steps += 1;
        if outcome.terminal || outcome.truncated {
            self.obs = self.env.reset(&mut self.rngs.env);
        } else {
            self.obs = outcome.obs;
        }
        Ok(())
    }

    /// Fills the buffer with uniform-random transitions until one batch
    /// can be sampled. No-op once the buffer is full enough (e.g. after a
    /// checkpoint restore).
    pub fn warmup(&mut self) -> Result<usize> {
        let mut added = 0;
        while self.buffer.len() < self.agent.config().batch_size {
            self.collect_step(true)?;
            added += 1;
        }
        Ok(added)
    }

    /// One outer iteration: collect, update, drift β, evaluate.
    pub fn run_iteration(&mut self) -> Result<IterationRow> {
        self.warmup()?;
        let cfg = self.agent.config().clone();
        for _ in 0..cfg.steps_per_iteration {
            self.collect_step(false)?;
        }
        let mut sums = TrainStats { critic_loss: 0.0, actor_loss: 0.0, mmd_value: 0.0, alpha: 0.0 };
        for _ in 0..cfg.updates_per_iteration {
            let batch = self.buffer.sample(cfg.batch_size, &mut self.rngs.buffer_sample)?;
            let stats =
                self.agent.update_step(&batch, &mut self.rngs.latent, &mut self.rngs.uniform_ref)?;
            sums.critic_loss += stats.critic_loss;
            sums.actor_loss += stats.actor_loss;
            sums.mmd_value += stats.mmd_value;
            sums.alpha = stats.alpha;
        }
        self.agent.beta_update();
        self.iteration += 1;
        let evals = self.evaluate(cfg.eval_episodes, ActNoise::Eval)?;
        let n = cfg.updates_per_iteration as f64;
        Ok(IterationRow {
            step: self.iteration,
            env_steps: self.env_steps,
            eval_return_mean: evals.mean,
            eval_return_std: evals.std,
            critic_loss: sums.critic_loss / n,
            actor_loss: sums.actor_loss / n,
            mmd_value: sums.mmd_value / n,
            alpha: sums.alpha,
            beta: self.agent.alpha_mode().beta(),
        })
    }

    /// Runs evaluation episodes on a separate environment instance with
    /// frozen normalizer statistics, summing unscaled rewards. The reported
    /// spread is the population standard deviation.
    pub fn evaluate(&mut self, episodes: usize, noise: ActNoise) -> Result<EvalStats> {
        if episodes == 0 {
            return Err(GacError::InvalidArgument("evaluation needs at least one episode".into()));
        }
        let mut returns = Vec::with_capacity(episodes);
        let mut terminals = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let mut obs = self.eval_env.reset(&mut self.rngs.eval);
            let mut total = 0.0;
            loop {
                let obs_norm = self.normalizer.normalize(&obs);
                let action_norm = self.agent.act(&obs_norm, noise, &mut self.rngs.eval)?;
                let raw_action = self.eval_env.spec().denormalize_action(&action_norm);
                let outcome = self.eval_env.step(&raw_action)?;
                total += outcome.reward;
                if outcome.terminal || outcome.truncated {
                    terminals.push(outcome.terminal);
                    break;
                }
                obs = outcome.obs;
            }
            returns.push(total);
        }
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        Ok(EvalStats { mean, std: var.sqrt(), returns, terminals })
    }

    /// Draws `n` raw evaluation actions, each from a fresh episode start,
    /// for action-distribution studies.
    pub fn sample_eval_actions(&mut self, n: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let obs = self.eval_env.reset(&mut self.rngs.eval);
            let obs_norm = self.normalizer.normalize(&obs);
            let action_norm = self.agent.act(&obs_norm, ActNoise::Eval, &mut self.rngs.eval)?;
            out.push(self.eval_env.spec().denormalize_action(&action_norm));
        }
        Ok(out)
    }
}
