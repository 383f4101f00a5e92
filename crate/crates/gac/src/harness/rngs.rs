//! Named, independently seeded random streams.
//!
//! Every consumer of randomness in a run owns its own stream, keyed by a
//! stable name. Streams are derived as ChaCha8 generators seeded with
//! SHA-256(root_seed_le_bytes || name), so adding a new consumer never
//! perturbs the draws of existing ones, and each stream's position is a
//! single word counter that checkpoints exactly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{GacError, Result};

/// One derived stream. Position starts at word 0.
pub fn stream(root_seed: u64, name: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(root_seed.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// All random streams of one training run.
#[derive(Clone, Debug)]
pub struct RunRngs {
    /// Environment resets.
    pub env: ChaCha8Rng,
    /// Network parameter initialization.
    pub init: ChaCha8Rng,
    /// Latent draws z during training (acting and update steps).
    pub latent: ChaCha8Rng,
    /// Uniform reference actions for the entropy estimate.
    pub uniform_ref: ChaCha8Rng,
    /// Replay minibatch index draws.
    pub buffer_sample: ChaCha8Rng,
    /// Warmup uniform actions and baseline exploration noise.
    pub exploration: ChaCha8Rng,
    /// Evaluation resets and latent draws; evaluation owns its own stream
    /// so its cadence never perturbs training trajectories.
    pub eval: ChaCha8Rng,
}

/// Stream names in checkpoint order.
pub const STREAM_NAMES: [&str; 7] =
    ["env", "init", "latent", "uniform_ref", "buffer_sample", "exploration", "eval"];

impl RunRngs {
    pub fn new(root_seed: u64) -> Self {
        RunRngs {
            env: stream(root_seed, "env"),
            init: stream(root_seed, "init"),
            latent: stream(root_seed, "latent"),
            uniform_ref: stream(root_seed, "uniform_ref"),
            buffer_sample: stream(root_seed, "buffer_sample"),
            exploration: stream(root_seed, "exploration"),
            eval: stream(root_seed, "eval"),
        }
    }

    fn ordered(&self) -> [&ChaCha8Rng; 7] {
        [
            &self.env,
            &self.init,
            &self.latent,
            &self.uniform_ref,
            &self.buffer_sample,
            &self.exploration,
            &self.eval,
        ]
    }

    fn ordered_mut(&mut self) -> [&mut ChaCha8Rng; 7] {
        [
            &mut self.env,
            &mut self.init,
            &mut self.latent,
            &mut self.uniform_ref,
            &mut self.buffer_sample,
            &mut self.exploration,
            &mut self.eval,
        ]
    }

    /// Word positions in `STREAM_NAMES` order.
    pub fn word_positions(&self) -> [u128; 7] {
        let mut out = [0u128; 7];
        for (slot, rng) in out.iter_mut().zip(self.ordered()) {
            *slot = rng.get_word_pos();
        }
        out
    }

    /// Rebuilds all streams from the root seed and saved word positions.
    pub fn restore(root_seed: u64, positions: &[u128]) -> Result<Self> {
        if positions.len() != STREAM_NAMES.len() {
            return Err(GacError::Checkpoint(format!(
                "expected {} stream positions, found {}",
                STREAM_NAMES.len(),
                positions.len()
            )));
        }
        let mut rngs = RunRngs::new(root_seed);
        for (rng, &pos) in rngs.ordered_mut().into_iter().zip(positions) {
            rng.set_word_pos(pos);
        }
        Ok(rngs)
    }
}
