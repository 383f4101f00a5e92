//! FIFO replay buffer with uniform-with-replacement sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::Tensor;
use crate::error::{GacError, Result};

/// One stored interaction, viewed in place. Observations and actions are in
/// normalized space; the reward carries the configured scale.
#[derive(Debug, PartialEq)]
pub struct TransitionView<'a> {
    pub state: &'a [f64],
    pub action: &'a [f64],
    pub reward: f64,
    pub next_state: &'a [f64],
    pub terminal: bool,
}

/// A sampled minibatch in tensor form. `terminals` holds 1.0 for terminal
/// transitions, 0.0 otherwise.
pub struct Batch {
    pub states: Tensor,
    pub actions: Tensor,
    pub rewards: Vec<f64>,
    pub next_states: Tensor,
    pub terminals: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Ring buffer over flat column-less storage; once full, the oldest entries
/// are overwritten in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    terminals: Vec<bool>,
    cursor: usize,
    fill: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(GacError::InvalidArgument("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            state_dim,
            action_dim,
            states: vec![0.0; capacity * state_dim],
            actions: vec![0.0; capacity * action_dim],
            rewards: vec![0.0; capacity],
            next_states: vec![0.0; capacity * state_dim],
            terminals: vec![false; capacity],
            cursor: 0,
            fill: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.fill
    }

    pub fn is_empty(&self) -> bool {
        self.fill == 0
    }

    /// Slot index of the `i`-th oldest stored transition.
    fn slot(&self, i: usize) -> usize {
        if self.fill < self.capacity {
            i
        } else {
            (self.cursor + i) % self.capacity
        }
    }

    /// The `i`-th oldest transition; panics if out of range.
    pub fn get(&self, i: usize) -> TransitionView<'_> {
        assert!(i < self.fill, "index {i} out of {} stored transitions", self.fill);
        let s = self.slot(i);
        TransitionView {
            state: &self.states[s * self.state_dim..(s + 1) * self.state_dim],
            action: &self.actions[s * self.action_dim..(s + 1) * self.action_dim],
            reward: self.rewards[s],
            next_state: &self.next_states[s * self.state_dim..(s + 1) * self.state_dim],
            terminal: self.terminals[s],
        }
    }

    pub fn push(
        &mut self,
        state: &[f64],
        action: &[f64],
        reward: f64,
        next_state: &[f64],
        terminal: bool,
    ) {
        debug_assert_eq!(state.len(), self.state_dim);
        debug_assert_eq!(action.len(), self.action_dim);
        debug_assert_eq!(next_state.len(), self.state_dim);
        let s = self.cursor;
        self.states[s * self.state_dim..(s + 1) * self.state_dim].copy_from_slice(state);
        self.actions[s * self.action_dim..(s + 1) * self.action_dim].copy_from_slice(action);
        self.rewards[s] = reward;
        self.next_states[s * self.state_dim..(s + 1) * self.state_dim].copy_from_slice(next_state);
        self.terminals[s] = terminal;
        self.cursor = (self.cursor + 1) % self.capacity;
        self.fill = (self.fill + 1).min(self.capacity);
    }

    /// Uniform sample with replacement; requires at least `m` stored
    /// transitions.
    pub fn sample(&self, m: usize, rng: &mut ChaCha8Rng) -> Result<Batch> {
        if self.fill < m {
            return Err(GacError::InvalidArgument(format!(
                "cannot sample a batch of {m} from a buffer holding {}",
                self.fill
            )));
        }
        let mut states = Vec::with_capacity(m * self.state_dim);
        let mut actions = Vec::with_capacity(m * self.action_dim);
        let mut rewards = Vec::with_capacity(m);
        let mut next_states = Vec::with_capacity(m * self.state_dim);
        let mut terminals = Vec::with_capacity(m);
        for _ in 0..m {
            let idx = rng.random_range(0..self.fill);
            // Sampling is over stored slots directly; age order is
            // irrelevant for a uniform draw.
            let s = idx;
            states.extend_from_slice(&self.states[s * self.state_dim..(s + 1) * self.state_dim]);
            actions
                .extend_from_slice(&self.actions[s * self.action_dim..(s + 1) * self.action_dim]);
            rewards.push(self.rewards[s]);
            next_states
                .extend_from_slice(&self.next_states[s * self.state_dim..(s + 1) * self.state_dim]);
            terminals.push(if self.terminals[s] { 1.0 } else { 0.0 });
        }
        Ok(Batch {
            states: Tensor::new(vec![m, self.state_dim], states)?,
            actions: Tensor::new(vec![m, self.action_dim], actions)?,
            rewards,
            next_states: Tensor::new(vec![m, self.state_dim], next_states)?,
            terminals,
        })
    }

    /// Raw storage of the filled slots in slot order, for checkpointing:
    /// (states, actions, rewards, next_states, terminals). Together with
    /// `cursor()` this captures the buffer exactly.
    pub fn dump(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.fill;
        (
            self.states[..n * self.state_dim].to_vec(),
            self.actions[..n * self.action_dim].to_vec(),
            self.rewards[..n].to_vec(),
            self.next_states[..n * self.state_dim].to_vec(),
            self.terminals[..n].iter().map(|&t| if t { 1.0 } else { 0.0 }).collect(),
        )
    }

    /// Rebuilds a buffer byte-for-byte from `dump` output plus the cursor,
    /// so sampling and subsequent pushes behave exactly as in the original.
    pub fn restore(
        capacity: usize,
        state_dim: usize,
        action_dim: usize,
        cursor: usize,
        states: &[f64],
        actions: &[f64],
        rewards: &[f64],
        next_states: &[f64],
        terminals: &[f64],
    ) -> Result<Self> {
        let fill = rewards.len();
        if fill > capacity || cursor >= capacity {
            return Err(GacError::Checkpoint(format!(
                "replay restore: fill {fill} or cursor {cursor} out of range for capacity {capacity}"
            )));
        }
        if fill < capacity && cursor != fill {
            return Err(GacError::Checkpoint(format!(
                "replay restore: cursor {cursor} inconsistent with partial fill {fill}"
            )));
        }
        if states.len() != fill * state_dim
            || actions.len() != fill * action_dim
            || next_states.len() != fill * state_dim
            || terminals.len() != fill
        {
            return Err(GacError::Checkpoint("replay restore: array lengths disagree".into()));
        }
        let mut buf = ReplayBuffer::new(capacity, state_dim, action_dim)?;
        buf.states[..states.len()].copy_from_slice(states);
        buf.actions[..actions.len()].copy_from_slice(actions);
        buf.rewards[..rewards.len()].copy_from_slice(rewards);
        buf.next_states[..next_states.len()].copy_from_slice(next_states);
        for (slot, &t) in terminals.iter().enumerate() {
            buf.terminals[slot] = t != 0.0;
        }
        buf.cursor = cursor;
        buf.fill = fill;
        Ok(buf)
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn push_scalar(buf: &mut ReplayBuffer, v: f64) {
        buf.push(&[v], &[v], v, &[v + 0.5], false);
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(3, 1, 1).unwrap();
        for i in 0..4 {
            push_scalar(&mut buf, i as f64);
        }
        assert_eq!(buf.len(), 3);
        // Oldest (0.0) gone; 1, 2, 3 remain in age order.
        let stored: Vec<f64> = (0..3).map(|i| buf.get(i).reward).collect();
        assert_eq!(stored, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn capacity_plus_k_drops_exactly_k() {
        let cap = 8;
        let k = 5;
        let mut buf = ReplayBuffer::new(cap, 1, 1).unwrap();
        for i in 0..(cap + k) {
            push_scalar(&mut buf, i as f64);
        }
        assert_eq!(buf.len(), cap);
        let stored: Vec<f64> = (0..cap).map(|i| buf.get(i).reward).collect();
        let want: Vec<f64> = (k..cap + k).map(|i| i as f64).collect();
        assert_eq!(stored, want);
    }

    #[test]
    fn sample_requires_fill() {
        let mut buf = ReplayBuffer::new(10, 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        push_scalar(&mut buf, 1.0);
        assert!(buf.sample(2, &mut rng).is_err());
        push_scalar(&mut buf, 2.0);
        assert!(buf.sample(2, &mut rng).is_ok());
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let mut buf = ReplayBuffer::new(16, 2, 1).unwrap();
        for i in 0..10 {
            buf.push(&[i as f64, -(i as f64)], &[0.1 * i as f64], i as f64, &[0.0, 0.0], i % 3 == 0);
        }
        let a = buf.sample(6, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = buf.sample(6, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.actions, b.actions);
        assert_eq!(a.rewards, b.rewards);
        assert_eq!(a.next_states, b.next_states);
        assert_eq!(a.terminals, b.terminals);
    }

    #[test]
    fn sampled_rows_come_from_stored_transitions() {
        let mut buf = ReplayBuffer::new(8, 1, 1).unwrap();
        for i in 0..5 {
            push_scalar(&mut buf, i as f64);
        }
        // Replacement sampling: several full-size draws cover the buffer.
        for seed in 0..4 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let batch = buf.sample(5, &mut rng).unwrap();
            for i in 0..batch.len() {
                let r = batch.rewards[i];
                assert!((0.0..5.0).contains(&r));
                assert_eq!(batch.states.row(i)[0], r);
                assert_eq!(batch.next_states.row(i)[0], r + 0.5);
            }
        }
    }

    #[test]
    fn dump_restore_round_trip_after_wrap() {
        let mut buf = ReplayBuffer::new(4, 1, 2).unwrap();
        for i in 0..6 {
            buf.push(&[i as f64], &[0.0, i as f64], i as f64 * 0.1, &[1.0], i % 2 == 0);
        }
        let (s, a, r, s2, t) = buf.dump();
        let mut restored =
            ReplayBuffer::restore(4, 1, 2, buf.cursor(), &s, &a, &r, &s2, &t).unwrap();
        assert_eq!(restored, buf);
        // Sampling and subsequent pushes behave identically.
        let x = buf.sample(4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let y = restored.sample(4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(x.rewards, y.rewards);
        assert_eq!(x.states, y.states);
        buf.push(&[9.0], &[9.0, 9.0], 9.0, &[9.0], false);
        restored.push(&[9.0], &[9.0, 9.0], 9.0, &[9.0], false);
        assert_eq!(restored, buf);
    }

    #[test]
    fn restore_rejects_inconsistent_cursor() {
        let mut buf = ReplayBuffer::new(4, 1, 1).unwrap();
        push_scalar(&mut buf, 1.0);
        push_scalar(&mut buf, 2.0);
        let (s, a, r, s2, t) = buf.dump();
        let bad = ReplayBuffer::restore(4, 1, 1, 3, &s, &a, &r, &s2, &t);
        assert!(bad.is_err());
    }
}
