//! Desk-scale laboratory for generative actor-critic reinforcement learning:
//! push-forward policies trained against twin critics, regularized toward
//! broad action coverage by a kernel distance to the uniform action
//! distribution, with an adaptive trade-off temperature.

pub mod agent;
pub mod diffcore;
pub mod envs;
pub mod error;
pub mod harness;
pub mod mmd;
pub mod nets;

pub use error::{GacError, Result};
