//! Tensors, reverse-mode autodiff, optimizers, and initialization.

mod init;
mod optim;
mod tape;
mod tensor;

pub use init::MlpParams;
pub use optim::{gd_step, AdamState};
pub use tape::{Gradients, Tape, Var, EPS_MMD};
pub use tensor::Tensor;

pub(crate) use tensor::matmul as raw_matmul;
