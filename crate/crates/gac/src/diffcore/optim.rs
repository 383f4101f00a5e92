//! Parameter updates: Adam and plain gradient descent.

use crate::diffcore::tensor::Tensor;
use crate::error::{GacError, Result};

/// Adam state over a fixed group of parameter tensors. Moment estimates are
/// kept per tensor in the same order the group was created with.
#[derive(Clone, Debug)]
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(lr: f64, shapes: &[Vec<usize>]) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    pub fn for_params(lr: f64, params: &[&Tensor]) -> Self {
        let shapes: Vec<Vec<usize>> = params.iter().map(|p| p.shape().to_vec()).collect();
        AdamState::new(lr, &shapes)
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.m, &self.v)
    }

    /// Restores previously saved state; shapes must match the running group.
    pub fn restore(&mut self, t: u64, m: Vec<Tensor>, v: Vec<Tensor>) -> Result<()> {
        if m.len() != self.m.len() || v.len() != self.v.len() {
            return Err(GacError::InvalidArgument(
                "optimizer state tensor count does not match parameter group".into(),
            ));
        }
        for (new, old) in m.iter().chain(v.iter()).zip(self.m.iter().chain(self.v.iter())) {
            if new.shape() != old.shape() {
                return Err(GacError::InvalidArgument(
                    "optimizer state shape does not match parameter group".into(),
                ));
            }
        }
        self.t = t;
        self.m = m;
        self.v = v;
        Ok(())
    }

    /// One Adam step with bias correction. Refuses non-finite gradients so a
    /// diverged loss stops the run instead of poisoning the parameters.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], context: &str) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(GacError::InvalidArgument(format!(
                "adam step for {context}: got {} params, {} grads, state holds {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(GacError::InvalidArgument(format!(
                    "adam step for {context}: gradient shape {:?} does not match parameter {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            if !g.all_finite() {
                return Err(GacError::NonFiniteGradient { context: context.to_string() });
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(&mut self.v)) {
            let pd = p.data_mut();
            for (((pv, &gv), mv), vv) in
                pd.iter_mut().zip(g.data()).zip(m.data_mut().iter_mut()).zip(v.data_mut().iter_mut())
            {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                let mhat = *mv / bc1;
                let vhat = *vv / bc2;
                *pv -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// One plain gradient-descent step `p -= step * g` over a parameter group.
pub fn gd_step(params: &mut [&mut Tensor], grads: &[Tensor], step: f64, context: &str) -> Result<()> {
    if params.len() != grads.len() {
        return Err(GacError::InvalidArgument(format!(
            "gd step for {context}: got {} params and {} grads",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(GacError::InvalidArgument(format!(
                "gd step for {context}: gradient shape {:?} does not match parameter {:?}",
                g.shape(),
                p.shape()
            )));
        }
        if !g.all_finite() {
            return Err(GacError::NonFiniteGradient { context: context.to_string() });
        }
    }
    for (p, g) in params.iter_mut().zip(grads) {
        for (pv, &gv) in p.data_mut().iter_mut().zip(g.data()) {
            *pv -= step * gv;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_hand_value() {
        // theta = 0, g = 2, lr = 1e-3: mhat = 2, vhat = 4,
        // theta -> -1e-3 * 2 / (2 + 1e-8) ~ -9.99999995e-4.
        let mut theta = Tensor::scalar(0.0);
        let mut adam = AdamState::for_params(1e-3, &[&theta]);
        adam.step(&mut [&mut theta], &[Tensor::scalar(2.0)], "test").unwrap();
        assert!((theta.item() - (-9.99999995e-4)).abs() < 1e-12, "got {}", theta.item());
        assert_eq!(adam.t(), 1);
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut theta = Tensor::scalar(0.0);
        let mut adam = AdamState::for_params(1e-3, &[&theta]);
        let err = adam.step(&mut [&mut theta], &[Tensor::scalar(f64::NAN)], "test").unwrap_err();
        assert!(matches!(err, GacError::NonFiniteGradient { .. }));
        // State untouched by the refused step.
        assert_eq!(adam.t(), 0);
        assert_eq!(theta.item(), 0.0);
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut theta = Tensor::vector(vec![0.0, 0.0]);
        let mut adam = AdamState::for_params(1e-3, &[&theta]);
        assert!(adam.step(&mut [&mut theta], &[Tensor::scalar(1.0)], "test").is_err());
    }

    #[test]
    fn gd_step_hand_value() {
        let mut theta = Tensor::scalar(1.0);
        gd_step(&mut [&mut theta], &[Tensor::scalar(1.0)], 5e-3, "test").unwrap();
        assert_eq!(theta.item(), 0.995);
    }

    #[test]
    fn adam_state_round_trips_through_restore() {
        let mut theta = Tensor::vector(vec![0.1, -0.2]);
        let mut adam = AdamState::for_params(1e-3, &[&theta]);
        adam.step(&mut [&mut theta], &[Tensor::vector(vec![1.0, -1.0])], "test").unwrap();
        let (m, v) = adam.moments();
        let (m, v) = (m.to_vec(), v.to_vec());
        let t = adam.t();

        let mut fresh = AdamState::for_params(1e-3, &[&theta]);
        fresh.restore(t, m, v).unwrap();
        let mut a_theta = theta.clone();
        let mut b_theta = theta.clone();
        let g = Tensor::vector(vec![0.3, 0.7]);
        adam.step(&mut [&mut a_theta], &[g.clone()], "test").unwrap();
        fresh.step(&mut [&mut b_theta], &[g], "test").unwrap();
        assert_eq!(a_theta, b_theta);
    }
}
