//! Parameter initialization for fully connected stacks.

use rand::Rng;

use crate::diffcore::tensor::Tensor;
use crate::error::{GacError, Result};

/// Weights and biases of a fully connected stack, layer by layer.
/// `weights[l]` has shape `[dims[l], dims[l+1]]`, `biases[l]` has shape
/// `[dims[l+1]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    dims: Vec<usize>,
    pub weights: Vec<Tensor>,
    pub biases: Vec<Tensor>,
}

impl MlpParams {
    /// Initializes weights uniformly in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`
    /// and biases to zero.
    pub fn init(dims: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(GacError::InvalidArgument(format!(
                "layer dims need at least input and output sizes, got {dims:?}"
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(GacError::InvalidArgument(format!("layer dims contain zero: {dims:?}")));
        }
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data: Vec<f64> =
                (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            weights.push(Tensor::matrix(fan_in, fan_out, data)?);
            biases.push(Tensor::zeros(&[fan_out]));
        }
        Ok(MlpParams { dims: dims.to_vec(), weights, biases })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn in_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.dims.last().expect("dims non-empty")
    }

    /// Parameters in canonical order: w0, b0, w1, b1, ...
    pub fn flat(&self) -> Vec<&Tensor> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn flat_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights
            .iter_mut()
            .zip(&mut self.biases)
            .flat_map(|(w, b)| [w as &mut Tensor, b as &mut Tensor])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Tensor::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_bounds_and_zero_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = MlpParams::init(&[4, 8, 2], &mut rng).unwrap();
        assert_eq!(p.weights[0].shape(), &[4, 8]);
        assert_eq!(p.weights[1].shape(), &[8, 2]);
        assert_eq!(p.biases[0].shape(), &[8]);
        assert_eq!(p.biases[1].shape(), &[2]);
        let b0 = 1.0 / 2.0;
        assert!(p.weights[0].data().iter().all(|v| v.abs() <= b0));
        let b1 = 1.0 / (8.0f64).sqrt();
        assert!(p.weights[1].data().iter().all(|v| v.abs() <= b1));
        assert!(p.biases.iter().all(|b| b.data().iter().all(|&v| v == 0.0)));
        assert_eq!(p.param_count(), 4 * 8 + 8 + 8 * 2 + 2);
    }

    #[test]
    fn same_seed_same_params() {
        let a = MlpParams::init(&[3, 5, 1], &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = MlpParams::init(&[3, 5, 1], &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
        let c = MlpParams::init(&[3, 5, 1], &mut ChaCha8Rng::seed_from_u64(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_degenerate_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(MlpParams::init(&[4], &mut rng).is_err());
        assert!(MlpParams::init(&[], &mut rng).is_err());
        assert!(MlpParams::init(&[4, 0, 2], &mut rng).is_err());
    }
}
