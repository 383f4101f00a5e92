//! Streaming observation normalization.

use crate::error::{GacError, Result};

/// Per-component running mean and variance (Welford), used to whiten raw
/// observations. Updated only while collecting training experience; frozen
/// copies are used for evaluation so a policy sees a fixed mapping.
#[derive(Clone, Debug, PartialEq)]
pub struct ObsNormalizer {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl ObsNormalizer {
    pub fn new(dim: usize) -> Self {
        ObsNormalizer { count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn update(&mut self, obs: &[f64]) {
        debug_assert_eq!(obs.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(obs) {
            let delta = x - *m;
            *m += delta / n;
            *m2 += delta * (x - *m);
        }
    }

    /// Per-component standard deviation estimate (n-1 denominator); zero
    /// until two observations have been seen.
    pub fn std(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        self.m2.iter().map(|&m2| (m2 / (self.count - 1) as f64).sqrt()).collect()
    }

    /// `clip((x - mean) / max(std, 1e-6), -5, 5)` per component. Before any
    /// update the observation passes through unshifted (still clipped).
    pub fn normalize(&self, obs: &[f64]) -> Vec<f64> {
        if self.count == 0 {
            return obs.iter().map(|&x| x.clamp(-5.0, 5.0)).collect();
        }
        let std = self.std();
        obs.iter()
            .zip(self.mean.iter().zip(&std))
            .map(|(&x, (&m, &s))| ((x - m) / s.max(1e-6)).clamp(-5.0, 5.0))
            .collect()
    }

    pub fn state(&self) -> (u64, &[f64], &[f64]) {
        (self.count, &self.mean, &self.m2)
    }

    pub fn restore(count: u64, mean: Vec<f64>, m2: Vec<f64>) -> Result<Self> {
        if mean.len() != m2.len() {
            return Err(GacError::InvalidArgument(
                "normalizer mean and m2 lengths differ".into(),
            ));
        }
        Ok(ObsNormalizer { count, mean, m2 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_observations_hand_value() {
        // After seeing [1] and [3]: mean 2, sample std sqrt(2),
        // normalize(3) = 1/sqrt(2).
        let mut n = ObsNormalizer::new(1);
        n.update(&[1.0]);
        n.update(&[3.0]);
        assert_eq!(n.mean, vec![2.0]);
        assert!((n.std()[0] - (2.0f64).sqrt()).abs() < 1e-12);
        let z = n.normalize(&[3.0]);
        assert!((z[0] - 1.0 / (2.0f64).sqrt()).abs() < 1e-12, "got {}", z[0]);
    }

    #[test]
    fn output_always_within_clip_range() {
        let mut n = ObsNormalizer::new(2);
        assert_eq!(n.normalize(&[1e9, -1e9]), vec![5.0, -5.0]);
        n.update(&[0.0, 0.0]);
        // One observation: std floors at 1e-6, clip bounds the blowup.
        assert_eq!(n.normalize(&[1.0, -1.0]), vec![5.0, -5.0]);
        n.update(&[1.0, 1.0]);
        for probe in [[-100.0, 0.3], [7.0, -2.0], [0.5, 0.5]] {
            for v in n.normalize(&probe) {
                assert!((-5.0..=5.0).contains(&v));
            }
        }
    }

    #[test]
    fn constant_stream_normalizes_to_zero() {
        let mut n = ObsNormalizer::new(1);
        for _ in 0..10 {
            n.update(&[4.2]);
        }
        assert_eq!(n.normalize(&[4.2]), vec![0.0]);
    }

    #[test]
    fn welford_matches_batch_statistics() {
        let xs = [0.3, -1.7, 2.5, 0.0, 4.1, -0.9, 1.1];
        let mut n = ObsNormalizer::new(1);
        for &x in &xs {
            n.update(&[x]);
        }
        let mean: f64 = xs.iter().sum::<f64>() / xs.len() as f64;
        let var: f64 =
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((n.mean[0] - mean).abs() < 1e-12);
        assert!((n.std()[0] - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn restore_round_trip() {
        let mut n = ObsNormalizer::new(2);
        n.update(&[1.0, -2.0]);
        n.update(&[0.5, 3.0]);
        let (c, mean, m2) = n.state();
        let r = ObsNormalizer::restore(c, mean.to_vec(), m2.to_vec()).unwrap();
        assert_eq!(n, r);
    }
}
