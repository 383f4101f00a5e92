//! Adaptive Lagrange mechanism: the entropy weight α is trained in log
//! space against a moving target β, and β itself drifts to keep α inside
//! a configured band.

use crate::diffcore::{AdamState, Tensor};
use crate::error::{GacError, Result};

/// Smallest value β may take after an update.
pub const BETA_FLOOR: f64 = 1e-6;

/// sign with sign(0) = 0, as the β rule requires. `f64::signum` maps 0.0
/// to 1.0 and is not usable here.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// State of the adaptive α mechanism.
///
/// α is represented as exp(log_alpha) so positivity is structural. β is
/// lazily initialized to the first measured MMD value, which makes the
/// first α gradient zero and starts the constraint at the policy's actual
/// operating point.
#[derive(Clone, Debug)]
pub struct AdaptiveAlpha {
    log_alpha: Tensor,
    beta: Option<f64>,
    alpha_min: f64,
    alpha_max: f64,
    delta_beta: f64,
    adam: AdamState,
}

impl AdaptiveAlpha {
    pub fn new(alpha_min: f64, alpha_max: f64, delta_beta: f64, adam_step: f64) -> Result<Self> {
        if !(alpha_min.is_finite() && alpha_max.is_finite() && delta_beta.is_finite()) {
            return Err(GacError::InvalidArgument("adaptive alpha bounds must be finite".into()));
        }
        if alpha_min <= 0.0 || alpha_max <= alpha_min {
            return Err(GacError::InvalidArgument(format!(
                "need 0 < alpha_min < alpha_max, got [{alpha_min}, {alpha_max}]"
            )));
        }
        if delta_beta <= 0.0 {
            return Err(GacError::InvalidArgument(format!(
                "delta_beta must be positive, got {delta_beta}"
            )));
        }
        // Start in the middle of the band (log scale) so beta_update is a
        // no-op until alpha actually drifts.
        let log_alpha = Tensor::scalar(0.5 * (alpha_min.ln() + alpha_max.ln()));
        let adam = AdamState::for_params(adam_step, &[&log_alpha]);
        Ok(AdaptiveAlpha { log_alpha, beta: None, alpha_min, alpha_max, delta_beta, adam })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.item().exp()
    }

    pub fn log_alpha(&self) -> f64 {
        self.log_alpha.item()
    }

    /// β, or 0 before the first MMD measurement has seeded it.
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(0.0)
    }

    pub fn beta_initialized(&self) -> bool {
        self.beta.is_some()
    }

    pub fn alpha_min(&self) -> f64 {
        self.alpha_min
    }

    pub fn alpha_max(&self) -> f64 {
        self.alpha_max
    }

    pub fn delta_beta(&self) -> f64 {
        self.delta_beta
    }

    /// One Adam step on log_alpha holding the measured MMD fixed. The loss
    /// ln α · (β − mmd) has gradient (β − mmd) w.r.t. log_alpha, so an MMD
    /// above β pushes α up and one below β pushes it down. Seeds β on the
    /// first call.
    pub fn alpha_update(&mut self, mmd_value: f64) -> Result<()> {
        if !mmd_value.is_finite() {
            return Err(GacError::NonFiniteGradient {
                context: format!("alpha update received mmd_value {mmd_value}"),
            });
        }
        let beta = *self.beta.get_or_insert(mmd_value);
        let grad = Tensor::scalar(beta - mmd_value);
        self.adam.step(&mut [&mut self.log_alpha], &[grad], "log_alpha")
    }

    /// β ← β − Δβ·½·[sign(α_max − α) + sign(α_min − α)], floored. Called
    /// once per outer iteration; a no-op before β has been seeded.
    pub fn beta_update(&mut self) {
        let Some(beta) = self.beta else { return };
        let alpha = self.alpha();
        let grad = 0.5 * (sign(self.alpha_max - alpha) + sign(self.alpha_min - alpha));
        self.beta = Some((beta - self.delta_beta * grad).max(BETA_FLOOR));
    }

    /// (log_alpha, beta flag, beta, optimizer state) for checkpointing.
    pub fn state(&self) -> (f64, bool, f64, &AdamState) {
        (self.log_alpha.item(), self.beta.is_some(), self.beta.unwrap_or(0.0), &self.adam)
    }

    pub fn restore(
        &mut self,
        log_alpha: f64,
        beta_initialized: bool,
        beta: f64,
        adam_t: u64,
        adam_m: Vec<Tensor>,
        adam_v: Vec<Tensor>,
    ) -> Result<()> {
        self.log_alpha = Tensor::scalar(log_alpha);
        self.beta = if beta_initialized { Some(beta) } else { None };
        self.adam.restore(adam_t, adam_m, adam_v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresh() -> AdaptiveAlpha {
        AdaptiveAlpha::new(1.0, 1.8, 0.01, 1e-3).unwrap()
    }

    #[test]
    fn sign_convention() {
        assert_eq!(sign(3.2), 1.0);
        assert_eq!(sign(-0.1), -1.0);
        assert_eq!(sign(0.0), 0.0);
    }

    #[test]
    fn alpha_is_positive_and_mid_band() {
        let a = fresh();
        let alpha = a.alpha();
        assert!(alpha > 0.0);
        assert!(alpha > a.alpha_min() && alpha < a.alpha_max());
        assert!((alpha - (1.0f64 * 1.8).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn first_update_seeds_beta_and_leaves_alpha_fixed() {
        let mut a = fresh();
        assert!(!a.beta_initialized());
        let before = a.log_alpha();
        a.alpha_update(0.37).unwrap();
        assert!(a.beta_initialized());
        assert_eq!(a.beta(), 0.37);
        // beta == mmd on the seeding step: zero gradient, fresh moments.
        assert_eq!(a.log_alpha(), before);
    }

    #[test]
    fn mmd_above_beta_raises_log_alpha() {
        let mut a = fresh();
        a.alpha_update(0.5).unwrap();
        let before = a.log_alpha();
        a.alpha_update(0.9).unwrap();
        assert!(a.log_alpha() > before);
    }

    #[test]
    fn mmd_below_beta_lowers_log_alpha() {
        let mut a = fresh();
        a.alpha_update(0.5).unwrap();
        let before = a.log_alpha();
        a.alpha_update(0.1).unwrap();
        assert!(a.log_alpha() < before);
    }

    #[test]
    fn beta_update_three_cases() {
        // Above the band: both signs -1, gradient -1, beta rises by delta.
        let mut a = fresh();
        a.alpha_update(0.5).unwrap();
        a.restore(2.0f64.ln(), true, 0.5, 0, vec![Tensor::scalar(0.0)], vec![Tensor::scalar(0.0)])
            .unwrap();
        a.beta_update();
        assert_eq!(a.beta(), 0.51);

        // Inside the band: offsetting signs, beta unchanged.
        a.restore(1.4f64.ln(), true, 0.5, 0, vec![Tensor::scalar(0.0)], vec![Tensor::scalar(0.0)])
            .unwrap();
        a.beta_update();
        assert_eq!(a.beta(), 0.5);

        // Below the band: both signs +1, beta falls by delta.
        a.restore(0.5f64.ln(), true, 0.5, 0, vec![Tensor::scalar(0.0)], vec![Tensor::scalar(0.0)])
            .unwrap();
        a.beta_update();
        assert_eq!(a.beta(), 0.49);
    }

    #[test]
    fn beta_never_drops_below_floor() {
        let mut a = fresh();
        a.restore(
            0.5f64.ln(),
            true,
            BETA_FLOOR,
            0,
            vec![Tensor::scalar(0.0)],
            vec![Tensor::scalar(0.0)],
        )
        .unwrap();
        for _ in 0..100 {
            a.beta_update();
            assert!(a.beta() >= BETA_FLOOR);
        }
        assert_eq!(a.beta(), BETA_FLOOR);
    }

    #[test]
    fn beta_update_before_seeding_is_noop() {
        let mut a = fresh();
        a.beta_update();
        assert!(!a.beta_initialized());
    }

    #[test]
    fn band_validation() {
        assert!(AdaptiveAlpha::new(0.0, 1.8, 0.01, 1e-3).is_err());
        assert!(AdaptiveAlpha::new(1.8, 1.0, 0.01, 1e-3).is_err());
        assert!(AdaptiveAlpha::new(1.0, 1.8, 0.0, 1e-3).is_err());
        assert!(AdaptiveAlpha::new(1.0, f64::NAN, 0.01, 1e-3).is_err());
    }

    #[test]
    fn rejects_non_finite_mmd() {
        let mut a = fresh();
        assert!(a.alpha_update(f64::NAN).is_err());
    }
}
