//! Kernel maximum mean discrepancy between sample sets, and the policy
//! entropy surrogate built from it.
//!
//! The estimator is the biased V-statistic: all pairs contribute, including
//! i = j. The squared discrepancy is clamped at `EPS_MMD` before the outer
//! root so the estimate stays differentiable when the two sets coincide.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diffcore::{Tape, Tensor, Var, EPS_MMD};
use crate::error::{GacError, Result};
use crate::nets::ActorNet;

/// Kernel choice for the discrepancy estimator.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    /// k(x, y) = -||x - y||^2. The default; its estimator has the closed
    /// form sqrt(2) * ||mean(X) - mean(Y)||.
    EnergySquared,
    /// k(x, y) = -||x - y||, with the distance floored at sqrt(EPS_MMD) to
    /// match the differentiable path exactly.
    Energy,
    /// k(x, y) = exp(-||x - y||^2 / (2 sigma^2)).
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        if let KernelSpec::Gaussian { sigma } = self {
            if !(*sigma > 0.0) || !sigma.is_finite() {
                return Err(GacError::InvalidArgument(format!(
                    "gaussian kernel bandwidth must be positive and finite, got {sigma}"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::EnergySquared => "energy_squared",
            KernelSpec::Energy => "energy",
            KernelSpec::Gaussian { .. } => "gaussian",
        }
    }
}

/// Kernel value for a single pair of points. This is the same arithmetic the
/// tape path applies to the pairwise distance matrix, so brute-force sums
/// over `kernel_eval` reproduce `mmd_estimate` exactly up to summation order.
pub fn kernel_eval(kernel: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(GacError::InvalidArgument(format!(
            "kernel points have dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    kernel.validate()?;
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(match kernel {
        KernelSpec::EnergySquared => -d2,
        KernelSpec::Energy => -d2.max(EPS_MMD).sqrt(),
        KernelSpec::Gaussian { sigma } => (-d2 / (2.0 * sigma * sigma)).exp(),
    })
}

fn apply_kernel(tape: &mut Tape, sq_dist: Var, kernel: &KernelSpec) -> Result<Var> {
    match kernel {
        KernelSpec::EnergySquared => tape.scalar_mul(sq_dist, -1.0),
        KernelSpec::Energy => {
            let d = tape.sqrt_clamped(sq_dist)?;
            tape.scalar_mul(d, -1.0)
        }
        KernelSpec::Gaussian { sigma } => {
            let e = tape.scalar_mul(sq_dist, -1.0 / (2.0 * sigma * sigma))?;
            tape.exp(e)
        }
    }
}

/// MMD between the row sets of `x` and `y`, built on `tape` so gradients flow
/// into both sample sets.
pub fn mmd_var(tape: &mut Tape, x: Var, y: Var, kernel: &KernelSpec) -> Result<Var> {
    kernel.validate()?;
    let (m, n) = (tape.value(x).shape()[0], tape.value(y).shape()[0]);
    if m == 0 || n == 0 {
        return Err(GacError::InvalidArgument("mmd of an empty sample set".into()));
    }
    let dxx = tape.pairwise_sq_dist(x, x)?;
    let kxx = apply_kernel(tape, dxx, kernel)?;
    let sxx = tape.sum(kxx)?;
    let txx = tape.scalar_mul(sxx, 1.0 / (m * m) as f64)?;

    let dyy = tape.pairwise_sq_dist(y, y)?;
    let kyy = apply_kernel(tape, dyy, kernel)?;
    let syy = tape.sum(kyy)?;
    let tyy = tape.scalar_mul(syy, 1.0 / (n * n) as f64)?;

    let dxy = tape.pairwise_sq_dist(x, y)?;
    let kxy = apply_kernel(tape, dxy, kernel)?;
    let sxy = tape.sum(kxy)?;
    let txy = tape.scalar_mul(sxy, -2.0 / (m * n) as f64)?;

    let partial = tape.add(txx, tyy)?;
    let bracket = tape.add(partial, txy)?;
    tape.sqrt_clamped(bracket)
}

/// MMD between two fixed sample sets (rows are points).
pub fn mmd_estimate(x: &Tensor, y: &Tensor, kernel: &KernelSpec) -> Result<f64> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let yv = tape.constant(y.clone());
    let m = mmd_var(&mut tape, xv, yv, kernel)?;
    Ok(tape.value(m).item())
}

/// Mean per-state MMD between policy actions and reference samples.
///
/// `actions` and `refs` hold `m_states` consecutive blocks of `m_samples`
/// rows each; block `i` belongs to state `i`. Returns the average of the
/// per-block discrepancies.
pub fn policy_mmd_var(
    tape: &mut Tape,
    actions: Var,
    refs: Var,
    m_states: usize,
    m_samples: usize,
    kernel: &KernelSpec,
) -> Result<Var> {
    if m_states == 0 {
        return Err(GacError::InvalidArgument("policy mmd needs at least one state".into()));
    }
    if m_samples < 2 {
        return Err(GacError::InvalidArgument(format!(
            "policy mmd needs at least 2 samples per state, got {m_samples}"
        )));
    }
    for (name, v) in [("actions", actions), ("refs", refs)] {
        let rows = tape.value(v).shape()[0];
        if rows != m_states * m_samples {
            return Err(GacError::InvalidArgument(format!(
                "policy mmd {name} has {rows} rows, expected {} ({m_states} states x {m_samples})",
                m_states * m_samples
            )));
        }
    }
    let mut acc: Option<Var> = None;
    for s in 0..m_states {
        let a = tape.slice_rows(actions, s * m_samples, m_samples)?;
        let r = tape.slice_rows(refs, s * m_samples, m_samples)?;
        let m = mmd_var(tape, a, r, kernel)?;
        acc = Some(match acc {
            Some(prev) => tape.add(prev, m)?,
            None => m,
        });
    }
    tape.scalar_mul(acc.expect("m_states >= 1"), 1.0 / m_states as f64)
}

/// Monte Carlo estimate of the policy's action coverage at the given states:
/// for each state, `m_samples` pushed-forward actions are compared against
/// `m_samples` uniform reference actions, and the per-state MMDs averaged.
pub fn policy_mmd_entropy(
    actor: &ActorNet,
    states: &Tensor,
    m_samples: usize,
    latent_sigma: f64,
    kernel: &KernelSpec,
    rng_latent: &mut ChaCha8Rng,
    rng_ref: &mut ChaCha8Rng,
) -> Result<f64> {
    let (m_states, _) = states.dims2();
    let total = m_states * m_samples;
    let z = sample_gaussian(total, actor.noise_dim(), latent_sigma, rng_latent);
    let rep = repeat_rows(states, m_samples);
    let actions = actor.act_batch(&rep, &z)?;
    let refs = sample_uniform_sym(total, actor.action_dim(), rng_ref);
    let mut tape = Tape::new();
    let av = tape.constant(actions);
    let rv = tape.constant(refs);
    let out = policy_mmd_var(&mut tape, av, rv, m_states, m_samples, kernel)?;
    Ok(tape.value(out).item())
}

/// `[m, d]` of N(0, sigma^2) draws, row-major generation order.
pub fn sample_gaussian(rows: usize, cols: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let data: Vec<f64> =
        (0..rows * cols).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(vec![rows, cols], data).expect("consistent shape")
}

/// `[m, d]` of uniform draws on [-1, 1), row-major generation order.
pub fn sample_uniform_sym(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(vec![rows, cols], data).expect("consistent shape")
}

/// Each row of `x` repeated `times` consecutive times.
pub fn repeat_rows(x: &Tensor, times: usize) -> Tensor {
    let (m, d) = x.dims2();
    let mut data = Vec::with_capacity(m * times * d);
    for i in 0..m {
        for _ in 0..times {
            data.extend_from_slice(x.row(i));
        }
    }
    Tensor::new(vec![m * times, d], data).expect("consistent shape")
}
