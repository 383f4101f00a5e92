//! Shared helpers for the integration suites: brute-force oracles computed
//! from first principles (no library kernel or estimator code) and random
//! sample-set generation.

#![allow(dead_code)]

use gac::diffcore::Tensor;
use gac::mmd::KernelSpec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Kernel value for one pair of points, written out directly. The energy
/// kernel floors the squared distance at 1e-12 before the root; that floor
/// is part of the estimator contract, so the oracle pins it independently.
pub fn oracle_kernel(kernel: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "oracle kernel needs equal dimensions");
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    match kernel {
        KernelSpec::EnergySquared => -d2,
        KernelSpec::Energy => -d2.max(1e-12).sqrt(),
        KernelSpec::Gaussian { sigma } => (-d2 / (2.0 * sigma * sigma)).exp(),
    }
}

/// Brute-force V-statistic MMD via the naive triple loop: every pair
/// contributes, including i = j, and the squared discrepancy is floored at
/// 1e-12 before the outer root.
pub fn oracle_mmd(x: &[Vec<f64>], y: &[Vec<f64>], kernel: &KernelSpec) -> f64 {
    let (m, n) = (x.len(), y.len());
    assert!(m > 0 && n > 0, "oracle mmd needs non-empty sets");
    let mut kxx = 0.0;
    for a in x {
        for b in x {
            kxx += oracle_kernel(kernel, a, b);
        }
    }
    let mut kyy = 0.0;
    for a in y {
        for b in y {
            kyy += oracle_kernel(kernel, a, b);
        }
    }
    let mut kxy = 0.0;
    for a in x {
        for b in y {
            kxy += oracle_kernel(kernel, a, b);
        }
    }
    let sq = kxx / (m * m) as f64 + kyy / (n * n) as f64 - 2.0 * kxy / (m * n) as f64;
    sq.max(1e-12).sqrt()
}

/// Closed form of the estimator under k(x,y) = -||x-y||^2:
/// sqrt(2) * ||mean(X) - mean(Y)||.
pub fn closed_form_energy_sq(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let dim = x[0].len();
    let mean = |set: &[Vec<f64>]| -> Vec<f64> {
        let mut m = vec![0.0; dim];
        for row in set {
            for (acc, &v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        for acc in &mut m {
            *acc /= set.len() as f64;
        }
        m
    };
    let (mx, my) = (mean(x), mean(y));
    let d2: f64 = mx.iter().zip(&my).map(|(a, b)| (a - b) * (a - b)).sum();
    (2.0f64).sqrt() * d2.sqrt()
}

/// `rows` random points of dimension `dim`, components in [-1.5, 1.5).
pub fn random_set(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect()).collect()
}

/// A random pair of sample sets sharing a dimension, sizes in 1..=max_rows,
/// dimension in 1..=max_dim.
pub fn random_pair(
    rng: &mut ChaCha8Rng,
    max_rows: usize,
    max_dim: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let dim = rng.random_range(1..=max_dim);
    let m = rng.random_range(1..=max_rows);
    let n = rng.random_range(1..=max_rows);
    (random_set(rng, m, dim), random_set(rng, n, dim))
}

/// Row-major `[rows, dim]` tensor from a list of points.
pub fn to_tensor(rows: &[Vec<f64>]) -> Tensor {
    let dim = rows[0].len();
    let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Tensor::matrix(rows.len(), dim, data).expect("consistent row dimensions")
}
