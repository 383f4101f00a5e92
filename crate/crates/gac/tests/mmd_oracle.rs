//! Property suite for the discrepancy estimator, checked against the
//! brute-force oracle in `common` and against structural invariants.

mod common;

use common::{closed_form_energy_sq, oracle_mmd, to_tensor};
use gac::mmd::{mmd_estimate, KernelSpec};
use proptest::prelude::*;

fn kernels() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        Just(KernelSpec::EnergySquared),
        Just(KernelSpec::Energy),
        (0.3f64..3.0).prop_map(|sigma| KernelSpec::Gaussian { sigma }),
    ]
}

fn point_set(dim: usize, max_rows: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.5f64..1.5, dim..=dim), 1..=max_rows)
}

fn sample_pair() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (1usize..=4).prop_flat_map(|dim| (point_set(dim, 10), point_set(dim, 10)))
}

proptest! {
    #[test]
    fn estimate_matches_brute_force((x, y) in sample_pair(), kernel in kernels()) {
        let got = mmd_estimate(&to_tensor(&x), &to_tensor(&y), &kernel).unwrap();
        let want = oracle_mmd(&x, &y, &kernel);
        prop_assert!((got - want).abs() < 1e-10, "{got} vs oracle {want} ({})", kernel.name());
    }

    #[test]
    fn energy_squared_matches_closed_form((x, y) in sample_pair()) {
        let want = closed_form_energy_sq(&x, &y);
        // Below the clamp the estimator reports the floored value instead.
        prop_assume!(want > 1e-4);
        let got = mmd_estimate(&to_tensor(&x), &to_tensor(&y), &KernelSpec::EnergySquared).unwrap();
        prop_assert!((got - want).abs() < 1e-10, "{got} vs closed form {want}");
    }

    #[test]
    fn estimator_is_symmetric((x, y) in sample_pair(), kernel in kernels()) {
        let a = mmd_estimate(&to_tensor(&x), &to_tensor(&y), &kernel).unwrap();
        let b = mmd_estimate(&to_tensor(&y), &to_tensor(&x), &kernel).unwrap();
        prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn estimate_is_finite_and_floored((x, y) in sample_pair(), kernel in kernels()) {
        // The squared discrepancy is clamped at 1e-12 before the root, so
        // every estimate is at least 1e-6.
        let v = mmd_estimate(&to_tensor(&x), &to_tensor(&y), &kernel).unwrap();
        prop_assert!(v.is_finite());
        prop_assert!(v >= 1e-6, "estimate {v} below the clamp floor");
    }

    #[test]
    fn row_order_does_not_matter((x, y) in sample_pair(), kernel in kernels()) {
        let mut x_rev = x.clone();
        x_rev.reverse();
        let mut y_rev = y.clone();
        y_rev.reverse();
        let a = mmd_estimate(&to_tensor(&x), &to_tensor(&y), &kernel).unwrap();
        let b = mmd_estimate(&to_tensor(&x_rev), &to_tensor(&y_rev), &kernel).unwrap();
        prop_assert!((a - b).abs() < 1e-12, "{a} vs permuted {b}");
    }

    #[test]
    fn identical_sets_sit_at_the_floor(x in (1usize..=4).prop_flat_map(|d| point_set(d, 10)),
                                       kernel in kernels()) {
        let v = mmd_estimate(&to_tensor(&x), &to_tensor(&x), &kernel).unwrap();
        prop_assert!(v <= 1e-5, "identical sets gave {v}");
    }
}
