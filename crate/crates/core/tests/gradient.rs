mod common;

use common::*;
use lensless_core::patterns::{coherence_cost, coherence_grad, precompute_w, PatternSet, Provenance, StackedTransport};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn case(m: usize, l: usize, rows: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut r = rng(seed);
    let h = random_h(rows, l, &mut r);
    let w = precompute_w(&StackedTransport::from_matrix(h)).w;
    (interior_lambda(m, l, &mut r), w)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn analytic_gradient_matches_central_differences(
        m in 1usize..=4, l in 3usize..=16, rows in 1usize..=8, seed in any::<u64>()
    ) {
        let (lambda, w) = case(m, l, rows, seed);
        let ps = PatternSet::new(lambda.clone(), Provenance::Loaded).unwrap();
        let g = coherence_grad(&ps, &w).unwrap();
        let fd = fd_gradient(&lambda, &w, 1e-6);
        let err = gradient_error(&g, &fd, coherence_cost(&ps, &w).unwrap());
        prop_assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn gradient_is_permutation_equivariant(l in 3usize..=10, seed in any::<u64>()) {
        let (lambda, w) = case(3, l, 4, seed);
        let perm: Vec<usize> = (0..l).rev().collect();
        let lp = DMatrix::from_fn(3, l, |j, c| lambda[(j, perm[c])]);
        let wp = DMatrix::from_fn(l, l, |a, b| w[(perm[a], perm[b])]);
        let g = coherence_grad(&PatternSet::new(lambda, Provenance::Loaded).unwrap(), &w).unwrap();
        let gp = coherence_grad(&PatternSet::new(lp, Provenance::Loaded).unwrap(), &wp).unwrap();
        let expected = DMatrix::from_fn(3, l, |j, c| g[(j, perm[c])]);
        prop_assert!((gp - &expected).amax() <= 1e-12 * expected.amax().max(1.0));
    }
}

#[test]
fn gradient_vanishes_at_the_orthogonal_optimum() {
    let lambda = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
    let g = coherence_grad(&PatternSet::new(lambda, Provenance::Hadamard).unwrap(), &DMatrix::identity(2, 2)).unwrap();
    assert_eq!(g, DMatrix::zeros(2, 2));
}

#[test]
fn single_pattern_gradient_is_zero() {
    let (lambda, w) = case(1, 6, 3, 4);
    let g = coherence_grad(&PatternSet::new(lambda, Provenance::Loaded).unwrap(), &w).unwrap();
    assert!(g.amax() < 1e-12, "{g}");
}

#[test]
fn small_fixed_instances() {
    for seed in 0..20 {
        let (lambda, w) = case(2, 4, 3, seed);
        let ps = PatternSet::new(lambda.clone(), Provenance::Loaded).unwrap();
        let g = coherence_grad(&ps, &w).unwrap();
        let cost = coherence_cost(&ps, &w).unwrap();
        assert!(gradient_error(&g, &fd_gradient(&lambda, &w, 1e-6), cost) < 1e-5);
    }
}
