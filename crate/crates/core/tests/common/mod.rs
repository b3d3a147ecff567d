#![allow(dead_code)]

use std::path::PathBuf;

use lensless_core::patterns::{coherence_cost, PatternSet, Provenance};
use lensless_core::raster::Raster;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PS: f64 = 1e-12;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn cameraman(n: usize) -> Raster {
    Raster::read_pgm(data(&format!("cameraman{n}.pgm"))).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nonnegative random stacked transport.
pub fn random_h(rows: usize, l: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, l, |_, _| rng.random_range(0.05..1.0))
}

/// Random patterns strictly inside the box.
pub fn interior_lambda(m: usize, l: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, l, |_, _| rng.random_range(-0.9..0.9))
}

/// Central differences of the coherence cost, step `h` per entry.
pub fn fd_gradient(lambda: &DMatrix<f64>, w: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let cost = |l: &DMatrix<f64>| coherence_cost(&PatternSet::new(l.clone(), Provenance::Loaded).unwrap(), w).unwrap();
    DMatrix::from_fn(lambda.nrows(), lambda.ncols(), |j, c| {
        let mut up = lambda.clone();
        let mut down = lambda.clone();
        up[(j, c)] += h;
        down[(j, c)] -= h;
        (cost(&up) - cost(&down)) / (2.0 * h)
    })
}

/// `||a - b||_∞ / ||b||_∞`.
pub fn rel_inf(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

/// Gradient check outcome: relative error for `M ≥ 2`. With one pattern
/// every column of `Λ` is a scalar and `γ` ignores its magnitude, so the
/// gradient is identically zero; then both gradients must vanish to
/// round-off and the returned error is 0.
pub fn gradient_error(g: &DMatrix<f64>, fd: &DMatrix<f64>, cost: f64) -> f64 {
    if g.nrows() == 1 {
        let scale = cost.abs().max(1.0);
        assert!(g.amax() <= 1e-12 * scale, "analytic {}", g.amax());
        assert!(fd.amax() <= 1e-8 * scale, "finite difference {}", fd.amax());
        0.0
    } else {
        rel_inf(g, fd)
    }
}
