use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{PatternSet, Provenance};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Hadamard,
    Bernoulli,
    Gaussian,
    AllOnes,
}

/// Entry `(row, col)` of the Sylvester Hadamard matrix of any order
/// `2^k > max(row, col)`.
pub fn sylvester_entry(row: usize, col: usize) -> f64 {
    if (row & col).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn bernoulli_matrix(m: usize, l: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    // column-major fill order; fixed for reproducibility
    DMatrix::from_fn(m, l, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

pub fn baseline_patterns(kind: BaselineKind, m: usize, l: usize, seed: u64) -> Result<PatternSet> {
    if m == 0 || l == 0 {
        return Err(invalid(format!("pattern set {m}x{l} is empty")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lambda, provenance) = match kind {
        BaselineKind::Hadamard => {
            let order = l.next_power_of_two();
            if m > order {
                return Err(invalid(format!(
                    "{m} Hadamard patterns requested but the order is {order}"
                )));
            }
            (
                DMatrix::from_fn(m, l, sylvester_entry),
                Provenance::Hadamard,
            )
        }
        BaselineKind::Bernoulli => (bernoulli_matrix(m, l, &mut rng), Provenance::Bernoulli),
        BaselineKind::Gaussian => {
            let raw = DMatrix::from_fn(m, l, |_, _| rng.sample::<f64, _>(StandardNormal));
            let peak = raw.amax();
            (raw / peak, Provenance::Gaussian)
        }
        BaselineKind::AllOnes => (DMatrix::from_element(m, l, 1.0), Provenance::AllOnes),
    };
    PatternSet::new(lambda, provenance)
}
