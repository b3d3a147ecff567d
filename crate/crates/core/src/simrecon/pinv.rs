use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are discarded.
pub const PINV_RCOND: f64 = 1e-10;

/// Minimum-norm least-squares solution `H⁺ m`.
pub fn pinv_reconstruct(h: &DMatrix<f64>, m: &DVector<f64>) -> Result<DVector<f64>> {
    if m.len() != h.nrows() {
        return Err(Error::DimensionMismatch {
            what: "measurement length vs transport rows",
            expected: h.nrows(),
            found: m.len(),
        });
    }
    let svd = SVD::new(h.clone(), true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok(DVector::zeros(h.ncols()));
    }
    let eps = PINV_RCOND * smax;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut coeff = u.tr_mul(m);
    for (c, s) in coeff.iter_mut().zip(svd.singular_values.iter()) {
        *c = if *s > eps { *c / s } else { 0.0 };
    }
    Ok(v_t.tr_mul(&coeff))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_rows_recover_row_space_component() {
        let h = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0]);
        let f = DVector::from_vec(vec![0.3, 0.3, 0.4, -0.4]);
        let got = pinv_reconstruct(&h, &(&h * &f)).unwrap();
        assert!((got - f).amax() < 1e-12);
    }

    #[test]
    fn matches_normal_equations_for_tall_full_rank() {
        let h = DMatrix::from_fn(6, 3, |r, c| ((r + 1) * (c + 2)) as f64 % 5.0 + r as f64);
        let m = DVector::from_fn(6, |i, _| (i as f64).cos());
        let got = pinv_reconstruct(&h, &m).unwrap();
        let expected = (h.transpose() * &h).lu().solve(&(h.transpose() * &m)).unwrap();
        assert!((got - expected).amax() < 1e-10);
    }

    #[test]
    fn zero_measurement_gives_zero() {
        let h = DMatrix::from_fn(3, 5, |r, c| (r * c) as f64 + 1.0);
        assert_eq!(pinv_reconstruct(&h, &DVector::zeros(3)).unwrap(), DVector::zeros(5));
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        // duplicate columns: the minimum-norm solution splits the value evenly
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let got = pinv_reconstruct(&h, &DVector::from_vec(vec![2.0])).unwrap();
        assert!((got - DVector::from_vec(vec![1.0, 1.0])).amax() < 1e-12);
    }
}
