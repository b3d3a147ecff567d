use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::TotalOperator;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone)]
pub struct Measurement {
    pub m_vec: DVector<f64>,
    /// Nominal SNR in dB; `f64::INFINITY` for a noiseless measurement.
    pub snr_db: f64,
    pub noise_seed: u64,
    /// Standard deviation of the added noise.
    pub sigma: f64,
}

/// `m = Q f + n` with i.i.d. Gaussian `n` of standard deviation
/// `||Q f|| / (sqrt(len) 10^{snr/20})`, so that `||Q f|| / ||n||` is the
/// requested SNR in expectation.
pub fn simulate_measurement(
    q: &TotalOperator,
    f: &DVector<f64>,
    snr_db: f64,
    seed: u64,
) -> Result<Measurement> {
    if f.len() != q.ncols() {
        return Err(Error::DimensionMismatch {
            what: "scene vector vs operator columns",
            expected: q.ncols(),
            found: f.len(),
        });
    }
    if let Some(v) = f.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
        return Err(invalid(format!("scene value {v} outside [0, 1]")));
    }
    if snr_db.is_nan() {
        return Err(invalid("SNR is NaN"));
    }
    let clean = q.apply(f);
    if snr_db == f64::INFINITY {
        return Ok(Measurement {
            m_vec: clean,
            snr_db,
            noise_seed: seed,
            sigma: 0.0,
        });
    }
    let signal = clean.norm();
    if signal == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let sigma = signal / ((clean.len() as f64).sqrt() * 10f64.powf(snr_db / 20.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m_vec = clean.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal));
    Ok(Measurement {
        m_vec,
        snr_db,
        noise_seed: seed,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn operator() -> TotalOperator {
        TotalOperator::from_matrix(DMatrix::from_fn(200, 10, |r, c| ((r * 3 + c * 7) % 11) as f64 / 11.0))
    }

    fn scene() -> DVector<f64> {
        DVector::from_fn(10, |i, _| (i as f64 + 1.0) / 11.0)
    }

    #[test]
    fn infinite_snr_is_exact() {
        let q = operator();
        let m = simulate_measurement(&q, &scene(), f64::INFINITY, 0).unwrap();
        assert_eq!(m.m_vec, &q.q * scene());
    }

    #[test]
    fn empirical_snr_matches_request() {
        let q = operator();
        let f = scene();
        let clean = &q.q * &f;
        let mut total = 0.0;
        for seed in 0..20 {
            let m = simulate_measurement(&q, &f, 30.0, seed).unwrap();
            let noise = (&m.m_vec - &clean).norm();
            let snr = 20.0 * (clean.norm() / noise).log10();
            assert!((snr - 30.0).abs() < 1.5, "seed {seed}: {snr}");
            total += snr;
        }
        assert!((total / 20.0 - 30.0).abs() < 0.5);
    }

    #[test]
    fn noiseless_measurement_is_linear() {
        let q = operator();
        let f = scene() * 0.5;
        let a = simulate_measurement(&q, &f, f64::INFINITY, 0).unwrap();
        let b = simulate_measurement(&q, &(&f * 2.0), f64::INFINITY, 0).unwrap();
        assert!((b.m_vec - a.m_vec * 2.0).amax() < 1e-12);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let q = operator();
        let a = simulate_measurement(&q, &scene(), 20.0, 5).unwrap();
        let b = simulate_measurement(&q, &scene(), 20.0, 5).unwrap();
        assert_eq!(a.m_vec, b.m_vec);
    }

    #[test]
    fn zero_signal_with_finite_snr_fails() {
        let q = operator();
        let f = DVector::zeros(10);
        assert!(matches!(
            simulate_measurement(&q, &f, 60.0, 1),
            Err(Error::ZeroSignal)
        ));
        assert!(simulate_measurement(&q, &f, f64::INFINITY, 1).is_ok());
    }

    #[test]
    fn rejects_out_of_range_scene() {
        let q = operator();
        let mut f = scene();
        f[3] = 1.5;
        assert!(simulate_measurement(&q, &f, 60.0, 1).is_err());
    }
}
