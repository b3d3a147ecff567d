use crate::error::{Error, Result};
use crate::raster::Raster;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn check_same(a: &Raster, b: &Raster) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch {
            what: "image pixel count",
            expected: b.width() * b.height(),
            found: a.width() * a.height(),
        });
    }
    Ok(())
}

/// `10 log10(1 / MSE)` for unit dynamic range; `+∞` on an exact match.
pub fn psnr(f_hat: &Raster, f_ref: &Raster) -> Result<f64> {
    check_same(f_hat, f_ref)?;
    let mse = f_hat
        .data()
        .iter()
        .zip(f_ref.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / f_ref.data().len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

fn gaussian_kernel(size: usize) -> Vec<f64> {
    let r = (size / 2) as f64;
    let k: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.into_iter().map(|v| v / total).collect()
}

/// Separable "valid" filtering: output is `(w - s + 1) × (h - s + 1)`.
fn filter_valid(data: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let s = k.len();
    let ow = w - s + 1;
    let oh = h - s + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &data[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&line[x..x + s]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean local SSIM with a Gaussian window over the valid region, unit
/// dynamic range. Images smaller than the window use the largest odd window
/// that fits.
pub fn ssim(f_hat: &Raster, f_ref: &Raster) -> Result<f64> {
    check_same(f_hat, f_ref)?;
    let (w, h) = (f_ref.width(), f_ref.height());
    let mut size = SSIM_WINDOW.min(w).min(h);
    if size % 2 == 0 {
        size -= 1;
    }
    let k = gaussian_kernel(size);
    let x = f_hat.data();
    let y = f_ref.data();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter_valid(x, w, h, &k);
    let my = filter_valid(y, w, h, &k);
    let sxx = filter_valid(&xx, w, h, &k);
    let syy = filter_valid(&yy, w, h, &k);
    let sxy = filter_valid(&xy, w, h, &k);
    let c1 = K1 * K1;
    let c2 = K2 * K2;
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = sxx[i] - ux * ux;
        let vy = syy[i] - uy * uy;
        let cxy = sxy[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2))
            / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(total / mx.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Raster {
        Raster::from_fn(16, 12, |x, y| ((x * 7 + y * 3) % 16) as f64 / 15.0).unwrap()
    }

    #[test]
    fn identical_images() {
        let r = ramp();
        assert_eq!(psnr(&r, &r).unwrap(), f64::INFINITY);
        assert!((ssim(&r, &r).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_from_constant_offset() {
        let r = ramp();
        let s = r.map(|v| v + 0.01);
        assert!((psnr(&s, &r).unwrap() - 40.0).abs() < 1e-9);
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(11);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..11 {
            assert!((k[i] - k[10 - i]).abs() < 1e-18);
        }
    }

    #[test]
    fn small_images_shrink_the_window() {
        let a = Raster::from_fn(6, 4, |x, y| (x + y) as f64 / 8.0).unwrap();
        let b = a.map(|v| v * 0.9);
        let s = ssim(&b, &a).unwrap();
        assert!(s.is_finite() && s < 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Raster::new(2, 2, vec![0.0; 4]).unwrap();
        let b = Raster::new(4, 1, vec![0.0; 4]).unwrap();
        assert!(psnr(&a, &b).is_err());
        assert!(ssim(&a, &b).is_err());
    }
}
