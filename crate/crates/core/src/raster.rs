//! Grayscale images in `[0, 1]`, stored row-major with `x` fastest, which is
//! the same order as scene pixels.

use std::path::Path;

use image::{GrayImage, ImageFormat, Luma};
use nalgebra::DVector;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!("image {width}x{height} is empty")));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "image buffer length",
                expected: width * height,
                found: data.len(),
            });
        }
        Ok(Raster { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Raster::new(width, height, data)
    }

    pub fn from_vector(width: usize, height: usize, v: &DVector<f64>) -> Result<Self> {
        Raster::new(width, height, v.as_slice().to_vec())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?.into_luma8();
        let (w, h) = img.dimensions();
        let data = img.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
        Raster::new(w as usize, h as usize, data)
    }

    /// Writes an 8-bit binary PGM; values are clipped to `[0, 1]`.
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let img = GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let v = self.get(x as usize, y as usize);
            Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8])
        });
        img.save_with_format(path.as_ref(), ImageFormat::Pnm)?;
        Ok(())
    }

    /// Rescales `[min, max]` to `[0, 1]`; constant images map to zero.
    pub fn normalized(&self) -> Raster {
        let lo = self.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        self.map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_is_exact_on_8bit_levels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let r = Raster::from_fn(7, 3, |x, y| ((x * 3 + y * 40) % 256) as f64 / 255.0).unwrap();
        r.write_pgm(&path).unwrap();
        let back = Raster::read_pgm(&path).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn layout_is_x_fastest() {
        let r = Raster::from_fn(3, 2, |x, y| (x + 10 * y) as f64).unwrap();
        assert_eq!(r.data(), &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(r.get(2, 1), 12.0);
    }

    #[test]
    fn rejects_bad_buffer() {
        assert!(Raster::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Raster::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn normalized_spans_unit_interval() {
        let r = Raster::new(2, 1, vec![3.0, 5.0]).unwrap().normalized();
        assert_eq!(r.data(), &[0.0, 1.0]);
    }
}
