//! Time-resolved light transport for a planar, stationary scene.
//!
//! A sensor at `(x, y, 0)` observes a scene plane at `z = D`. Light from a
//! scene point at distance `d` arrives at `d / c`; a sensor with time
//! resolution `T` therefore integrates the scene over rings centred on the
//! sensor's foot point. Each pixel contributes its full `1 / d²` weight to
//! the time bin of its centre's arrival time, so every column of a
//! [`TransportMatrix`] has exactly one nonzero entry.
//!
//! Pixels are ordered row-major with x fastest: pixel `l = iy * nx + ix`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Upper bound on dense transport entries (bins × pixels).
pub const MAX_TRANSPORT_ENTRIES: usize = 1 << 28;

/// Discretized planar target at standoff `distance_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGrid {
    pub width_m: f64,
    pub height_m: f64,
    pub nx: usize,
    pub ny: usize,
    pub distance_d: f64,
    /// Lateral position of the grid centre in sensor-plane coordinates.
    pub center_xy: [f64; 2],
}

impl SceneGrid {
    pub fn new(width_m: f64, height_m: f64, nx: usize, ny: usize, distance_d: f64) -> Result<Self> {
        let scene = SceneGrid {
            width_m,
            height_m,
            nx,
            ny,
            distance_d,
            center_xy: [0.0, 0.0],
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn with_center(mut self, x: f64, y: f64) -> Self {
        self.center_xy = [x, y];
        self
    }

    /// A line of `n_pixels` on the x axis, used for one-dimensional studies.
    pub fn line(x_min: f64, x_max: f64, n_pixels: usize, distance_d: f64) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(invalid(format!("line extent [{x_min}, {x_max}] is empty")));
        }
        let width = x_max - x_min;
        let scene = SceneGrid {
            width_m: width,
            height_m: width / n_pixels.max(1) as f64,
            nx: n_pixels,
            ny: 1,
            distance_d,
            center_xy: [0.5 * (x_min + x_max), 0.0],
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(invalid(format!(
                "scene has zero pixels ({}x{})",
                self.nx, self.ny
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.width_m) || !positive(self.height_m) {
            return Err(invalid(format!(
                "scene extent must be positive, got {} x {} m",
                self.width_m, self.height_m
            )));
        }
        if !positive(self.distance_d) {
            return Err(invalid(format!(
                "scene distance must be positive, got {} m",
                self.distance_d
            )));
        }
        if !self.center_xy.iter().all(|c| c.is_finite()) {
            return Err(invalid("scene centre must be finite"));
        }
        Ok(())
    }

    pub fn num_pixels(&self) -> usize {
        self.nx * self.ny
    }

    pub fn pitch(&self) -> (f64, f64) {
        (self.width_m / self.nx as f64, self.height_m / self.ny as f64)
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Centre of pixel `l` in sensor-plane coordinates.
    ///
    /// Offsets are formed as `(i + 0.5 - n/2) * pitch`, so pixels mirrored
    /// about the grid centre get exactly negated offsets.
    pub fn pixel_center(&self, l: usize) -> (f64, f64) {
        let (px, py) = self.pitch();
        let ix = l % self.nx;
        let iy = l / self.nx;
        let ox = (ix as f64 + 0.5 - 0.5 * self.nx as f64) * px;
        let oy = (iy as f64 + 0.5 - 0.5 * self.ny as f64) * py;
        (self.center_xy[0] + ox, self.center_xy[1] + oy)
    }

    /// Distance from a sensor-plane point to the centre of every pixel.
    pub fn distances_from(&self, x: f64, y: f64) -> Vec<f64> {
        let d2 = self.distance_d * self.distance_d;
        (0..self.num_pixels())
            .map(|l| {
                let (px, py) = self.pixel_center(l);
                let (dx, dy) = (px - x, py - y);
                (dx * dx + dy * dy + d2).sqrt()
            })
            .collect()
    }
}

/// A time-resolved point detector on the plane `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub x: f64,
    pub y: f64,
    /// Time-bin width in seconds.
    pub t_res: f64,
}

impl Sensor {
    pub fn new(x: f64, y: f64, t_res: f64) -> Result<Self> {
        let s = Sensor { x, y, t_res };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_res.is_finite() && self.t_res > 0.0) {
            return Err(invalid(format!(
                "sensor time resolution must be positive, got {}",
                self.t_res
            )));
        }
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(invalid("sensor position must be finite"));
        }
        Ok(())
    }
}

/// Per-pixel intensity weighting used when building a transport matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Physical `1 / d²` intensity drop-off.
    #[default]
    InverseSquare,
    /// Every pixel weighs 1 (classical single-pixel camera convention).
    Unit,
}

/// Dense `N × L` map from scene pixels to one sensor's time bins.
#[derive(Debug, Clone)]
pub struct TransportMatrix {
    pub entries: DMatrix<f64>,
    pub n_bins: usize,
    /// Arrival time of the earliest pixel, seconds.
    pub t0: f64,
    pub sensor: Sensor,
    pub scene: SceneGrid,
    /// Row index of the single nonzero entry of each column.
    pub bins: Vec<usize>,
}

impl TransportMatrix {
    pub fn num_pixels(&self) -> usize {
        self.entries.ncols()
    }

    /// Weight of pixel `l` (its only nonzero entry).
    pub fn weight(&self, l: usize) -> f64 {
        self.entries[(self.bins[l], l)]
    }
}

/// Per-pixel time-bin labels for one sensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingMap {
    pub nx: usize,
    pub ny: usize,
    pub n_bins: usize,
    pub labels: Vec<usize>,
}

impl RingMap {
    pub fn label(&self, ix: usize, iy: usize) -> usize {
        self.labels[iy * self.nx + ix]
    }
}

/// Per-pixel bin assignment shared by [`build_transport`] and [`ring_map`].
struct Binning {
    distances: Vec<f64>,
    bins: Vec<usize>,
    n_bins: usize,
    t0: f64,
}

fn bin_pixels(scene: &SceneGrid, sensor: &Sensor) -> Result<Binning> {
    scene.validate()?;
    sensor.validate()?;
    let distances = scene.distances_from(sensor.x, sensor.y);
    let d_min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let bin_len = SPEED_OF_LIGHT * sensor.t_res;
    let bins: Vec<usize> = distances
        .iter()
        .map(|&d| ((d - d_min) / bin_len).floor() as usize)
        .collect();
    let n_bins = bins.iter().copied().max().unwrap_or(0) + 1;
    Ok(Binning {
        distances,
        bins,
        n_bins,
        t0: d_min / SPEED_OF_LIGHT,
    })
}

/// Builds the transport matrix of `sensor` with physical `1 / d²` weights.
pub fn build_transport(scene: &SceneGrid, sensor: &Sensor) -> Result<TransportMatrix> {
    build_transport_weighted(scene, sensor, Weighting::InverseSquare)
}

pub fn build_transport_weighted(
    scene: &SceneGrid,
    sensor: &Sensor,
    weighting: Weighting,
) -> Result<TransportMatrix> {
    let Binning {
        distances,
        bins,
        n_bins,
        t0,
    } = bin_pixels(scene, sensor)?;
    let l = scene.num_pixels();
    let requested = n_bins.saturating_mul(l);
    if requested > MAX_TRANSPORT_ENTRIES {
        return Err(Error::BudgetExceeded {
            what: "transport matrix entries",
            requested: requested as u128,
            cap: MAX_TRANSPORT_ENTRIES as u128,
        });
    }
    let mut entries = DMatrix::zeros(n_bins, l);
    for (col, (&bin, &d)) in bins.iter().zip(&distances).enumerate() {
        entries[(bin, col)] = match weighting {
            Weighting::InverseSquare => 1.0 / (d * d),
            Weighting::Unit => 1.0,
        };
    }
    Ok(TransportMatrix {
        entries,
        n_bins,
        t0,
        sensor: *sensor,
        scene: scene.clone(),
        bins,
    })
}

/// Single-row transport of a time-blind detector: the single-pixel camera.
pub fn single_pixel_transport(
    scene: &SceneGrid,
    sensor_xy: (f64, f64),
    weighting: Weighting,
) -> Result<TransportMatrix> {
    // Any bin longer than the scene's arrival-time spread collapses to N = 1;
    // one second exceeds it for every physical geometry.
    let sensor = Sensor::new(sensor_xy.0, sensor_xy.1, 1.0)?;
    let h = build_transport_weighted(scene, &sensor, weighting)?;
    debug_assert_eq!(h.n_bins, 1);
    Ok(h)
}

pub fn ring_map(scene: &SceneGrid, sensor: &Sensor) -> Result<RingMap> {
    let binning = bin_pixels(scene, sensor)?;
    Ok(RingMap {
        nx: scene.nx,
        ny: scene.ny,
        n_bins: binning.n_bins,
        labels: binning.bins,
    })
}

/// Lateral radius of the `n`-th ring boundary around the sensor's foot point,
/// `sqrt(c² (n T + t0)² - D²)`. Returns 0 where the argument is negative.
pub fn ring_radius(n: usize, t0: f64, t_res: f64, distance_d: f64) -> f64 {
    let ct = SPEED_OF_LIGHT * (n as f64 * t_res + t0);
    (ct * ct - distance_d * distance_d).max(0.0).sqrt()
}

/// Smallest recoverable lateral feature next to the closest scene point.
pub fn resolution_limit(distance_d: f64, t_res: f64) -> f64 {
    let ct = SPEED_OF_LIGHT * t_res;
    ct * (1.0 + 2.0 * distance_d / ct).sqrt()
}

/// Transport of a symmetric line `[-half_extent, half_extent]` seen by a
/// sensor at the origin. Mirrored pixels share a bin and a weight.
pub fn one_d_transport(
    half_extent: f64,
    n_pixels: usize,
    distance_d: f64,
    t_res: f64,
) -> Result<TransportMatrix> {
    let scene = SceneGrid::line(-half_extent, half_extent, n_pixels, distance_d)?;
    build_transport(&scene, &Sensor::new(0.0, 0.0, t_res)?)
}

/// Transport of the half line `[0, extent]` seen by a sensor at the origin.
pub fn half_line_transport(
    extent: f64,
    n_pixels: usize,
    distance_d: f64,
    t_res: f64,
) -> Result<TransportMatrix> {
    let scene = SceneGrid::line(0.0, extent, n_pixels, distance_d)?;
    build_transport(&scene, &Sensor::new(0.0, 0.0, t_res)?)
}

/// Farthest lateral offset still above the noise floor when the saturation
/// level is `sat_ratio_b` times the noise level: `sqrt(B - 1) D`.
pub fn dynamic_range_coverage(distance_d: f64, sat_ratio_b: f64) -> Result<f64> {
    if !(sat_ratio_b > 1.0) {
        return Err(invalid(format!(
            "saturation ratio must exceed 1, got {sat_ratio_b}"
        )));
    }
    if !(distance_d >= 0.0) {
        return Err(invalid(format!("distance must be non-negative, got {distance_d}")));
    }
    Ok((sat_ratio_b - 1.0).sqrt() * distance_d)
}
