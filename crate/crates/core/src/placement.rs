//! Sensor placement inside an allowed rectangular aperture.
//!
//! Positions are chosen to maximize `Σ_k min_{k'≠k} ||r_k - r_k'||`, which
//! spreads the sensors and so minimizes the overlap of their ring
//! structures. Small `K` can be solved exactly on a lattice; larger `K`
//! uses Lloyd relaxation over a rasterized Voronoi diagram.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coherence::coherence_frobenius;
use crate::error::{invalid, Error, Result};
use crate::patterns::StackedTransport;
use crate::transport::{build_transport, SceneGrid, Sensor};

/// Largest number of lattice subsets [`place_grid_search`] will evaluate.
pub const GRID_SEARCH_CAP: u128 = 50_000_000;

/// Default raster resolution for the discrete Voronoi diagram.
pub const DEFAULT_RASTER: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let r = Region {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        r.validate()?;
        Ok(r)
    }

    /// Square of side `side` centred at the origin.
    pub fn square(side: f64) -> Result<Self> {
        Region::new(-0.5 * side, 0.5 * side, -0.5 * side, 0.5 * side)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !ok || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(invalid(format!("region has no area: {self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn contains(&self, (x, y): (f64, f64)) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn clamp(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            x.clamp(self.x_min, self.x_max),
            y.clamp(self.y_min, self.y_max),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMethod {
    Grid,
    Lloyd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub positions: Vec<(f64, f64)>,
    /// Sum over sensors of the distance to the nearest other sensor.
    pub objective: f64,
    pub method: PlacementMethod,
    pub converged: bool,
    pub iterations: usize,
    /// Objective of the random starting configuration (Lloyd only).
    pub initial_objective: Option<f64>,
}

impl Placement {
    pub fn sensors(&self, t_res: f64) -> Result<Vec<Sensor>> {
        self.positions
            .iter()
            .map(|&(x, y)| Sensor::new(x, y, t_res))
            .collect()
    }
}

/// `Σ_k min_{k'≠k} ||r_k - r_k'||`; zero for fewer than two points.
pub fn separation_objective(positions: &[(f64, f64)]) -> f64 {
    if positions.len() < 2 {
        return 0.0;
    }
    positions
        .iter()
        .enumerate()
        .map(|(k, a)| {
            positions
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, b)| dist(*a, *b))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn center_placement(region: &Region, method: PlacementMethod) -> Placement {
    Placement {
        positions: vec![region.center()],
        objective: 0.0,
        method,
        converged: true,
        iterations: 0,
        initial_objective: None,
    }
}

/// Exhaustive search over all `k`-subsets of a `grid_n × grid_n` lattice
/// spanning the region (edges included). Ties go to the lexicographically
/// smallest position tuple.
pub fn place_grid_search(region: &Region, k: usize, grid_n: usize) -> Result<Placement> {
    region.validate()?;
    if k == 0 {
        return Err(invalid("need at least one sensor"));
    }
    if k == 1 {
        return Ok(center_placement(region, PlacementMethod::Grid));
    }
    if grid_n < 2 {
        return Err(invalid(format!("grid_n must be at least 2, got {grid_n}")));
    }
    let n_points = grid_n * grid_n;
    if k > n_points {
        return Err(invalid(format!(
            "cannot place {k} distinct sensors on {n_points} lattice points"
        )));
    }
    let subsets = binomial(n_points, k);
    if subsets > GRID_SEARCH_CAP {
        return Err(Error::BudgetExceeded {
            what: "grid-search subsets",
            requested: subsets,
            cap: GRID_SEARCH_CAP,
        });
    }

    let step_x = region.width() / (grid_n - 1) as f64;
    let step_y = region.height() / (grid_n - 1) as f64;
    // x-major, then y: index order is lexicographic order of positions
    let points: Vec<(f64, f64)> = (0..grid_n)
        .flat_map(|i| {
            (0..grid_n).map(move |j| {
                (
                    region.x_min + i as f64 * step_x,
                    region.y_min + j as f64 * step_y,
                )
            })
        })
        .collect();
    let pair: Vec<f64> = points
        .iter()
        .flat_map(|a| points.iter().map(move |b| dist(*a, *b)))
        .collect();
    let d = |a: usize, b: usize| pair[a * n_points + b];

    let mut idx: Vec<usize> = (0..k).collect();
    let mut best_idx = idx.clone();
    let mut best = f64::NEG_INFINITY;
    loop {
        let mut objective = 0.0;
        for (p, &a) in idx.iter().enumerate() {
            let mut nearest = f64::INFINITY;
            for (q, &b) in idx.iter().enumerate() {
                if p != q {
                    nearest = nearest.min(d(a, b));
                }
            }
            objective += nearest;
        }
        let slack = if best.is_finite() { 1e-12 * best.abs() } else { 0.0 };
        if objective > best + slack {
            best = objective;
            best_idx.copy_from_slice(&idx);
        }
        // next combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                let positions = best_idx.iter().map(|&i| points[i]).collect();
                return Ok(Placement {
                    positions,
                    objective: best,
                    method: PlacementMethod::Grid,
                    converged: true,
                    iterations: 1,
                    initial_objective: None,
                });
            }
            i -= 1;
            if idx[i] < n_points - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydOptions {
    pub max_iter: usize,
    /// Stop once no sensor moves farther than this (meters).
    pub tol: f64,
    pub raster: usize,
}

impl Default for LloydOptions {
    fn default() -> Self {
        LloydOptions {
            max_iter: 500,
            tol: 1e-9,
            raster: DEFAULT_RASTER,
        }
    }
}

pub fn place_lloyd(region: &Region, k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<Placement> {
    place_lloyd_with(
        region,
        k,
        seed,
        &LloydOptions {
            max_iter,
            tol,
            raster: DEFAULT_RASTER,
        },
    )
}

/// Lloyd relaxation: move every sensor to the centroid of its Voronoi cell,
/// where cells are approximated by assigning raster cells to their nearest
/// sensor.
pub fn place_lloyd_with(region: &Region, k: usize, seed: u64, opts: &LloydOptions) -> Result<Placement> {
    region.validate()?;
    if k == 0 {
        return Err(invalid("need at least one sensor"));
    }
    if opts.raster == 0 {
        return Err(invalid("raster must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions: Vec<(f64, f64)> = (0..k)
        .map(|_| {
            (
                rng.random_range(region.x_min..=region.x_max),
                rng.random_range(region.y_min..=region.y_max),
            )
        })
        .collect();
    let initial_objective = separation_objective(&positions);

    let n = opts.raster;
    let cw = region.width() / n as f64;
    let ch = region.height() / n as f64;
    let cells: Vec<(f64, f64)> = (0..n)
        .flat_map(|j| {
            (0..n).map(move |i| {
                (
                    region.x_min + (i as f64 + 0.5) * cw,
                    region.y_min + (j as f64 + 0.5) * ch,
                )
            })
        })
        .collect();

    let mut converged = false;
    let mut iterations = 0;
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    while iterations < opts.max_iter {
        iterations += 1;
        sums.iter_mut().for_each(|s| *s = (0.0, 0.0, 0));
        for &c in &cells {
            let mut owner = 0;
            let mut owner_d = f64::INFINITY;
            for (s, &p) in positions.iter().enumerate() {
                let dx = c.0 - p.0;
                let dy = c.1 - p.1;
                let d2 = dx * dx + dy * dy;
                if d2 < owner_d {
                    owner_d = d2;
                    owner = s;
                }
            }
            let acc = &mut sums[owner];
            acc.0 += c.0;
            acc.1 += c.1;
            acc.2 += 1;
        }
        let mut max_move: f64 = 0.0;
        for (p, &(sx, sy, count)) in positions.iter_mut().zip(&sums) {
            if count == 0 {
                continue;
            }
            let next = region.clamp((sx / count as f64, sy / count as f64));
            max_move = max_move.max(dist(*p, next));
            *p = next;
        }
        if max_move < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(Placement {
        objective: separation_objective(&positions),
        positions,
        method: PlacementMethod::Lloyd,
        converged,
        iterations,
        initial_objective: Some(initial_objective),
    })
}

/// How sensors are placed when a sweep needs a placement for each `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlacementStrategy {
    Grid { grid_n: usize },
    Lloyd { seed: u64, options: LloydOptions },
}

impl PlacementStrategy {
    pub fn place(&self, region: &Region, k: usize) -> Result<Placement> {
        match *self {
            PlacementStrategy::Grid { grid_n } => place_grid_search(region, k, grid_n),
            PlacementStrategy::Lloyd { seed, options } => place_lloyd_with(region, k, seed, &options),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub t_res: f64,
    pub area: f64,
    pub mu: f64,
}

/// Frobenius coherence of the stacked transports (single all-ones pattern)
/// for every `(K, T)` combination.
pub fn placement_coherence_sweep(
    scene: &SceneGrid,
    region: &Region,
    k_list: &[usize],
    t_list: &[f64],
    strategy: &PlacementStrategy,
) -> Result<Vec<SweepRow>> {
    scene.validate()?;
    if k_list.is_empty() || t_list.is_empty() {
        return Err(invalid("sweep needs at least one K and one T"));
    }
    let mut rows = Vec::with_capacity(k_list.len() * t_list.len());
    for &k in k_list {
        let placement = strategy.place(region, k)?;
        for &t in t_list {
            let transports = placement
                .sensors(t)?
                .iter()
                .map(|s| build_transport(scene, s))
                .collect::<Result<Vec<_>>>()?;
            let stacked = StackedTransport::from_transports(&transports)?;
            rows.push(SweepRow {
                k,
                t_res: t,
                area: region.area(),
                mu: coherence_frobenius(&stacked.h_bar),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Region {
        Region::new(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn single_sensor_goes_to_center() {
        let p = place_grid_search(&unit(), 1, 5).unwrap();
        assert_eq!(p.positions, vec![(0.5, 0.5)]);
        let l = place_lloyd(&unit(), 1, 3, 10, 1e-9).unwrap();
        let (x, y) = l.positions[0];
        assert!((x - 0.5).abs() < 1e-9 && (y - 0.5).abs() < 1e-9);
        assert!(l.iterations <= 2);
    }

    #[test]
    fn two_sensors_take_opposite_corners() {
        for grid_n in [2, 3, 6] {
            let p = place_grid_search(&unit(), 2, grid_n).unwrap();
            assert_eq!(p.positions, vec![(0.0, 0.0), (1.0, 1.0)]);
            assert!((p.objective - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn four_sensors_take_all_corners() {
        let p = place_grid_search(&unit(), 4, 5).unwrap();
        assert_eq!(
            p.positions,
            vec![(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
        );
        assert!((p.objective - 4.0).abs() < 1e-12);
    }

    #[test]
    fn grid_search_budget_is_enforced() {
        let err = place_grid_search(&unit(), 6, 30).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
        assert!(place_grid_search(&unit(), 10, 3).is_err());
    }

    #[test]
    fn lloyd_is_deterministic_and_inside() {
        let region = Region::new(-0.05, 0.05, -0.02, 0.08).unwrap();
        let a = place_lloyd(&region, 5, 11, 200, 1e-10).unwrap();
        let b = place_lloyd(&region, 5, 11, 200, 1e-10).unwrap();
        assert_eq!(a, b);
        assert!(a.positions.iter().all(|p| region.contains(*p)));
    }

    #[test]
    fn lloyd_two_sensors_split_the_square() {
        let region = unit();
        let cell = 1.0 / DEFAULT_RASTER as f64;
        let mut split = 0;
        for seed in 0..20 {
            let p = place_lloyd(&region, 2, seed, 2000, 1e-12).unwrap();
            let (a, b) = (p.positions[0], p.positions[1]);
            let sep = (a.0 - b.0).abs().max((a.1 - b.1).abs());
            if sep >= 0.5 - cell {
                split += 1;
            }
        }
        assert!(split >= 18, "only {split}/20 seeds split the square");
    }

    #[test]
    fn lloyd_usually_improves_the_objective() {
        let region = unit();
        let mut improved = 0;
        let mut total = 0;
        for k in 3..=8 {
            for seed in 0..20 {
                let p = place_lloyd(&region, k, 1000 + seed, 300, 1e-9).unwrap();
                total += 1;
                if p.objective >= p.initial_objective.unwrap() {
                    improved += 1;
                }
            }
        }
        assert!(improved * 10 >= total * 9, "{improved}/{total}");
    }

    #[test]
    fn lloyd_pair_settles_on_half_cells() {
        // two generators in a unit square end at the centroids of two half
        // squares, objective 1, whatever the start
        for seed in 0..10 {
            let p = place_lloyd(&unit(), 2, seed, 500, 1e-9).unwrap();
            assert!((p.objective - 1.0).abs() < 2.0 / DEFAULT_RASTER as f64, "{}", p.objective);
        }
    }

    #[test]
    fn non_convergence_is_flagged() {
        let p = place_lloyd(&unit(), 6, 5, 1, 0.0).unwrap();
        assert!(!p.converged);
        assert_eq!(p.iterations, 1);
    }

    #[test]
    fn separation_objective_examples() {
        assert_eq!(separation_objective(&[(0.0, 0.0)]), 0.0);
        assert_eq!(separation_objective(&[(0.0, 0.0), (3.0, 4.0)]), 10.0);
    }
}
