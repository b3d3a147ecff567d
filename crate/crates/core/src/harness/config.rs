//! Experiment configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns::{BaselineKind, OptimizeOptions};
use crate::placement::{LloydOptions, PlacementStrategy, Region};
use crate::simrecon::{InnerSolver, TvOptions};
use crate::transport::{SceneGrid, Weighting};

pub const PS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed; `--seed` on the command line replaces it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scene: SceneSection,
    #[serde(default)]
    pub sensors: SensorSection,
    #[serde(default)]
    pub patterns: PatternSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub recon: ReconSection,
    #[serde(default)]
    pub transport: TransportSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub image: ImageSection,
    #[serde(default)]
    pub min_patterns: MinPatternsSection,
    /// Directory the config was read from; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub width_m: f64,
    pub height_m: f64,
    pub nx: usize,
    pub ny: usize,
    pub distance_m: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        SceneSection {
            width_m: 5.0,
            height_m: 5.0,
            nx: 40,
            ny: 40,
            distance_m: 10.0,
        }
    }
}

impl SceneSection {
    pub fn grid(&self) -> Result<SceneGrid> {
        SceneGrid::new(self.width_m, self.height_m, self.nx, self.ny, self.distance_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementKind {
    Grid,
    Lloyd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    pub k: usize,
    pub t_res_ps: f64,
    /// Side of the square sensor region, centred under the scene.
    pub region_side_m: f64,
    pub placement: PlacementKind,
    pub grid_n: usize,
    pub lloyd_max_iter: usize,
    pub lloyd_tol_m: f64,
    pub weighting: Weighting,
    /// Placement CSV (`index,x,y`) to use instead of placing sensors.
    pub placement_file: Option<PathBuf>,
}

impl Default for SensorSection {
    fn default() -> Self {
        SensorSection {
            k: 1,
            t_res_ps: 20.0,
            region_side_m: 0.1,
            placement: PlacementKind::Grid,
            grid_n: 5,
            lloyd_max_iter: 500,
            lloyd_tol_m: 1e-9,
            weighting: Weighting::InverseSquare,
            placement_file: None,
        }
    }
}

impl SensorSection {
    pub fn region(&self) -> Result<Region> {
        Region::square(self.region_side_m)
    }

    pub fn t_res(&self) -> f64 {
        self.t_res_ps * PS
    }

    pub fn strategy(&self, seed: u64) -> PlacementStrategy {
        match self.placement {
            PlacementKind::Grid => PlacementStrategy::Grid { grid_n: self.grid_n },
            PlacementKind::Lloyd => PlacementStrategy::Lloyd {
                seed,
                options: LloydOptions {
                    max_iter: self.lloyd_max_iter,
                    tol: self.lloyd_tol_m,
                    ..Default::default()
                },
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Optimized,
    Hadamard,
    Bernoulli,
    Gaussian,
    AllOnes,
}

impl PatternKind {
    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            PatternKind::Optimized => None,
            PatternKind::Hadamard => Some(BaselineKind::Hadamard),
            PatternKind::Bernoulli => Some(BaselineKind::Bernoulli),
            PatternKind::Gaussian => Some(BaselineKind::Gaussian),
            PatternKind::AllOnes => Some(BaselineKind::AllOnes),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Optimized => "optimized",
            PatternKind::Hadamard => "hadamard",
            PatternKind::Bernoulli => "bernoulli",
            PatternKind::Gaussian => "gaussian",
            PatternKind::AllOnes => "all_ones",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternSection {
    pub kind: PatternKind,
    pub m: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Pattern blob to load instead of generating patterns.
    pub file: Option<PathBuf>,
}

impl Default for PatternSection {
    fn default() -> Self {
        PatternSection {
            kind: PatternKind::Optimized,
            m: 50,
            max_iter: 2000,
            tol: 1e-7,
            file: None,
        }
    }
}

impl PatternSection {
    pub fn optimize_options(&self) -> OptimizeOptions {
        OptimizeOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// `inf` for noiseless measurements.
    pub snr_db: f64,
    /// Noise realizations; empty means one realization with the base seed.
    pub seeds: Vec<u64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            snr_db: 60.0,
            seeds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Tv,
    Pinv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconSection {
    pub solver: SolverKind,
    pub reg_mu: f64,
    pub beta: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub cg_tol: f64,
    pub inner: InnerSolver,
}

impl Default for ReconSection {
    fn default() -> Self {
        let tv = TvOptions::default();
        ReconSection {
            solver: SolverKind::Tv,
            reg_mu: tv.reg_mu,
            beta: tv.beta,
            max_iter: tv.max_iter,
            tol: tv.tol,
            cg_tol: tv.cg_tol,
            inner: tv.inner,
        }
    }
}

impl ReconSection {
    pub fn tv_options(&self) -> TvOptions {
        TvOptions {
            reg_mu: self.reg_mu,
            beta: self.beta,
            max_iter: self.max_iter,
            tol: self.tol,
            cg_tol: self.cg_tol,
            inner: self.inner,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportSection {
    /// Time resolutions for ring maps.
    pub ring_t_ps: Vec<f64>,
    /// Grid for the resolution-limit table.
    pub limit_d_m: Vec<f64>,
    pub limit_t_ps: Vec<f64>,
}

impl Default for TransportSection {
    fn default() -> Self {
        TransportSection {
            ring_t_ps: vec![20.0, 50.0, 100.0],
            limit_d_m: vec![1.0, 2.0, 5.0, 10.0, 20.0],
            limit_t_ps: vec![1.0, 5.0, 10.0, 20.0, 50.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub k: Vec<usize>,
    pub t_ps: Vec<f64>,
    pub region_side_m: Vec<f64>,
    /// Pattern counts for the pattern comparison; empty skips it.
    pub m: Vec<usize>,
    pub kinds: Vec<PatternKind>,
    /// Number of pattern previews written per optimized set.
    pub previews: usize,
    /// Worker threads for independent sweep points; 0 uses the default pool.
    pub workers: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            k: vec![1, 2, 4],
            t_ps: vec![100.0, 50.0, 20.0],
            region_side_m: vec![0.1],
            m: Vec::new(),
            kinds: vec![
                PatternKind::Optimized,
                PatternKind::Hadamard,
                PatternKind::Bernoulli,
                PatternKind::Gaussian,
            ],
            previews: 4,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageMode {
    /// Placed sensors, configured patterns, TV or pinv reconstruction.
    Design,
    /// One sensor with a single time bin (classical single-pixel camera).
    SinglePixel,
    /// Identity operator, no noise, pseudoinverse: must reproduce the input.
    Sanity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageSection {
    pub mode: ImageMode,
    /// 8-bit PGM inputs; their size must match the scene grid.
    pub inputs: Vec<PathBuf>,
}

impl Default for ImageSection {
    fn default() -> Self {
        ImageSection {
            mode: ImageMode::Design,
            inputs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinPatternsSection {
    pub k: Vec<usize>,
    pub t_ps: Vec<f64>,
    pub ssim: f64,
    pub psnr_db: f64,
    pub m_lo: usize,
    pub m_hi: usize,
}

impl Default for MinPatternsSection {
    fn default() -> Self {
        MinPatternsSection {
            k: vec![1, 2],
            t_ps: vec![20.0],
            ssim: 0.95,
            psnr_db: 40.0,
            m_lo: 1,
            m_hi: 400,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, text))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn noise_seeds(&self) -> Vec<u64> {
        if self.noise.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.noise.seeds.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c.scene.nx, 40);
        assert_eq!(c.recon.reg_mu, 8192.0);
        assert_eq!(c.min_patterns.m_hi, 400);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ExperimentConfig::parse("[scene]\nnx = 4\ncolour = 1\n"),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::parse("[bogus]\n").is_err());
    }

    #[test]
    fn full_sections_parse() {
        let c = ExperimentConfig::parse(
            r#"
seed = 7
[scene]
nx = 8
ny = 6
[sensors]
k = 2
placement = "lloyd"
weighting = "unit"
[patterns]
kind = "bernoulli"
m = 3
[noise]
snr_db = inf
seeds = [1, 2]
[recon]
solver = "pinv"
inner = "cg"
[image]
mode = "single_pixel"
inputs = ["a.pgm"]
"#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.sensors.placement, PlacementKind::Lloyd);
        assert_eq!(c.sensors.weighting, Weighting::Unit);
        assert_eq!(c.patterns.kind, PatternKind::Bernoulli);
        assert_eq!(c.noise.snr_db, f64::INFINITY);
        assert_eq!(c.noise_seeds(), vec![1, 2]);
        assert_eq!(c.image.mode, ImageMode::SinglePixel);
        assert_eq!(c.recon.tv_options().inner, InnerSolver::Cg);
        assert_eq!(ExperimentConfig::parse("").unwrap().recon.inner, InnerSolver::Cholesky);
    }
}
