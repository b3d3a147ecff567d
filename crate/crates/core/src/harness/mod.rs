//! Config-driven experiment commands. Every command writes into one run
//! directory: the config text verbatim, the effective seed, and its
//! artifacts (CSV, PGM, blob). CSV contents depend only on config and seed.

mod commands;
pub mod config;

pub use commands::{cmd_design, cmd_image, cmd_min_patterns, cmd_transport};
pub use config::ExperimentConfig;

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{invalid, Error, Result};
use crate::io::{read_csv, write_blob, write_csv};
use crate::patterns::PatternSet;
use crate::placement::{Placement, PlacementMethod};
use crate::raster::Raster;

/// Files written by one command, in creation order.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
}

/// Output directory of one run.
pub struct RunDir {
    root: PathBuf,
    out: RunOutput,
}

impl RunDir {
    /// Creates `root` and echoes the config and effective seed into it.
    pub fn create(root: impl AsRef<Path>, command: &str, config_text: &str, seed: u64) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let mut dir = RunDir {
            root,
            out: RunOutput::default(),
        };
        dir.write_with("config.toml", |p| Ok(fs::write(p, config_text)?))?;
        dir.write_with("run.toml", |p| {
            Ok(fs::write(p, format!("command = \"{command}\"\nseed = {seed}\n"))?)
        })?;
        Ok(dir)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `name` through a temporary file so that readers never see a
    /// partial artifact.
    pub fn write_with(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<PathBuf> {
        let target = self.path(name);
        let tmp = self.path(&format!(".partial.{name}"));
        write(&tmp)?;
        fs::rename(&tmp, &target)?;
        self.out.files.push(target.clone());
        Ok(target)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        self.write_with(name, |p| write_csv(p, header, rows))
    }

    pub fn pgm(&mut self, name: &str, image: &Raster) -> Result<PathBuf> {
        self.write_with(name, |p| image.write_pgm(p))
    }

    pub fn finish(self) -> RunOutput {
        self.out
    }
}

pub fn write_placement(dir: &mut RunDir, name: &str, placement: &Placement) -> Result<PathBuf> {
    let rows: Vec<Vec<String>> = placement
        .positions
        .iter()
        .enumerate()
        .map(|(i, (x, y))| vec![i.to_string(), format!("{x:?}"), format!("{y:?}")])
        .collect();
    dir.csv(name, &["index", "x", "y"], &rows)
}

/// Reads a placement CSV (`index,x,y`) back; method is recorded as grid.
pub fn read_placement(path: impl AsRef<Path>) -> Result<Placement> {
    let (header, rows) = read_csv(path)?;
    if header != ["index", "x", "y"] {
        return Err(Error::Format(format!("unexpected placement header {header:?}")));
    }
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Format(format!("bad coordinate {s:?}")))
    };
    let positions = rows
        .iter()
        .map(|r| Ok((parse(&r[1])?, parse(&r[2])?)))
        .collect::<Result<Vec<_>>>()?;
    if positions.is_empty() {
        return Err(invalid("placement file lists no sensors"));
    }
    Ok(Placement {
        objective: crate::placement::separation_objective(&positions),
        positions,
        method: PlacementMethod::Grid,
        converged: true,
        iterations: 0,
        initial_objective: None,
    })
}

/// Writes the pattern blob and up to `previews` pattern images, mapping
/// `[-1, 1]` affinely to `[0, 255]`.
pub fn write_patterns(
    dir: &mut RunDir,
    stem: &str,
    patterns: &PatternSet,
    grid: (usize, usize),
    previews: usize,
) -> Result<()> {
    dir.write_with(&format!("{stem}.blob"), |p| write_blob(p, patterns.lambda()))?;
    for j in 0..previews.min(patterns.m()) {
        let row = patterns.lambda().row(j);
        let img = Raster::from_fn(grid.0, grid.1, |x, y| (row[y * grid.0 + x] + 1.0) / 2.0)?;
        dir.pgm(&format!("{stem}_{j}.pgm"), &img)?;
    }
    Ok(())
}
