//! Illumination patterns and the coherence objective they are designed for.
//!
//! With `Q = [H̄ diag(g_1); …; H̄ diag(g_M)]`, the normalized Gram matrix of
//! `Q` factors as `O = S_Φ^{-1/2} (W ⊙ Φ) S_Φ^{-1/2}`, where `W` is the
//! normalized Gram matrix of the stacked transports (constant during pattern
//! design), `Φ = ΛᵀΛ` and `S_Φ = diag(Φ)`. The cost `γ = ||O||_F² - L` and
//! its gradient with respect to `Λ` therefore never need `Q` itself.

mod baseline;
mod optimize;

pub use baseline::{baseline_patterns, sylvester_entry, BaselineKind};
pub use optimize::{
    optimize_from, optimize_patterns, optimize_patterns_with_w, OptimizeOptions, OptimizeReport,
    StepRule,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::transport::{SceneGrid, Sensor, TransportMatrix};

/// Floor applied to `diag(Φ)` while optimizing, so pixels whose pattern
/// column collapses to zero do not divide by zero.
pub const PHI_DIAG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Optimized,
    Hadamard,
    Bernoulli,
    Gaussian,
    AllOnes,
    /// Read back from a pattern blob.
    Loaded,
}

/// `M × L` pattern matrix `Λ`; row `j` is pattern `g_jᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    lambda: DMatrix<f64>,
    provenance: Provenance,
}

impl PatternSet {
    pub fn new(lambda: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        if lambda.nrows() == 0 || lambda.ncols() == 0 {
            return Err(invalid("pattern set must be non-empty"));
        }
        if let Some(v) = lambda.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(invalid(format!("pattern entry {v} outside [-1, 1]")));
        }
        if let Some(j) = (0..lambda.nrows()).find(|&j| lambda.row(j).iter().all(|v| *v == 0.0)) {
            return Err(invalid(format!("pattern {j} is all zeros")));
        }
        Ok(PatternSet { lambda, provenance })
    }

    pub fn all_ones(m: usize, l: usize) -> Result<Self> {
        PatternSet::new(DMatrix::from_element(m, l, 1.0), Provenance::AllOnes)
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn m(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn l(&self) -> usize {
        self.lambda.ncols()
    }

    pub fn into_lambda(self) -> DMatrix<f64> {
        self.lambda
    }

    /// First `m` patterns.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m() {
            return Err(invalid(format!("cannot take {m} of {} patterns", self.m())));
        }
        PatternSet::new(self.lambda.rows(0, m).into_owned(), self.provenance)
    }
}

/// All sensors' transport matrices stacked sensor-major into `H̄`.
#[derive(Debug, Clone)]
pub struct StackedTransport {
    pub h_bar: DMatrix<f64>,
    /// `Σ_rows H̄²` for every column.
    pub column_weights: DVector<f64>,
    /// Row count contributed by each sensor, in stacking order.
    pub block_rows: Vec<usize>,
    pub sensors: Vec<Sensor>,
    pub scene: Option<SceneGrid>,
}

impl StackedTransport {
    pub fn from_transports(transports: &[TransportMatrix]) -> Result<Self> {
        let first = transports
            .first()
            .ok_or_else(|| invalid("need at least one transport matrix"))?;
        for t in &transports[1..] {
            if t.scene != first.scene {
                return Err(invalid("transport matrices were built for different scenes"));
            }
        }
        let l = first.num_pixels();
        let rows: usize = transports.iter().map(|t| t.entries.nrows()).sum();
        let mut h_bar = DMatrix::zeros(rows, l);
        let mut offset = 0;
        for t in transports {
            let n = t.entries.nrows();
            h_bar.rows_mut(offset, n).copy_from(&t.entries);
            offset += n;
        }
        let mut stacked = StackedTransport::from_matrix(h_bar);
        stacked.block_rows = transports.iter().map(|t| t.entries.nrows()).collect();
        stacked.sensors = transports.iter().map(|t| t.sensor).collect();
        stacked.scene = Some(first.scene.clone());
        Ok(stacked)
    }

    /// Wraps an explicit `H̄` (one block, no geometry).
    pub fn from_matrix(h_bar: DMatrix<f64>) -> Self {
        let column_weights =
            DVector::from_iterator(h_bar.ncols(), h_bar.column_iter().map(|c| c.norm_squared()));
        StackedTransport {
            block_rows: vec![h_bar.nrows()],
            h_bar,
            column_weights,
            sensors: Vec::new(),
            scene: None,
        }
    }

    pub fn num_pixels(&self) -> usize {
        self.h_bar.ncols()
    }
}

/// Normalized transport Gram `W` and the columns left out of it.
#[derive(Debug, Clone)]
pub struct TransportGram {
    pub w: DMatrix<f64>,
    /// Pixels with an all-zero `H̄` column; their `W` row and column are
    /// zero apart from a unit diagonal, so they drop out of `γ`.
    pub zero_columns: Vec<usize>,
}

/// `W_nm = (H̄ᵀH̄)_nm / sqrt(e_n e_m)` with `e` the column energies.
pub fn precompute_w(h_bar: &StackedTransport) -> TransportGram {
    let h = &h_bar.h_bar;
    let mut w = h.transpose() * h;
    let l = w.ncols();
    let inv: Vec<f64> = h_bar
        .column_weights
        .iter()
        .map(|&e| if e > 0.0 { 1.0 / e.sqrt() } else { 0.0 })
        .collect();
    for m in 0..l {
        for n in 0..l {
            w[(n, m)] *= inv[n] * inv[m];
        }
        w[(m, m)] = 1.0;
    }
    let zero_columns = (0..l).filter(|&n| inv[n] == 0.0).collect();
    TransportGram { w, zero_columns }
}

/// Quantities shared by the cost and gradient at one `Λ`.
#[derive(Debug, Clone)]
pub struct GramCache {
    pub w: DMatrix<f64>,
    /// `Φ = ΛᵀΛ`.
    pub phi: DMatrix<f64>,
    /// `diag(Φ)`.
    pub s_phi: DVector<f64>,
}

impl GramCache {
    pub fn new(lambda: &PatternSet, w: &DMatrix<f64>) -> Result<Self> {
        check_dims(lambda.lambda(), w)?;
        let phi = pattern_gram(lambda.lambda());
        let s_phi = phi.diagonal();
        Ok(GramCache {
            w: w.clone(),
            phi,
            s_phi,
        })
    }

    pub fn cost(&self) -> Result<f64> {
        strict_diag(&self.s_phi)?;
        let objective = Objective::new(&self.w)?;
        Ok(objective.gamma(&self.phi, self.s_phi.as_slice()))
    }

    pub fn grad(&self, lambda: &PatternSet) -> Result<DMatrix<f64>> {
        strict_diag(&self.s_phi)?;
        let objective = Objective::new(&self.w)?;
        Ok(objective.gradient(lambda.lambda(), &self.phi, self.s_phi.as_slice()))
    }
}

fn check_dims(lambda: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<()> {
    if w.nrows() != w.ncols() {
        return Err(Error::DimensionMismatch {
            what: "W (square)",
            expected: w.nrows(),
            found: w.ncols(),
        });
    }
    if lambda.ncols() != w.ncols() {
        return Err(Error::DimensionMismatch {
            what: "pattern columns vs W",
            expected: w.ncols(),
            found: lambda.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn pattern_gram(lambda: &DMatrix<f64>) -> DMatrix<f64> {
    lambda.transpose() * lambda
}

fn strict_diag(s_phi: &DVector<f64>) -> Result<()> {
    match s_phi.iter().position(|&s| !(s > 0.0)) {
        Some(pixel) => Err(Error::ZeroIllumination { pixel }),
        None => Ok(()),
    }
}

/// The `W`-dependent part of the cost, precomputed once per design problem.
#[derive(Debug, Clone)]
pub(crate) struct Objective {
    /// `W ⊙ W + (W ⊙ W)ᵀ` with a zero diagonal.
    w2s: DMatrix<f64>,
    /// `Σ_a (W_aa² - 1)`: the diagonal of `O` is `W_aa`.
    diag_term: f64,
}

impl Objective {
    pub(crate) fn new(w: &DMatrix<f64>) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::DimensionMismatch {
                what: "W (square)",
                expected: w.nrows(),
                found: w.ncols(),
            });
        }
        let l = w.ncols();
        let mut w2s = DMatrix::zeros(l, l);
        for m in 0..l {
            for a in 0..l {
                if a != m {
                    let (x, y) = (w[(a, m)], w[(m, a)]);
                    w2s[(a, m)] = x * x + y * y;
                }
            }
        }
        let diag_term = (0..l).map(|a| w[(a, a)] * w[(a, a)] - 1.0).sum();
        Ok(Objective { w2s, diag_term })
    }

    pub(crate) fn l(&self) -> usize {
        self.w2s.ncols()
    }

    /// `γ = ½ Σ_{a≠b} (W_ab² + W_ba²) Φ_ab² / (s_a s_b) + Σ_a (W_aa² - 1)`,
    /// which is `||O||_F² - L` without subtracting `L` from a large sum.
    pub(crate) fn gamma(&self, phi: &DMatrix<f64>, s: &[f64]) -> f64 {
        let l = self.l();
        let mut acc = 0.0;
        for b in 0..l {
            let w_col = self.w2s.column(b);
            let p_col = phi.column(b);
            let mut col_acc = 0.0;
            for a in 0..l {
                let p = p_col[a];
                col_acc += w_col[a] * p * p / s[a];
            }
            acc += col_acc / s[b];
        }
        0.5 * acc + self.diag_term
    }

    /// Analytic `dγ/dΛ = 2 (c₁ - c₂) S_Φ^{-1}` with
    /// `c₁ = Λ S_Φ^{-1} (α₁ + α₁ᵀ)`, `c₂ = Λ ⊙ (1 S_Φ^{-1} (α₂ + α₂ᵀ) S_Φ^{-1})`,
    /// `α₁ = W ⊙ W ⊙ Φ ⊙ I⁻` and `α₂ = W ⊙ W ⊙ Φ ⊙ Φ ⊙ I⁻`.
    pub(crate) fn gradient(&self, lambda: &DMatrix<f64>, phi: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
        let l = self.l();
        let inv: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();
        // a1 = α₁ + α₁ᵀ; v = 1 S⁻¹ (α₂ + α₂ᵀ) S⁻¹ as a row vector
        let mut a1 = DMatrix::zeros(l, l);
        let mut v = vec![0.0; l];
        for m in 0..l {
            let w_col = self.w2s.column(m);
            let p_col = phi.column(m);
            let mut out = a1.column_mut(m);
            let mut vm = 0.0;
            for a in 0..l {
                let t = w_col[a] * p_col[a];
                out[a] = t;
                vm += inv[a] * t * p_col[a];
            }
            v[m] = vm * inv[m];
        }
        let mut scaled = lambda.clone();
        for (a, mut col) in scaled.column_iter_mut().enumerate() {
            col *= inv[a];
        }
        let mut grad = scaled * a1;
        for m in 0..l {
            let factor = 2.0 * inv[m];
            for j in 0..lambda.nrows() {
                grad[(j, m)] = factor * (grad[(j, m)] - lambda[(j, m)] * v[m]);
            }
        }
        grad
    }
}

/// `γ(Λ) = ||S_Φ^{-1/2} (W ⊙ Φ) S_Φ^{-1/2}||_F² - L`.
pub fn coherence_cost(lambda: &PatternSet, w: &DMatrix<f64>) -> Result<f64> {
    GramCache::new(lambda, w)?.cost()
}

pub fn coherence_grad(lambda: &PatternSet, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    GramCache::new(lambda, w)?.grad(lambda)
}
