use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::patterns::{PatternSet, StackedTransport};
use crate::transport::{SceneGrid, TransportMatrix};

/// Default memory cap for a dense total operator (2 GiB).
pub const MAX_OPERATOR_BYTES: usize = 2 << 30;

/// Rows of `Q` produced by sensor `sensor` under pattern `pattern`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockIndex {
    pub pattern: usize,
    pub sensor: usize,
    pub rows: Range<usize>,
}

/// Dense `NKM × L` total measurement operator, pattern-major.
#[derive(Debug, Clone)]
pub struct TotalOperator {
    pub q: DMatrix<f64>,
    pub blocks: Vec<BlockIndex>,
    pub col_norms: DVector<f64>,
    pub scene: Option<SceneGrid>,
    /// `(H̄, Λ)` when `Q` was assembled from them; enables the factored
    /// normal matrix `(H̄ᵀH̄) ⊙ (ΛᵀΛ)`.
    factors: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl TotalOperator {
    /// Wraps an explicit operator with no block structure.
    pub fn from_matrix(q: DMatrix<f64>) -> Self {
        let col_norms = DVector::from_iterator(q.ncols(), q.column_iter().map(|c| c.norm()));
        TotalOperator {
            blocks: vec![BlockIndex {
                pattern: 0,
                sensor: 0,
                rows: 0..q.nrows(),
            }],
            q,
            col_norms,
            scene: None,
            factors: None,
        }
    }

    pub fn nrows(&self) -> usize {
        self.q.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.q.ncols()
    }

    pub fn block(&self, pattern: usize, sensor: usize) -> Option<&BlockIndex> {
        self.blocks
            .iter()
            .find(|b| b.pattern == pattern && b.sensor == sensor)
    }

    pub fn apply(&self, f: &DVector<f64>) -> DVector<f64> {
        &self.q * f
    }

    pub fn apply_transpose(&self, m: &DVector<f64>) -> DVector<f64> {
        self.q.tr_mul(m)
    }

    /// `QᵀQ`, through the Hadamard-product factorization when available.
    pub fn normal_matrix(&self) -> DMatrix<f64> {
        match &self.factors {
            Some((h_bar, lambda)) => {
                let hh = h_bar.transpose() * h_bar;
                let phi = lambda.transpose() * lambda;
                hh.component_mul(&phi)
            }
            None => self.q.transpose() * &self.q,
        }
    }
}

pub fn assemble_q(transports: &[TransportMatrix], patterns: &PatternSet) -> Result<TotalOperator> {
    assemble_q_capped(transports, patterns, MAX_OPERATOR_BYTES)
}

/// Stacks `H_i diag(g_j)` blocks, pattern-major then sensor.
pub fn assemble_q_capped(
    transports: &[TransportMatrix],
    patterns: &PatternSet,
    cap_bytes: usize,
) -> Result<TotalOperator> {
    let stacked = StackedTransport::from_transports(transports)?;
    let l = stacked.num_pixels();
    if patterns.l() != l {
        return Err(Error::DimensionMismatch {
            what: "pattern length vs scene pixels",
            expected: l,
            found: patterns.l(),
        });
    }
    let kn = stacked.h_bar.nrows();
    let rows = kn
        .checked_mul(patterns.m())
        .ok_or_else(|| invalid("operator row count overflows"))?;
    let bytes = (rows as u128) * (l as u128) * 8;
    if bytes > cap_bytes as u128 {
        return Err(Error::BudgetExceeded {
            what: "total operator bytes",
            requested: bytes,
            cap: cap_bytes as u128,
        });
    }

    let lambda = patterns.lambda();
    let h = &stacked.h_bar;
    let mut q = DMatrix::zeros(rows, l);
    for col in 0..l {
        let h_col = h.column(col);
        let mut q_col = q.column_mut(col);
        for j in 0..patterns.m() {
            let g = lambda[(j, col)];
            let base = j * kn;
            for r in 0..kn {
                q_col[base + r] = h_col[r] * g;
            }
        }
    }

    let mut blocks = Vec::with_capacity(patterns.m() * transports.len());
    for j in 0..patterns.m() {
        let mut offset = j * kn;
        for (i, n) in stacked.block_rows.iter().enumerate() {
            blocks.push(BlockIndex {
                pattern: j,
                sensor: i,
                rows: offset..offset + n,
            });
            offset += n;
        }
    }
    let col_norms = DVector::from_iterator(l, q.column_iter().map(|c| c.norm()));
    Ok(TotalOperator {
        q,
        blocks,
        col_norms,
        scene: stacked.scene,
        factors: Some((stacked.h_bar, lambda.clone())),
    })
}
