//! Mutual coherence of a measurement operator.
//!
//! Two measures are provided: the worst-case normalized column correlation
//! and the Frobenius surrogate `(1/L) ||I - Q̃ᵀQ̃||_F²`. Zero-norm columns
//! (pixels no measurement sees) are left out of every pairwise term and
//! listed in the [`CoherenceReport`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `Q` with unit-norm columns plus the original column norms.
#[derive(Debug, Clone)]
pub struct NormalizedColumns {
    pub q_tilde: DMatrix<f64>,
    pub norms: DVector<f64>,
    pub zero_columns: Vec<usize>,
}

pub fn normalize_columns(q: &DMatrix<f64>) -> NormalizedColumns {
    let mut q_tilde = q.clone();
    let mut norms = DVector::zeros(q.ncols());
    let mut zero_columns = Vec::new();
    for (l, mut col) in q_tilde.column_iter_mut().enumerate() {
        let n = col.norm();
        norms[l] = n;
        if n > 0.0 {
            col /= n;
        } else {
            zero_columns.push(l);
        }
    }
    NormalizedColumns {
        q_tilde,
        norms,
        zero_columns,
    }
}

/// Gram matrix of the normalized columns and the mask of nonzero columns.
fn normalized_gram(q: &DMatrix<f64>) -> (DMatrix<f64>, Vec<bool>) {
    let nc = normalize_columns(q);
    let mut live = vec![true; q.ncols()];
    for &z in &nc.zero_columns {
        live[z] = false;
    }
    let gram = nc.q_tilde.transpose() * &nc.q_tilde;
    (gram, live)
}

fn max_offdiag(gram: &DMatrix<f64>, live: &[bool]) -> Result<f64> {
    let nonzero = live.iter().filter(|v| **v).count();
    if nonzero < 2 {
        return Err(Error::TooFewColumns { nonzero });
    }
    let l = gram.ncols();
    let mut best: f64 = 0.0;
    for b in 0..l {
        if !live[b] {
            continue;
        }
        for a in 0..b {
            if live[a] {
                best = best.max(gram[(a, b)].abs());
            }
        }
    }
    Ok(best.min(1.0))
}

fn frobenius_from_gram(gram: &DMatrix<f64>, live: &[bool]) -> f64 {
    let l = gram.ncols();
    let mut acc = 0.0;
    for b in 0..l {
        if !live[b] {
            continue;
        }
        for a in 0..l {
            if a != b && live[a] {
                let g = gram[(a, b)];
                acc += g * g;
            }
        }
    }
    acc / l as f64
}

/// Largest `|<Q̃_a, Q̃_b>|` over distinct nonzero columns.
pub fn mutual_coherence_max(q: &DMatrix<f64>) -> Result<f64> {
    let (gram, live) = normalized_gram(q);
    max_offdiag(&gram, &live)
}

/// `(1/L) Σ_{a≠b} <Q̃_a, Q̃_b>²`, equal to `(1/L) ||I_L - Q̃ᵀQ̃||_F²` when
/// no column is zero.
pub fn coherence_frobenius(q: &DMatrix<f64>) -> f64 {
    let (gram, live) = normalized_gram(q);
    frobenius_from_gram(&gram, &live)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub mu_max: f64,
    pub mu_frob: f64,
    pub l: usize,
    pub zero_columns: Vec<usize>,
}

impl CoherenceReport {
    /// Evaluates both measures from a single Gram computation.
    pub fn evaluate(q: &DMatrix<f64>) -> Result<Self> {
        let (gram, live) = normalized_gram(q);
        let zero_columns = live
            .iter()
            .enumerate()
            .filter(|(_, v)| !**v)
            .map(|(i, _)| i)
            .collect();
        Ok(CoherenceReport {
            mu_max: max_offdiag(&gram, &live)?,
            mu_frob: frobenius_from_gram(&gram, &live),
            l: q.ncols(),
            zero_columns,
        })
    }
}

impl fmt::Display for CoherenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let zeros: Vec<String> = self.zero_columns.iter().map(|z| z.to_string()).collect();
        writeln!(f, "mu_max={:e}", self.mu_max)?;
        writeln!(f, "mu_frob={:e}", self.mu_frob)?;
        writeln!(f, "L={}", self.l)?;
        writeln!(f, "zero_columns={}", zeros.join(","))
    }
}

impl FromStr for CoherenceReport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: String| Error::Format(format!("coherence report: {m}"));
        let (mut mu_max, mut mu_frob, mut l, mut zero_columns) = (None, None, None, None);
        for line in s.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line without '=': {line}")))?;
            let value = value.trim();
            match key.trim() {
                "mu_max" => mu_max = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "mu_frob" => mu_frob = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "L" => l = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "zero_columns" => {
                    let cols = if value.is_empty() {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|v| v.trim().parse::<usize>().map_err(|e| bad(e.to_string())))
                            .collect::<Result<Vec<_>>>()?
                    };
                    zero_columns = Some(cols);
                }
                other => return Err(bad(format!("unknown key {other}"))),
            }
        }
        Ok(CoherenceReport {
            mu_max: mu_max.ok_or_else(|| bad("missing mu_max".into()))?,
            mu_frob: mu_frob.ok_or_else(|| bad("missing mu_frob".into()))?,
            l: l.ok_or_else(|| bad("missing L".into()))?,
            zero_columns: zero_columns.ok_or_else(|| bad("missing zero_columns".into()))?,
        })
    }
}
