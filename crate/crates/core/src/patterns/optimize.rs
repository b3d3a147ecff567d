use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::baseline::bernoulli_matrix;
use super::{pattern_gram, precompute_w, Objective, PatternSet, Provenance, StackedTransport, PHI_DIAG_FLOOR};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Halve the step until `γ(Λ⁺) ≤ γ(Λ) + c ⟨∇γ, Λ⁺ - Λ⟩`, then multiply
    /// it by `growth` for the next iteration.
    Armijo { c: f64, growth: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Armijo { c: 1e-4, growth: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub max_iter: usize,
    /// Relative cost decrease over `window` accepted steps that counts as
    /// converged.
    pub tol: f64,
    pub window: usize,
    pub step_rule: StepRule,
    pub max_backtracks: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            max_iter: 2000,
            tol: 1e-7,
            window: 10,
            step_rule: StepRule::default(),
            max_backtracks: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub patterns: PatternSet,
    pub cost: f64,
    pub initial_cost: f64,
    /// Cost after every accepted step, starting with the initial cost.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when some `diag(Φ)` entry had to be floored.
    pub floor_applied: bool,
}

struct Point {
    lambda: DMatrix<f64>,
    phi: DMatrix<f64>,
    s: Vec<f64>,
    cost: f64,
}

fn evaluate(objective: &Objective, lambda: DMatrix<f64>, floored: &mut bool) -> Point {
    let phi = pattern_gram(&lambda);
    let s: Vec<f64> = phi
        .diagonal()
        .iter()
        .map(|&v| {
            if v < PHI_DIAG_FLOOR {
                *floored = true;
                PHI_DIAG_FLOOR
            } else {
                v
            }
        })
        .collect();
    let cost = objective.gamma(&phi, &s);
    Point { lambda, phi, s, cost }
}

/// Learns `m` patterns for the stacked transports `h_bar`, starting from a
/// seeded Bernoulli ±1 draw.
pub fn optimize_patterns(
    h_bar: &StackedTransport,
    m: usize,
    seed: u64,
    opts: &OptimizeOptions,
) -> Result<OptimizeReport> {
    let gram = precompute_w(h_bar);
    optimize_patterns_with_w(&gram.w, m, seed, opts)
}

pub fn optimize_patterns_with_w(
    w: &DMatrix<f64>,
    m: usize,
    seed: u64,
    opts: &OptimizeOptions,
) -> Result<OptimizeReport> {
    if m == 0 {
        return Err(invalid("need at least one pattern"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = bernoulli_matrix(m, w.ncols(), &mut rng);
    optimize_from(w, start, opts)
}

/// Projected gradient descent on `γ` over the box `[-1, 1]^{M×L}`.
pub fn optimize_from(
    w: &DMatrix<f64>,
    start: DMatrix<f64>,
    opts: &OptimizeOptions,
) -> Result<OptimizeReport> {
    if start.ncols() != w.ncols() {
        return Err(invalid(format!(
            "start has {} columns, W has {}",
            start.ncols(),
            w.ncols()
        )));
    }
    let objective = Objective::new(w)?;
    let StepRule::Armijo { c, growth } = opts.step_rule;
    let mut floored = false;
    let start = start.map(|v| v.clamp(-1.0, 1.0));
    let mut point = evaluate(&objective, start, &mut floored);
    let initial_cost = point.cost;
    let mut history = vec![point.cost];
    let mut grad = objective.gradient(&point.lambda, &point.phi, &point.s);
    let gmax = grad.amax();
    let mut step = if gmax > 0.0 { 0.5 / gmax } else { 0.0 };
    let mut converged = gmax == 0.0 || point.cost == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial = (&point.lambda - &grad * step).map(|v| v.clamp(-1.0, 1.0));
            let predicted = grad.dot(&(&trial - &point.lambda));
            if predicted == 0.0 {
                break;
            }
            let candidate = evaluate(&objective, trial, &mut floored);
            if candidate.cost <= point.cost + c * predicted {
                accepted = Some(candidate);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            // no feasible descent at any tried step: projected-stationary
            converged = true;
            break;
        };
        point = next;
        history.push(point.cost);
        if point.cost <= 0.0 {
            converged = true;
            break;
        }
        if history.len() > opts.window {
            let old = history[history.len() - 1 - opts.window];
            if old - point.cost <= opts.tol * old.abs() {
                converged = true;
                break;
            }
        }
        grad = objective.gradient(&point.lambda, &point.phi, &point.s);
        step *= growth;
    }

    Ok(OptimizeReport {
        patterns: PatternSet::new(point.lambda, Provenance::Optimized)?,
        cost: point.cost,
        initial_cost,
        history,
        iterations,
        converged,
        floor_applied: floored,
    })
}
