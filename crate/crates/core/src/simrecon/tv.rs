use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::TotalOperator;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    /// One dense Cholesky factorization reused by every outer iteration.
    Cholesky,
    /// Jacobi-preconditioned conjugate gradient, warm-started.
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvOptions {
    /// Weight of the data term, applied after `Q` and `m` are divided by the
    /// RMS column norm of `Q`.
    pub reg_mu: f64,
    /// Penalty on the split `z = ∇f`.
    pub beta: f64,
    pub max_iter: usize,
    /// Relative iterate change that counts as converged.
    pub tol: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub inner: InnerSolver,
}

impl Default for TvOptions {
    fn default() -> Self {
        TvOptions {
            reg_mu: 8192.0,
            beta: 32.0,
            max_iter: 300,
            tol: 1e-6,
            cg_tol: 1e-8,
            cg_max_iter: 500,
            inner: InnerSolver::Cholesky,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconResult {
    /// Reconstruction clipped to `[0, 1]`.
    pub f_hat: DVector<f64>,
    pub solver_iters: usize,
    /// `||Q f_hat - m||` of the clipped result, in measurement units.
    pub residual_norm: f64,
    pub converged: bool,
    /// Objective of the accepted iterate after every outer iteration
    /// (scaled problem, before clipping); non-increasing.
    pub objective: Vec<f64>,
    /// Objective of the raw splitting iterate, which need not decrease.
    pub raw_objective: Vec<f64>,
}

/// Forward differences with a zero difference across the far border.
struct Grad {
    nx: usize,
    ny: usize,
}

impl Grad {
    fn len(&self) -> usize {
        self.nx * self.ny
    }

    fn apply(&self, f: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        for y in 0..ny {
            for x in 0..nx {
                let l = y * nx + x;
                gx[l] = if x + 1 < nx { f[l + 1] - f[l] } else { 0.0 };
                gy[l] = if y + 1 < ny { f[l + nx] - f[l] } else { 0.0 };
            }
        }
    }

    /// `Dᵀ [gx; gy]`.
    fn adjoint(&self, gx: &[f64], gy: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        for y in 0..ny {
            for x in 0..nx {
                let l = y * nx + x;
                let mut v = 0.0;
                if x + 1 < nx {
                    v -= gx[l];
                }
                if x > 0 {
                    v += gx[l - 1];
                }
                if y + 1 < ny {
                    v -= gy[l];
                }
                if y > 0 {
                    v += gy[l - nx];
                }
                out[l] = v;
            }
        }
    }

    /// Diagonal of `DᵀD`.
    fn degree(&self, l: usize) -> f64 {
        let (x, y) = (l % self.nx, l / self.nx);
        let along = |i: usize, n: usize| match (i > 0, i + 1 < n) {
            (true, true) => 2.0,
            (false, false) => 0.0,
            _ => 1.0,
        };
        along(x, self.nx) + along(y, self.ny)
    }

    fn tv(&self, f: &[f64]) -> f64 {
        let mut gx = vec![0.0; self.len()];
        let mut gy = vec![0.0; self.len()];
        self.apply(f, &mut gx, &mut gy);
        gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).sum()
    }
}

struct System<'a> {
    normal: &'a DMatrix<f64>,
    grad: &'a Grad,
    mu: f64,
    beta: f64,
}

impl System<'_> {
    fn apply(&self, f: &DVector<f64>, out: &mut DVector<f64>) {
        let n = self.grad.len();
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        let mut dtd = vec![0.0; n];
        self.grad.apply(f.as_slice(), &mut gx, &mut gy);
        self.grad.adjoint(&gx, &gy, &mut dtd);
        out.gemv(self.mu, self.normal, f, 0.0);
        for (o, d) in out.iter_mut().zip(dtd) {
            *o += self.beta * d;
        }
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.grad.len();
        let mut a = self.normal * self.mu;
        let (nx, ny) = (self.grad.nx, self.grad.ny);
        let mut couple = |i: usize, j: usize| {
            a[(i, i)] += self.beta;
            a[(j, j)] += self.beta;
            a[(i, j)] -= self.beta;
            a[(j, i)] -= self.beta;
        };
        for l in 0..n {
            let (x, y) = (l % nx, l / nx);
            if x + 1 < nx {
                couple(l, l + 1);
            }
            if y + 1 < ny {
                couple(l, l + nx);
            }
        }
        a
    }
}

/// Preconditioned CG on `A x = b` starting from `x`; returns iterations used.
fn cg(sys: &System, b: &DVector<f64>, x: &mut DVector<f64>, precond: &DVector<f64>, tol: f64, max_iter: usize) -> usize {
    let n = b.len();
    let b_norm = b.norm();
    if b_norm == 0.0 {
        x.fill(0.0);
        return 0;
    }
    let mut ax = DVector::zeros(n);
    sys.apply(x, &mut ax);
    let mut r = b - &ax;
    let mut z = r.component_mul(precond);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut ap = DVector::zeros(n);
    for it in 0..max_iter {
        if r.norm() <= tol * b_norm {
            return it;
        }
        sys.apply(&p, &mut ap);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return it;
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        z = r.component_mul(precond);
        let rz_next = r.dot(&z);
        p = &z + &p * (rz_next / rz);
        rz = rz_next;
    }
    max_iter
}

/// Minimizes `TV(f) + (μ/2) ||A f - b||²` with `A = Q/s`, `b = m/s`, where
/// `s` is the RMS column norm of `Q`, by alternating direction updates on the
/// split `z = ∇f`. The scene is an `nx × ny` grid, x fastest.
///
/// The splitting sequence itself is not a descent method; the reported
/// iterate only moves to a new splitting iterate when that does not raise
/// the objective, and the last accepted iterate is returned.
pub fn tv_reconstruct(
    q: &TotalOperator,
    m: &DVector<f64>,
    grid: (usize, usize),
    opts: &TvOptions,
) -> Result<ReconResult> {
    let (nx, ny) = grid;
    let l = q.ncols();
    if nx * ny != l {
        return Err(Error::DimensionMismatch {
            what: "grid pixels vs operator columns",
            expected: l,
            found: nx * ny,
        });
    }
    if m.len() != q.nrows() {
        return Err(Error::DimensionMismatch {
            what: "measurement length vs operator rows",
            expected: q.nrows(),
            found: m.len(),
        });
    }
    if !(opts.reg_mu > 0.0 && opts.beta > 0.0) {
        return Err(invalid("reg_mu and beta must be positive"));
    }
    let scale2 = q.col_norms.norm_squared() / l as f64;
    if scale2 == 0.0 {
        return Err(invalid("operator is identically zero"));
    }
    let normal = q.normal_matrix() / scale2;
    let atb = q.apply_transpose(m) / scale2;
    let btb = m.norm_squared() / scale2;
    let grad = Grad { nx, ny };
    let sys = System {
        normal: &normal,
        grad: &grad,
        mu: opts.reg_mu,
        beta: opts.beta,
    };
    let objective = |f: &DVector<f64>| {
        let data = f.dot(&(&normal * f)) - 2.0 * f.dot(&atb) + btb;
        grad.tv(f.as_slice()) + 0.5 * opts.reg_mu * data.max(0.0)
    };

    let chol = match opts.inner {
        InnerSolver::Cholesky => Some(
            Cholesky::new(sys.dense()).ok_or_else(|| invalid("TV system is not positive definite"))?,
        ),
        InnerSolver::Cg => None,
    };
    let precond = DVector::from_fn(l, |i, _| {
        let d = opts.reg_mu * normal[(i, i)] + opts.beta * grad.degree(i);
        if d > 0.0 { 1.0 / d } else { 1.0 }
    });

    let mut f = DVector::zeros(l);
    let mut zx = vec![0.0; l];
    let mut zy = vec![0.0; l];
    let mut ux = vec![0.0; l];
    let mut uy = vec![0.0; l];
    let mut gx = vec![0.0; l];
    let mut gy = vec![0.0; l];
    let mut dt = vec![0.0; l];
    let mut history = Vec::new();
    let mut raw_history = Vec::new();
    let mut best = (objective(&f), f.clone());
    let mut converged = false;
    let mut iters = 0;
    let shrink = 1.0 / opts.beta;

    while iters < opts.max_iter {
        iters += 1;
        let wx: Vec<f64> = zx.iter().zip(&ux).map(|(z, u)| z - u).collect();
        let wy: Vec<f64> = zy.iter().zip(&uy).map(|(z, u)| z - u).collect();
        grad.adjoint(&wx, &wy, &mut dt);
        let rhs = DVector::from_fn(l, |i, _| opts.reg_mu * atb[i] + opts.beta * dt[i]);
        let prev = f.clone();
        match &chol {
            Some(c) => f = c.solve(&rhs),
            None => {
                cg(&sys, &rhs, &mut f, &precond, opts.cg_tol, opts.cg_max_iter);
            }
        }

        grad.apply(f.as_slice(), &mut gx, &mut gy);
        for i in 0..l {
            let vx = gx[i] + ux[i];
            let vy = gy[i] + uy[i];
            let mag = vx.hypot(vy);
            let k = if mag > shrink { 1.0 - shrink / mag } else { 0.0 };
            zx[i] = k * vx;
            zy[i] = k * vy;
            ux[i] = vx - zx[i];
            uy[i] = vy - zy[i];
        }

        let j = objective(&f);
        raw_history.push(j);
        if j <= best.0 {
            best = (j, f.clone());
        }
        history.push(best.0);
        let change = (&f - &prev).norm() / f.norm().max(f64::MIN_POSITIVE);
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let f_hat = best.1.map(|v| v.clamp(0.0, 1.0));
    let residual_norm = (q.apply(&f_hat) - m).norm();
    Ok(ReconResult {
        f_hat,
        solver_iters: iters,
        residual_norm,
        converged,
        objective: history,
        raw_objective: raw_history,
    })
}
