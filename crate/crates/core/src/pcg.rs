//! Preconditioned conjugate gradient with all inner products weighted by the
//! control mass matrix, the unique inner product in which both the reduced
//! Hessian and the multilevel preconditioner are self-adjoint.

use crate::error::{Error, Result};
use crate::sparse::Csr;
use serde::Serialize;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub f_min: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub wall_time: f64,
    /// Stokes solves at the solve level consumed while iterating (right-hand
    /// side construction not included).
    pub stokes_solves: u64,
    pub base_solves: u64,
    /// Matrix-free Hessian applies per hierarchy level inside the
    /// preconditioner, coarsest first.
    pub precond_hessian_applies: Vec<u64>,
}

/// Run PCG on H f = b. `apply_h` and `apply_k` must be self-adjoint positive
/// definite in the M_f inner product. Reports the iterate with the smallest
/// relative M_f-residual; for converged runs that is the final one.
pub fn pcg(
    apply_h: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    apply_k: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    mf: &Csr,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    pcg_observed(apply_h, apply_k, mf, b, tol, max_iter, &mut |_, _| {})
}

/// PCG with a per-iteration observer receiving (iteration, current iterate);
/// the solver itself is unaffected.
pub fn pcg_observed(
    apply_h: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    apply_k: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    mf: &Csr,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> Result<SolveReport> {
    let start = std::time::Instant::now();
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let nr0 = mf.norm(&r);
    if !nr0.is_finite() {
        return Err(Error::NonFinite("right-hand side"));
    }
    let mut history = Vec::new();
    if nr0 == 0.0 {
        return Ok(SolveReport {
            f_min: x,
            iterations: 0,
            residual_history: history,
            converged: true,
            wall_time: start.elapsed().as_secs_f64(),
            stokes_solves: 0,
            base_solves: 0,
            precond_hessian_applies: Vec::new(),
        });
    }
    let mut z = apply_k(&r)?;
    let mut p = z.clone();
    let mut rz = mf.inner(&r, &z);
    let mut converged = false;
    let mut best = (f64::INFINITY, x.clone());
    for it in 1..=max_iter {
        let q = apply_h(&p)?;
        let pq = mf.inner(&p, &q);
        if !pq.is_finite() {
            return Err(Error::NonFinite("curvature p' M_f H p"));
        }
        if pq <= 0.0 {
            return Err(Error::NegativeCurvature(pq));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rel = mf.norm(&r) / nr0;
        if !rel.is_finite() {
            return Err(Error::NonFinite("residual norm"));
        }
        history.push(rel);
        observer(it, &x);
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= tol {
            converged = true;
            break;
        }
        z = apply_k(&r)?;
        let rz_new = mf.inner(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(SolveReport {
        iterations: history.len(),
        f_min: best.1,
        residual_history: history,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        stokes_solves: 0,
        base_solves: 0,
        precond_hessian_applies: Vec::new(),
    })
}
