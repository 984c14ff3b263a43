//! Matrix-free reduced Hessian and its dense bilinear form.

use crate::dense::Dense;
use crate::error::{Error, Result};
use crate::hierarchy::{Grams, Level};
use crate::lapack::{matmul, Trans};
use crate::targets::Targets;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

/// Unknown-count ceiling for dense materialization; a base grid of h = 2^-5
/// (8450 control dofs) fits comfortably, h = 2^-6 does not.
pub const DENSE_GUARD: usize = 25_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub beta: f64,
    pub gamma_u: f64,
    pub gamma_p: f64,
}

impl ControlParams {
    pub fn new(beta: f64, gamma_u: f64, gamma_p: f64) -> Result<Self> {
        let p = Self {
            beta,
            gamma_u,
            gamma_p,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.gamma_u < 0.0 || self.gamma_p < 0.0 {
            return Err(Error::Config("gamma weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Reduced Hessian beta I + M_f^{-1} L' S^{-1} M S^{-1} L as an operator on
/// control coefficients. Each apply costs exactly two Stokes solves and one
/// control-mass solve.
pub struct HessianOp<'a> {
    pub level: &'a Level,
    pub params: ControlParams,
    applies: AtomicU64,
}

impl<'a> HessianOp<'a> {
    pub fn new(level: &'a Level, params: ControlParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            level,
            params,
            applies: AtomicU64::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.level.p_dim()
    }

    pub fn apply_count(&self) -> u64 {
        self.applies.load(Ordering::Relaxed)
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let lv = self.level;
        if f.len() != self.dim() {
            return Err(Error::Dim {
                what: "hessian input",
                expected: self.dim(),
                got: f.len(),
            });
        }
        self.applies.fetch_add(1, Ordering::Relaxed);
        let m = lv.mesh.m;
        let yu = lv.fe.muf.matvec(f);
        let (zu, zp) = lv.stokes.solve(&yu, &vec![0.0; m]);
        let mut wu = lv.fe.mu.matvec(&zu);
        for v in &mut wu {
            *v *= self.params.gamma_u;
        }
        let mut wp = lv.fe.mp.matvec(&zp);
        for v in &mut wp {
            *v *= self.params.gamma_p;
        }
        let (vu, _) = lv.stokes.solve(&wu, &wp);
        let t = lv.fe.muf.matvec_transpose(&vu);
        let mut out = lv.mf_lu.solve_vec(&t);
        for (o, fi) in out.iter_mut().zip(f) {
            *o += self.params.beta * fi;
        }
        Ok(out)
    }

    /// Right-hand side of the reduced optimality system for the given
    /// targets; independent of beta.
    pub fn build_rhs(&self, t: &Targets) -> Result<Vec<f64>> {
        let lv = self.level;
        if t.udh.len() != lv.mesh.n || t.pdh.len() != lv.mesh.m {
            return Err(Error::Dim {
                what: "target data",
                expected: lv.mesh.n + lv.mesh.m,
                got: t.udh.len() + t.pdh.len(),
            });
        }
        let mut fu = lv.fe.mu.matvec(&t.udh);
        for v in &mut fu {
            *v *= self.params.gamma_u;
        }
        let mut fp = lv.fe.mp.matvec(&t.pdh);
        for v in &mut fp {
            *v *= self.params.gamma_p;
        }
        let (vu, _) = lv.stokes.solve(&fu, &fp);
        Ok(lv.mf_lu.solve_vec(&lv.fe.muf.matvec_transpose(&vu)))
    }

    /// Dense symmetric pair (B_H, M_f) of the quadratic form behind this
    /// operator: B_H = beta M_f + gamma_u X_u + gamma_p X_p.
    pub fn materialize_dense(&self, grams: &Grams) -> Result<(Dense, Dense)> {
        let b_h = b_h_dense(self.level, grams, self.params)?;
        Ok((b_h, self.level.fe.mf.to_dense()))
    }
}

/// Dense bilinear form of the Hessian assembled from cached Grams.
pub fn b_h_dense(level: &Level, grams: &Grams, params: ControlParams) -> Result<Dense> {
    params.validate()?;
    let p = level.p_dim();
    if p > DENSE_GUARD {
        return Err(Error::SizeGuard {
            size: p,
            guard: DENSE_GUARD,
        });
    }
    let mut b = level.fe.mf.to_dense();
    b.scale(params.beta);
    b.axpy(params.gamma_u, &grams.xu);
    b.axpy(params.gamma_p, &grams.xp);
    b.symmetrize();
    Ok(b)
}

/// Control-space Gram matrices of the velocity and pressure tracking terms,
/// from one batched multi-RHS Stokes sweep over the control basis.
pub fn compute_grams(level: &Level) -> Grams {
    let p = level.p_dim();
    let (n, m) = (level.mesh.n, level.mesh.m);
    let nred = n + m - 1;
    let chunk = 512usize;

    let mut z = Dense::zeros(nred, p);
    let mut p_pin = vec![0.0; p];
    let mut c0 = 0;
    while c0 < p {
        let k = chunk.min(p - c0);
        let mut b1 = Dense::zeros(nred, k);
        for r in 0..n {
            let (cols, vals) = level.fe.muf.row(r);
            for (c, v) in cols.iter().zip(vals) {
                if *c >= c0 && *c < c0 + k {
                    *b1.at_mut(r, c - c0) = *v;
                }
            }
        }
        let (zc, pp) = level.stokes.solve_multi(b1, &vec![0.0; k]);
        for j in 0..k {
            z.set_col(c0 + j, zc.col(j));
            p_pin[c0 + j] = pp[j];
        }
        c0 += k;
    }

    let mut zu = Dense::zeros(n, p);
    let mut zp = Dense::zeros(m, p);
    for j in 0..p {
        let zc = z.col(j);
        zu.col_mut(j).copy_from_slice(&zc[..n]);
        let pc = zp.col_mut(j);
        pc[0] = p_pin[j];
        pc[1..].copy_from_slice(&zc[n..]);
    }
    drop(z);

    let wu = level.fe.mu.matmul_dense(&zu);
    let mut xu = matmul(Trans::Yes, Trans::No, &zu, &wu);
    xu.symmetrize();
    drop(zu);
    let wp = level.fe.mp.matmul_dense(&zp);
    let mut xp = matmul(Trans::Yes, Trans::No, &zp, &wp);
    xp.symmetrize();
    Grams { xu, xp }
}
