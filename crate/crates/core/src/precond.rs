//! Two-grid and recursive multigrid preconditioners on the control space.
//!
//! The recursion has three branches. At the base grid the inverse Hessian is
//! applied exactly through a stored dense Cholesky factorization of its
//! bilinear form. At intermediate grids the coarse preconditioner is lifted
//! by the coarse-grid map G and then sharpened by one Newton step N, which
//! costs one matrix-free Hessian apply at that grid. At the finest grid only
//! the lift G is applied, so no Hessian apply ever happens at the finest
//! level inside the preconditioner.

use crate::error::{Error, Result};
use crate::hessian::{b_h_dense, ControlParams, HessianOp};
use crate::hierarchy::{Grams, Hierarchy, Level};
use crate::lapack::{potrf, potrs_vec};
use crate::sparse::Csr;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecondKind {
    Identity,
    TwoGrid,
    Multigrid,
}

/// Exact inverse of the Hessian at one grid, stored as a Cholesky
/// factorization of the bilinear form B_H; applying it solves B_H x = M_f r.
pub struct BaseInverse {
    chol: crate::dense::Dense,
    pub dim: usize,
}

impl BaseInverse {
    pub fn new(level: &Level, grams: &Grams, params: ControlParams) -> Result<Self> {
        let mut b_h = b_h_dense(level, grams, params)?;
        potrf(&mut b_h)?;
        Ok(Self {
            dim: level.p_dim(),
            chol: b_h,
        })
    }

    pub fn apply(&self, mf: &Csr, r: &[f64]) -> Vec<f64> {
        potrs_vec(&self.chol, &mf.matvec(r))
    }
}

/// Lift of a coarse operator to the fine grid:
/// G(T) r = prolong(T project(r)) + (r - prolong(project(r))) / beta.
pub fn g_map(
    hier: &Hierarchy,
    i_coarse: usize,
    beta: f64,
    t_coarse: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    r: &[f64],
) -> Vec<f64> {
    let pr = hier.project_to_coarse(i_coarse, r);
    let tc = t_coarse(&pr);
    let mut out = hier.prolong(i_coarse, &tc);
    let back = hier.prolong(i_coarse, &pr);
    for i in 0..out.len() {
        out[i] += (r[i] - back[i]) / beta;
    }
    out
}

/// One Newton sharpening step for an approximate inverse X of H:
/// N(X) r = 2 X r - X H (X r).
pub fn n_map(
    h_apply: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    x_apply: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    r: &[f64],
) -> Vec<f64> {
    let xr = x_apply(r);
    let hxr = h_apply(&xr);
    let xhxr = x_apply(&hxr);
    xr.iter().zip(&xhxr).map(|(a, b)| 2.0 * a - b).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrecondCounts {
    /// Matrix-free Hessian applies per hierarchy level index.
    pub hessian_applies: Vec<u64>,
    pub base_solves: u64,
}

pub struct Precond<'a> {
    pub kind: PrecondKind,
    pub num_levels: usize,
    pub params: ControlParams,
    hier: &'a Hierarchy,
    finest: usize,
    base: usize,
    base_inv: Option<BaseInverse>,
    h_counts: Vec<AtomicU64>,
    base_count: AtomicU64,
}

impl<'a> Precond<'a> {
    /// num_levels counts grids including the finest; 1 means plain CG
    /// (identity preconditioner), so the base grid sits num_levels - 1
    /// coarsenings below the finest.
    pub fn new(
        hier: &'a Hierarchy,
        finest: usize,
        num_levels: usize,
        params: ControlParams,
    ) -> Result<Self> {
        params.validate()?;
        if num_levels == 0 {
            return Err(Error::Config("num_levels must be at least 1".into()));
        }
        if finest >= hier.num_levels() || num_levels > finest + 1 {
            return Err(Error::Config(format!(
                "num_levels {} does not fit below hierarchy index {}",
                num_levels, finest
            )));
        }
        let base = finest + 1 - num_levels;
        let kind = match num_levels {
            1 => PrecondKind::Identity,
            2 => PrecondKind::TwoGrid,
            _ => PrecondKind::Multigrid,
        };
        let base_inv = if num_levels == 1 {
            None
        } else {
            Some(BaseInverse::new(
                &hier.levels[base],
                hier.grams(base),
                params,
            )?)
        };
        Ok(Self {
            kind,
            num_levels,
            params,
            hier,
            finest,
            base,
            base_inv,
            h_counts: (0..hier.num_levels()).map(|_| AtomicU64::new(0)).collect(),
            base_count: AtomicU64::new(0),
        })
    }

    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.hier.levels[self.finest].p_dim() {
            return Err(Error::Dim {
                what: "preconditioner input",
                expected: self.hier.levels[self.finest].p_dim(),
                got: r.len(),
            });
        }
        Ok(self.k_apply(self.finest, r))
    }

    /// The two-grid operator written out directly, bypassing the recursion;
    /// used to pin down that the two-level recursion collapses to it.
    pub fn apply_two_grid(&self, r: &[f64]) -> Result<Vec<f64>> {
        if self.num_levels != 2 {
            return Err(Error::Config(
                "two-grid form requires exactly two levels".into(),
            ));
        }
        let base_inv = self.base_inv.as_ref().unwrap();
        let pair = self.finest - 1;
        let pr = self.hier.project_to_coarse(pair, r);
        self.base_count.fetch_add(1, Ordering::Relaxed);
        let tc = base_inv.apply(&self.hier.levels[self.base].fe.mf, &pr);
        let mut out = self.hier.prolong(pair, &tc);
        let back = self.hier.prolong(pair, &pr);
        for i in 0..out.len() {
            out[i] += (r[i] - back[i]) / self.params.beta;
        }
        Ok(out)
    }

    fn k_apply(&self, i: usize, r: &[f64]) -> Vec<f64> {
        if i == self.base {
            match &self.base_inv {
                None => r.to_vec(),
                Some(inv) => {
                    self.base_count.fetch_add(1, Ordering::Relaxed);
                    inv.apply(&self.hier.levels[i].fe.mf, r)
                }
            }
        } else if i == self.finest {
            self.x_apply(i, r)
        } else {
            let xr = self.x_apply(i, r);
            self.h_counts[i].fetch_add(1, Ordering::Relaxed);
            let hop = HessianOp::new(&self.hier.levels[i], self.params).unwrap();
            let hxr = hop.apply(&xr).unwrap();
            let xhxr = self.x_apply(i, &hxr);
            xr.iter().zip(&xhxr).map(|(a, b)| 2.0 * a - b).collect()
        }
    }

    /// G applied to the coarser K, evaluated at level index i.
    fn x_apply(&self, i: usize, r: &[f64]) -> Vec<f64> {
        let pair = i - 1;
        let pr = self.hier.project_to_coarse(pair, r);
        let tc = self.k_apply(i - 1, &pr);
        let mut out = self.hier.prolong(pair, &tc);
        let back = self.hier.prolong(pair, &pr);
        for j in 0..out.len() {
            out[j] += (r[j] - back[j]) / self.params.beta;
        }
        out
    }

    pub fn counts(&self) -> PrecondCounts {
        PrecondCounts {
            hessian_applies: self.h_counts.iter().map(|c| c.load(Ordering::Relaxed)).collect(),
            base_solves: self.base_count.load(Ordering::Relaxed),
        }
    }

    pub fn reset_counts(&self) {
        for c in &self.h_counts {
            c.store(0, Ordering::Relaxed);
        }
        self.base_count.store(0, Ordering::Relaxed);
    }
}
