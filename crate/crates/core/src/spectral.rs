//! Dense spectral analysis of the two-grid approximation quality.
//!
//! Both the Hessian and the two-grid operator are represented by the
//! matrices of their bilinear forms, so the comparison is a symmetric
//! positive definite generalized eigenproblem; the raw operators (which
//! carry an inverse mass factor and are not symmetric as matrices) are never
//! eigendecomposed.

use crate::dense::Dense;
use crate::error::{Error, Result};
use crate::hessian::{b_h_dense, ControlParams, HessianOp};
use crate::hierarchy::Hierarchy;
use crate::lapack::{matmul, spectral_radius, sygv, Trans};
use crate::precond::Precond;
use serde::Serialize;

/// Above this pencil size eigenvectors are skipped and a values-only solver
/// is used; residual verification then happens only at smaller sizes.
pub const VECTOR_LIMIT: usize = 2500;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    /// Fine grid exponent: h = 2^-level.
    pub level: usize,
    pub params: ControlParams,
    /// Generalized eigenvalues of (B_H, B_T), ascending.
    pub eigenvalues: Vec<f64>,
    pub d_h: f64,
    pub d_tilde: f64,
    pub ratio_to_previous: Option<f64>,
}

/// Dense bilinear forms (B_H, B_T) of the Hessian and its two-grid
/// approximation at hierarchy index `fine` (coarse space one level below).
pub fn form_two_grid_dense(
    hier: &Hierarchy,
    fine: usize,
    params: ControlParams,
) -> Result<(Dense, Dense)> {
    if fine == 0 || fine >= hier.num_levels() {
        return Err(Error::Config(format!(
            "two-grid form needs a coarse level below index {fine}"
        )));
    }
    let lf = &hier.levels[fine];
    let lc = &hier.levels[fine - 1];
    let beta = params.beta;
    let b_hc = b_h_dense(lc, hier.grams(fine - 1), params)?;

    // R is the matrix of the L2 projector in coefficient form.
    let t1 = {
        let pd = hier.transfers[fine - 1].p.to_dense();
        lf.fe.mf.matmul_dense(&pd)
    };
    let r = {
        let rt = t1.transpose();
        lc.mf_lu.solve_dense(&rt)
    };
    let mut b_t = {
        let g1 = matmul(Trans::No, Trans::No, &b_hc, &r);
        matmul(Trans::Yes, Trans::No, &r, &g1)
    };
    let m2r = matmul(Trans::No, Trans::No, &t1, &r);
    drop(t1);
    drop(r);
    b_t.axpy(-beta, &m2r);
    drop(m2r);
    {
        let mfd = lf.fe.mf.to_dense();
        b_t.axpy(beta, &mfd);
    }
    b_t.symmetrize();
    let b_hf = b_h_dense(lf, hier.grams(fine), params)?;
    Ok((b_hf, b_t))
}

/// Generalized eigenvalues of the symmetric definite pencil B_H x = t B_T x,
/// ascending. Small pencils get eigenvectors and a residual verification;
/// large ones use a values-only two-stage solver.
pub fn joint_spectrum(b_h: Dense, b_t: Dense) -> Result<Vec<f64>> {
    let n = b_h.nrows;
    if b_t.nrows != n {
        return Err(Error::Dim {
            what: "pencil",
            expected: n,
            got: b_t.nrows,
        });
    }
    if n <= VECTOR_LIMIT {
        let b_h0 = b_h.clone();
        let b_t0 = b_t.clone();
        let mut a = b_h;
        let mut b = b_t;
        let eig = sygv(&mut a, &mut b, true)?;
        // Columns of `a` now hold eigenvectors; check residuals in bulk.
        let hx = matmul(Trans::No, Trans::No, &b_h0, &a);
        let tx = matmul(Trans::No, Trans::No, &b_t0, &a);
        let bh_norm = {
            let mut s = 0.0;
            for v in &b_h0.a {
                s += v * v;
            }
            s.sqrt()
        };
        for j in 0..n {
            let mut rr = 0.0;
            let mut xx = 0.0;
            for i in 0..n {
                let rij = hx.at(i, j) - eig[j] * tx.at(i, j);
                rr += rij * rij;
                xx += a.at(i, j) * a.at(i, j);
            }
            if rr.sqrt() > 1e-9 * bh_norm * xx.sqrt() {
                return Err(Error::Eigen(format!(
                    "eigenpair {j} residual {:.3e} exceeds bound",
                    rr.sqrt()
                )));
            }
        }
        validate_positive(&eig)?;
        Ok(eig)
    } else {
        let mut a = b_h;
        let mut b = b_t;
        let eig = sygv(&mut a, &mut b, false)?;
        validate_positive(&eig)?;
        Ok(eig)
    }
}

fn validate_positive(eig: &[f64]) -> Result<()> {
    if let Some(l) = eig.iter().find(|l| **l <= 0.0 || !l.is_finite()) {
        return Err(Error::Eigen(format!(
            "nonpositive generalized eigenvalue {l:.6e}; pencil not definite"
        )));
    }
    Ok(())
}

/// Largest |ln t| after dropping the k eigenvalues with the largest |ln t|.
pub fn filtered_distance(eigenvalues: &[f64], k: usize) -> Result<f64> {
    if k >= eigenvalues.len() {
        return Err(Error::FilterCount {
            k,
            count: eigenvalues.len(),
        });
    }
    let mut lns: Vec<f64> = eigenvalues.iter().map(|l| l.ln().abs()).collect();
    lns.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(lns[k..].iter().cloned().fold(0.0, f64::max))
}

pub fn spectral_distance(eigenvalues: &[f64]) -> Result<f64> {
    filtered_distance(eigenvalues, 0)
}

/// Full pipeline for one level pair; `previous_d` feeds the ratio column.
pub fn spectral_report(
    hier: &Hierarchy,
    fine: usize,
    params: ControlParams,
    filter_k: usize,
    previous_d: Option<f64>,
) -> Result<SpectralReport> {
    let (b_h, b_t) = form_two_grid_dense(hier, fine, params)?;
    let eigenvalues = joint_spectrum(b_h, b_t)?;
    let d_h = spectral_distance(&eigenvalues)?;
    let d_tilde = filtered_distance(&eigenvalues, filter_k)?;
    Ok(SpectralReport {
        level: hier.coarsest_ell + fine,
        params,
        eigenvalues,
        d_h,
        d_tilde,
        ratio_to_previous: previous_d.map(|p| p / d_h),
    })
}

/// Spectral radius of I - K H with the two-grid K, both densified
/// column-by-column through their matrix-free applications; feasible only at
/// coarse levels.
pub fn iteration_matrix_radius(
    hier: &Hierarchy,
    fine: usize,
    params: ControlParams,
) -> Result<f64> {
    let lf = &hier.levels[fine];
    let p = lf.p_dim();
    if p > crate::hessian::DENSE_GUARD {
        return Err(Error::SizeGuard {
            size: p,
            guard: crate::hessian::DENSE_GUARD,
        });
    }
    let pc = Precond::new(hier, fine, 2, params)?;
    let hop = HessianOp::new(lf, params)?;
    let mut m = Dense::zeros(p, p);
    let mut e = vec![0.0; p];
    for j in 0..p {
        e[j] = 1.0;
        let hj = hop.apply(&e)?;
        let kj = pc.apply(&hj)?;
        let col = m.col_mut(j);
        for i in 0..p {
            col[i] = -kj[i];
        }
        col[j] += 1.0;
        e[j] = 0.0;
    }
    spectral_radius(&mut m)
}
