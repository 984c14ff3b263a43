//! Analytic targets, manufactured force, moment vectors and L2 projections.

use crate::assemble::FeMatrices;
use crate::mesh::MeshLevel;
use crate::quad::{gauss, q1_shapes, q2_shapes};
use crate::stokes::{SparseLu, Strategy};
use std::f64::consts::PI;

/// Divergence-free target velocity, zero on the boundary of the unit square.
pub fn u_d(x: f64, y: f64) -> [f64; 2] {
    [
        -2.0 * x * x * y * (1.0 - x) * (1.0 - x) * (1.0 - 3.0 * y + 2.0 * y * y),
        2.0 * x * y * y * (1.0 - y) * (1.0 - y) * (1.0 - 3.0 * x + 2.0 * x * x),
    ]
}

/// Target pressure; has zero mean over the unit square.
pub fn p_d(x: f64, y: f64) -> f64 {
    (PI * x).cos() * (PI * y).cos()
}

/// Body force for which (u_d, p_d) solves the Stokes system:
/// f = -laplace(u_d) + grad(p_d).
pub fn mms_force(x: f64, y: f64) -> [f64; 2] {
    let sx = (PI * x).sin();
    let cx = (PI * x).cos();
    let sy = (PI * y).sin();
    let cy = (PI * y).cos();
    let lap1 = 4.0
        * (2.0 * y - 1.0)
        * (3.0 * x * x * (1.0 - x) * (1.0 - x)
            + y * (y - 1.0) * (6.0 * x * x - 6.0 * x + 1.0));
    let lap2 = -4.0
        * (2.0 * x - 1.0)
        * (3.0 * y * y * (1.0 - y) * (1.0 - y)
            + x * (x - 1.0) * (6.0 * y * y - 6.0 * y + 1.0));
    [lap1 - PI * sx * cy, lap2 - PI * cx * sy]
}

/// Load vector of a vector-valued function against the full Q2 basis,
/// interleaved components, length 2 * nodes2.
pub fn velocity_moments(
    lv: &MeshLevel,
    nq: usize,
    f: &dyn Fn(f64, f64) -> [f64; 2],
) -> Vec<f64> {
    let rule = gauss(nq);
    let mut out = vec![0.0; 2 * lv.nodes2];
    let h = lv.h;
    for ey in 0..lv.nc {
        for ex in 0..lv.nc {
            for &(gy, wy) in &rule {
                let phy = q2_shapes(gy);
                let yq = (ey as f64 + gy) * h;
                for &(gx, wx) in &rule {
                    let phx = q2_shapes(gx);
                    let xq = (ex as f64 + gx) * h;
                    let w = wx * wy * h * h;
                    let fv = f(xq, yq);
                    for b in 0..3 {
                        for a in 0..3 {
                            let g = (2 * ey + b) * lv.n2 + (2 * ex + a);
                            let phi = phx[a] * phy[b];
                            out[2 * g] += w * phi * fv[0];
                            out[2 * g + 1] += w * phi * fv[1];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Load vector of a scalar function against the Q1 pressure basis, length m.
pub fn pressure_moments(lv: &MeshLevel, nq: usize, g: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    let rule = gauss(nq);
    let mut out = vec![0.0; lv.m];
    let h = lv.h;
    for ey in 0..lv.nc {
        for ex in 0..lv.nc {
            for &(gy, wy) in &rule {
                let phy = q1_shapes(gy);
                let yq = (ey as f64 + gy) * h;
                for &(gx, wx) in &rule {
                    let phx = q1_shapes(gx);
                    let xq = (ex as f64 + gx) * h;
                    let w = wx * wy * h * h;
                    let gv = g(xq, yq);
                    for b in 0..2 {
                        for a in 0..2 {
                            let gl = (ey + b) * lv.n1 + (ex + a);
                            out[gl] += w * phx[a] * phy[b] * gv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// L2 projection onto the full Q2 vector space (boundary nodes included).
pub fn project_velocity(
    lv: &MeshLevel,
    mf_lu: &SparseLu,
    nq: usize,
    f: &dyn Fn(f64, f64) -> [f64; 2],
) -> Vec<f64> {
    mf_lu.solve_vec(&velocity_moments(lv, nq, f))
}

/// L2 projection onto Q1, shifted to zero weighted mean.
pub fn project_pressure(
    lv: &MeshLevel,
    fe: &FeMatrices,
    mp_lu: &SparseLu,
    nq: usize,
    g: &dyn Fn(f64, f64) -> f64,
) -> Vec<f64> {
    let mut q = mp_lu.solve_vec(&pressure_moments(lv, nq, g));
    let mean: f64 = fe.mean_vector.iter().zip(&q).map(|(c, v)| c * v).sum();
    for v in &mut q {
        *v -= mean;
    }
    q
}

pub struct Targets {
    /// Interior-dof restriction of the projected target velocity, length n.
    pub udh: Vec<f64>,
    /// Projected target pressure in the strategy's gauge, length m.
    pub pdh: Vec<f64>,
}

/// Discrete tracking targets used by the control problem. The velocity target
/// is the interior restriction of the full-space projection; the pressure
/// target carries the gauge of the solve strategy so that tracked and
/// computed pressures live in the same affine slice.
pub fn targets_for(
    lv: &MeshLevel,
    fe: &FeMatrices,
    mf_lu: &SparseLu,
    mp_lu: &SparseLu,
    strategy: Strategy,
) -> Targets {
    let ud_full = project_velocity(lv, mf_lu, 4, &u_d);
    let udh: Vec<f64> = lv.int_vec.iter().map(|&i| ud_full[i]).collect();
    let mut pdh = project_pressure(lv, fe, mp_lu, 4, &p_d);
    if strategy == Strategy::PinnedNode {
        let shift = pdh[0];
        for v in &mut pdh {
            *v -= shift;
        }
    }
    Targets { udh, pdh }
}
