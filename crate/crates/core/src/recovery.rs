//! Quadrature evaluation of recovered states against the analytic targets.

use crate::hierarchy::Level;
use crate::mesh::MeshLevel;
use crate::quad::{gauss, q1_shapes, q2_shapes};
use crate::stokes::Strategy;
use crate::targets::{p_d, u_d};

/// Relative continuous L2 error of a Q2 vector field (full coefficient
/// vector, interleaved components) against an analytic field.
pub fn velocity_error_l2(
    lv: &MeshLevel,
    u_full: &[f64],
    exact: &dyn Fn(f64, f64) -> [f64; 2],
    nq: usize,
) -> f64 {
    assert_eq!(u_full.len(), 2 * lv.nodes2);
    let rule = gauss(nq);
    let h = lv.h;
    let mut e2 = 0.0;
    let mut n2 = 0.0;
    for ey in 0..lv.nc {
        for ex in 0..lv.nc {
            for &(gy, wy) in &rule {
                let phy = q2_shapes(gy);
                let yq = (ey as f64 + gy) * h;
                for &(gx, wx) in &rule {
                    let phx = q2_shapes(gx);
                    let xq = (ex as f64 + gx) * h;
                    let w = wx * wy * h * h;
                    let mut uh = [0.0; 2];
                    for b in 0..3 {
                        for a in 0..3 {
                            let g = (2 * ey + b) * lv.n2 + (2 * ex + a);
                            let phi = phx[a] * phy[b];
                            uh[0] += phi * u_full[2 * g];
                            uh[1] += phi * u_full[2 * g + 1];
                        }
                    }
                    let ex_v = exact(xq, yq);
                    e2 += w * ((uh[0] - ex_v[0]).powi(2) + (uh[1] - ex_v[1]).powi(2));
                    n2 += w * (ex_v[0] * ex_v[0] + ex_v[1] * ex_v[1]);
                }
            }
        }
    }
    (e2 / n2).sqrt()
}

/// Relative continuous L2 error of a Q1 scalar field against an analytic one.
pub fn pressure_error_l2(
    lv: &MeshLevel,
    p: &[f64],
    exact: &dyn Fn(f64, f64) -> f64,
    nq: usize,
) -> f64 {
    assert_eq!(p.len(), lv.m);
    let rule = gauss(nq);
    let h = lv.h;
    let mut e2 = 0.0;
    let mut n2 = 0.0;
    for ey in 0..lv.nc {
        for ex in 0..lv.nc {
            for &(gy, wy) in &rule {
                let phy = q1_shapes(gy);
                let yq = (ey as f64 + gy) * h;
                for &(gx, wx) in &rule {
                    let phx = q1_shapes(gx);
                    let xq = (ex as f64 + gx) * h;
                    let w = wx * wy * h * h;
                    let mut ph = 0.0;
                    for b in 0..2 {
                        for a in 0..2 {
                            ph += phx[a] * phy[b] * p[(ey + b) * lv.n1 + (ex + a)];
                        }
                    }
                    let ev = exact(xq, yq);
                    e2 += w * (ph - ev) * (ph - ev);
                    n2 += w * ev * ev;
                }
            }
        }
    }
    (e2 / n2).sqrt()
}

/// Embed interior vector dofs into the full coefficient vector.
pub fn embed_interior(lv: &MeshLevel, u_int: &[f64]) -> Vec<f64> {
    assert_eq!(u_int.len(), lv.n);
    let mut full = vec![0.0; 2 * lv.nodes2];
    for (i, &gi) in lv.int_vec.iter().enumerate() {
        full[gi] = u_int[i];
    }
    full
}

/// Relative recovery errors (E_u, E_p) of the state driven by a computed
/// control. The pressure comparison uses the analytic target's representative
/// in the gauge of the solve: unshifted for the zero-mean strategy, shifted
/// to vanish at the pinned corner otherwise.
pub fn recovery_errors(level: &Level, f_min: &[f64]) -> (f64, f64) {
    let (u_int, p_raw) = level.solve_forward_raw(f_min);
    let u_full = embed_interior(&level.mesh, &u_int);
    let e_u = velocity_error_l2(&level.mesh, &u_full, &u_d, 4);
    let e_p = match level.stokes.strategy {
        Strategy::ZeroMeanAugmented => pressure_error_l2(&level.mesh, &p_raw, &p_d, 4),
        Strategy::PinnedNode => {
            pressure_error_l2(&level.mesh, &p_raw, &|x, y| p_d(x, y) - 1.0, 4)
        }
    };
    (e_u, e_p)
}
