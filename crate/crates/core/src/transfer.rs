//! Grid transfer for the control space.
//!
//! Controls live in the full Q2 vector space, so prolongation is plain
//! biquadratic interpolation applied per component; no boundary filtering.
//! Restriction in the L2 sense (mass-weighted, used by the preconditioner)
//! is assembled on top of this matrix by the hierarchy, which owns the
//! coarse mass factorization.

use crate::mesh::MeshLevel;
use crate::quad::q2_shapes;
use crate::sparse::Csr;

pub struct TransferPair {
    /// Interpolation matrix, fine vector dofs by coarse vector dofs.
    pub p: Csr,
    pub fine_dofs: usize,
    pub coarse_dofs: usize,
}

/// 1D interpolation stencil: for each fine node, the coarse element it falls
/// in and the three coarse basis values there. Fine spacing is a quarter of
/// the coarse element, so the local coordinate runs over {0, 1/4, 1/2, 3/4, 1}.
fn stencil_1d(fine: &MeshLevel, coarse: &MeshLevel) -> Vec<(usize, [f64; 3])> {
    (0..fine.n2)
        .map(|fx| {
            let cex = (fx / 4).min(coarse.nc - 1);
            let xi = (fx - 4 * cex) as f64 / 4.0;
            (cex, q2_shapes(xi))
        })
        .collect()
}

impl TransferPair {
    pub fn new(fine: &MeshLevel, coarse: &MeshLevel) -> Self {
        assert_eq!(fine.ell, coarse.ell + 1);
        let sx = stencil_1d(fine, coarse);
        let fine_dofs = 2 * fine.nodes2;
        let coarse_dofs = 2 * coarse.nodes2;
        let mut trips = Vec::with_capacity(9 * fine.nodes2 * 2);
        for fy in 0..fine.n2 {
            let (cey, wy) = sx[fy];
            for fx in 0..fine.n2 {
                let (cex, wx) = sx[fx];
                let fnode = fy * fine.n2 + fx;
                for b in 0..3 {
                    for a in 0..3 {
                        let w = wx[a] * wy[b];
                        if w == 0.0 {
                            continue;
                        }
                        let cnode = (2 * cey + b) * coarse.n2 + (2 * cex + a);
                        trips.push((2 * fnode, 2 * cnode, w));
                        trips.push((2 * fnode + 1, 2 * cnode + 1, w));
                    }
                }
            }
        }
        let p = Csr::from_triplets(fine_dofs, coarse_dofs, &trips);
        Self {
            p,
            fine_dofs,
            coarse_dofs,
        }
    }

    pub fn prolong(&self, xc: &[f64]) -> Vec<f64> {
        self.p.matvec(xc)
    }

    pub fn restrict_transpose(&self, xf: &[f64]) -> Vec<f64> {
        self.p.matvec_transpose(xf)
    }
}
