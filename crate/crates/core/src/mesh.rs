//! Nested uniform quadrilateral meshes on the unit square.
//!
//! Level `ell` has `2^ell` cells per side. Velocity nodes live on the
//! biquadratic grid (N2 per side), pressure nodes on the bilinear grid
//! (N1 per side). Node numbering is lexicographic, `iy * N + ix`, and a
//! vector degree of freedom is `2 * node + component`. Interior velocity
//! dofs keep that relative order.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MeshLevel {
    pub ell: usize,
    /// Cells per side.
    pub nc: usize,
    pub h: f64,
    /// Q2 nodes per side.
    pub n2: usize,
    /// Q1 nodes per side.
    pub n1: usize,
    /// Total Q2 nodes.
    pub nodes2: usize,
    /// Total Q1 nodes (= pressure dimension m).
    pub m: usize,
    /// Full vector dofs (= control dimension p).
    pub p: usize,
    /// Interior vector dofs (= state dimension n).
    pub n: usize,
    /// Per Q2 node: does it lie strictly inside the domain?
    pub interior: Vec<bool>,
    /// Interior vector dof index -> full vector dof index.
    pub int_vec: Vec<usize>,
    /// Full vector dof index -> interior index, or usize::MAX on the boundary.
    pub full_to_int: Vec<usize>,
}

impl MeshLevel {
    pub fn new(ell: usize) -> Self {
        let nc = 1usize << ell;
        let n2 = 2 * nc + 1;
        let n1 = nc + 1;
        let nodes2 = n2 * n2;
        let m = n1 * n1;
        let p = 2 * nodes2;

        let mut interior = vec![false; nodes2];
        for iy in 0..n2 {
            for ix in 0..n2 {
                interior[iy * n2 + ix] = ix > 0 && ix < n2 - 1 && iy > 0 && iy < n2 - 1;
            }
        }

        let mut int_vec = Vec::new();
        let mut full_to_int = vec![usize::MAX; p];
        for node in 0..nodes2 {
            if interior[node] {
                for comp in 0..2 {
                    full_to_int[2 * node + comp] = int_vec.len();
                    int_vec.push(2 * node + comp);
                }
            }
        }
        let n = int_vec.len();

        Self {
            ell,
            nc,
            h: 1.0 / nc as f64,
            n2,
            n1,
            nodes2,
            m,
            p,
            n,
            interior,
            int_vec,
            full_to_int,
        }
    }

    /// Coordinates of a Q2 node.
    pub fn q2_coord(&self, node: usize) -> (f64, f64) {
        let step = 0.5 * self.h;
        ((node % self.n2) as f64 * step, (node / self.n2) as f64 * step)
    }

    /// Coordinates of a Q1 node.
    pub fn q1_coord(&self, node: usize) -> (f64, f64) {
        ((node % self.n1) as f64 * self.h, (node / self.n1) as f64 * self.h)
    }
}

/// Meshes for levels `coarsest..=finest`, coarsest first.
pub fn build_hierarchy(coarsest: usize, finest: usize) -> Result<Vec<MeshLevel>> {
    if !(1..=8).contains(&coarsest) || !(1..=8).contains(&finest) || coarsest > finest {
        return Err(Error::Config(format!(
            "level range {coarsest}..={finest} outside 1..=8"
        )));
    }
    Ok((coarsest..=finest).map(MeshLevel::new).collect())
}
