//! Per-level assembled state and the multilevel container.

use crate::assemble::{assemble, FeMatrices};
use crate::error::{Error, Result};
use crate::mesh::{build_hierarchy, MeshLevel};
use crate::stokes::{SparseLu, StokesSystem, Strategy};
use crate::targets::{targets_for, Targets};
use crate::transfer::TransferPair;
use std::sync::OnceLock;

/// Everything owned by one grid: mesh, FE matrices, mass factorizations and
/// the factorized Stokes system.
pub struct Level {
    pub mesh: MeshLevel,
    pub fe: FeMatrices,
    pub mf_lu: SparseLu,
    pub mp_lu: SparseLu,
    pub stokes: StokesSystem,
    targets: OnceLock<Targets>,
}

impl Level {
    pub fn build(ell: usize, strategy: Strategy) -> Result<Self> {
        let mesh = MeshLevel::new(ell);
        let fe = assemble(&mesh);
        let mf_lu = SparseLu::new(&fe.mf)?;
        let mp_lu = SparseLu::new(&fe.mp)?;
        let stokes = StokesSystem::factorize(&mesh, &fe, strategy)?;
        Ok(Self {
            mesh,
            fe,
            mf_lu,
            mp_lu,
            stokes,
            targets: OnceLock::new(),
        })
    }

    /// Control-space dimension (all Q2 nodes, two components).
    pub fn p_dim(&self) -> usize {
        2 * self.mesh.nodes2
    }

    /// Tracking targets in this level's gauge, computed once.
    pub fn targets(&self) -> &Targets {
        self.targets.get_or_init(|| {
            targets_for(
                &self.mesh,
                &self.fe,
                &self.mf_lu,
                &self.mp_lu,
                self.stokes.strategy,
            )
        })
    }

    /// Forward map f -> (u, p) with the raw strategy gauge on p.
    pub fn solve_forward_raw(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(f.len(), self.p_dim());
        let yu = self.fe.muf.matvec(f);
        self.stokes.solve(&yu, &vec![0.0; self.mesh.m])
    }

    fn zero_mean(&self, p: &mut [f64]) {
        let mean: f64 = self.fe.mean_vector.iter().zip(p.iter()).map(|(c, v)| c * v).sum();
        for v in p.iter_mut() {
            *v -= mean;
        }
    }

    /// Discrete solution operator for the velocity block.
    pub fn apply_u(&self, f: &[f64]) -> Vec<f64> {
        self.solve_forward_raw(f).0
    }

    /// Discrete solution operator for the pressure block, always reported
    /// with zero discrete mean regardless of strategy.
    pub fn apply_p(&self, f: &[f64]) -> Vec<f64> {
        let (_, mut p) = self.solve_forward_raw(f);
        self.zero_mean(&mut p);
        p
    }

    /// Adjoint of apply_u between the M_u and M_f inner products.
    pub fn apply_u_adjoint(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.mesh.n);
        let bu = self.fe.mu.matvec(g);
        let (w, _) = self.stokes.solve(&bu, &vec![0.0; self.mesh.m]);
        self.mf_lu.solve_vec(&self.fe.muf.matvec_transpose(&w))
    }

    /// Adjoint of apply_p; the input is projected to zero mean first, since
    /// only that component is observable through a zero-mean pressure.
    pub fn apply_p_adjoint(&self, q: &[f64]) -> Vec<f64> {
        assert_eq!(q.len(), self.mesh.m);
        let mut q0 = q.to_vec();
        self.zero_mean(&mut q0);
        let bp = self.fe.mp.matvec(&q0);
        let (w, _) = self.stokes.solve(&vec![0.0; self.mesh.n], &bp);
        self.mf_lu.solve_vec(&self.fe.muf.matvec_transpose(&w))
    }
}

/// Cached control-space Gram matrices of the two tracking terms:
/// xu[i][j] = (U e_i, U e_j)_{M_u}, xp likewise with P and M_p. Together with
/// the mass matrix they give the dense bilinear form of the Hessian at any
/// (beta, gamma) without further solves.
pub struct Grams {
    pub xu: crate::dense::Dense,
    pub xp: crate::dense::Dense,
}

pub struct Hierarchy {
    pub levels: Vec<Level>,
    /// transfers[i] connects levels[i] (coarse) to levels[i+1] (fine).
    pub transfers: Vec<TransferPair>,
    pub strategy: Strategy,
    pub coarsest_ell: usize,
    grams: Vec<OnceLock<Grams>>,
}

impl Hierarchy {
    pub fn build(coarsest_ell: usize, finest_ell: usize, strategy: Strategy) -> Result<Self> {
        let meshes = build_hierarchy(coarsest_ell, finest_ell)?;
        let mut levels = Vec::with_capacity(meshes.len());
        for m in &meshes {
            levels.push(Level::build(m.ell, strategy)?);
        }
        let mut transfers = Vec::new();
        for i in 1..levels.len() {
            transfers.push(TransferPair::new(&levels[i].mesh, &levels[i - 1].mesh));
        }
        let grams = (0..levels.len()).map(|_| OnceLock::new()).collect();
        Ok(Self {
            levels,
            transfers,
            strategy,
            coarsest_ell,
            grams,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn idx(&self, ell: usize) -> Result<usize> {
        if ell < self.coarsest_ell || ell >= self.coarsest_ell + self.levels.len() {
            return Err(Error::Config(format!(
                "level {ell} outside hierarchy {}..{}",
                self.coarsest_ell,
                self.coarsest_ell + self.levels.len() - 1
            )));
        }
        Ok(ell - self.coarsest_ell)
    }

    /// Interpolate a control from levels[i] up to levels[i+1].
    pub fn prolong(&self, i_coarse: usize, xc: &[f64]) -> Vec<f64> {
        self.transfers[i_coarse].prolong(xc)
    }

    /// L2-orthogonal projection of a fine control at levels[i+1] onto the
    /// coarse space of levels[i].
    pub fn project_to_coarse(&self, i_coarse: usize, xf: &[f64]) -> Vec<f64> {
        let t = self.levels[i_coarse + 1].fe.mf.matvec(xf);
        let s = self.transfers[i_coarse].restrict_transpose(&t);
        self.levels[i_coarse].mf_lu.solve_vec(&s)
    }

    /// Gram matrices at a level, computed on first use and cached.
    pub fn grams(&self, i: usize) -> &Grams {
        self.grams[i].get_or_init(|| crate::hessian::compute_grams(&self.levels[i]))
    }

    pub fn grams_ready(&self, i: usize) -> bool {
        self.grams[i].get().is_some()
    }
}
