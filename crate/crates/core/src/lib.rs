//! Tracking optimal control of the Stokes system with multilevel
//! preconditioning of the reduced Hessian.
//!
//! The library discretizes the unit square with Taylor-Hood elements
//! (biquadratic velocity, bilinear pressure), exposes the control-to-state
//! maps through a direct saddle-point factorization, applies the reduced
//! Hessian matrix-free, and accelerates conjugate gradients with two-grid
//! and recursive multigrid preconditioners built on the L2 hierarchy of
//! control spaces. A dense spectral lab measures how well the preconditioner
//! approximates the inverse Hessian, and the driver reproduces the
//! experiment families (joint spectra, iteration counts, data recovery,
//! timing, validation) at desk scale.

pub mod assemble;
pub mod dense;
pub mod driver;
pub mod error;
pub mod hessian;
pub mod hierarchy;
pub mod lapack;
pub mod mesh;
pub mod pcg;
pub mod precond;
pub mod quad;
pub mod recovery;
pub mod sparse;
pub mod spectral;
pub mod stokes;
pub mod targets;
pub mod transfer;

pub use error::{Error, Result};
pub use hessian::{ControlParams, HessianOp, DENSE_GUARD};
pub use hierarchy::{Grams, Hierarchy, Level};
pub use mesh::MeshLevel;
pub use pcg::{pcg, SolveReport};
pub use precond::{BaseInverse, Precond, PrecondKind};
pub use spectral::SpectralReport;
pub use stokes::{StokesSystem, Strategy};
