//! Thermomechanical finite element solver core.
//!
//! The crate is organised around the solution pipeline for coupled
//! thermoelastic problems on tetrahedral meshes:
//!
//! - [`mesh`]: tetrahedral mesh storage, box-mesh generation, uniform
//!   refinement and dihedral-angle quality analysis.
//! - [`fem`]: Lagrange P1/P2 function spaces, dof maps, quadrature and
//!   element kernels for the thermal and elastic weak forms.
//! - [`krylov`]: CSR sparse matrices, CG/BiCGSTAB solvers, smoothers,
//!   Dirichlet elimination and spectral estimation.
//! - [`amg`]: classical (Ruge-Stueben) and smoothed-aggregation algebraic
//!   multigrid preconditioners.
//! - [`sim`]: materials, boundary schedules, the nonlinear thermal solve,
//!   the one-way coupled elastic solve, and the adaptive transient loop.

pub mod amg;
pub mod error;
pub mod fem;
pub mod krylov;
pub mod mesh;
pub mod sim;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
