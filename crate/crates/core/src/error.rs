//! Error type shared by the solver modules.

use std::fmt;

/// Errors produced by mesh construction, assembly and the linear solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Mesh construction or validation failure.
    InvalidMesh(String),
    /// A cell whose volume is below the degeneracy tolerance.
    DegenerateCell { cell: usize, volume: f64 },
    /// Index out of range (cell, vertex, dof or facet).
    IndexOutOfRange { what: &'static str, index: usize, bound: usize },
    /// Operand dimensions do not match.
    DimensionMismatch { expected: usize, got: usize },
    /// Quadrature degree outside the supported set.
    UnsupportedDegree(usize),
    /// Elastic moduli outside the admissible range.
    InvalidModuli { young: f64, poisson: f64 },
    /// A matrix diagonal entry is zero where a smoother needs to divide by it.
    ZeroDiagonal(usize),
    /// Conflicting Dirichlet values prescribed for one dof.
    ConflictingConstraint { dof: usize, first: f64, second: f64 },
    /// AMG coarsening failed to shrink the problem.
    CoarseningStagnation { level: usize, fine: usize, coarse: usize },
    /// Near-nullspace block size or dimension mismatch.
    NullspaceMismatch(String),
    /// A spectral estimate that must be positive was not.
    NonPositiveEigenEstimate(f64),
    /// Material or schedule lookup failed.
    UnknownRegion(i32),
    /// Interpolated material property left the physically valid range.
    InvalidMaterialValue { what: &'static str, value: f64, temperature: f64 },
    /// Newton iteration failed to converge; carries the residual history.
    NewtonDiverged { iterations: usize, history: Vec<f64> },
    /// A Krylov solve failed (no convergence or breakdown).
    SolverFailure(String),
    /// The elastic system leaves rigid body modes unconstrained.
    UnconstrainedRigidModes(Vec<String>),
    /// Adaptive time stepping exhausted its halving retries.
    TimeStepRetriesExhausted { retries: usize, dt: f64 },
    /// Barycentric evaluation point lies outside the reference cell.
    PointOutsideCell([f64; 4]),
    /// Config or problem definition inconsistency.
    InvalidConfig(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidMesh(msg) => write!(f, "invalid mesh: {msg}"),
            Error::DegenerateCell { cell, volume } => {
                write!(f, "cell {cell} is degenerate (volume {volume:.3e})")
            }
            Error::IndexOutOfRange { what, index, bound } => {
                write!(f, "{what} index {index} out of range (< {bound})")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::UnsupportedDegree(d) => write!(f, "unsupported quadrature degree {d}"),
            Error::InvalidModuli { young, poisson } => {
                write!(f, "invalid elastic moduli: E = {young}, nu = {poisson}")
            }
            Error::ZeroDiagonal(i) => write!(f, "zero diagonal entry at row {i}"),
            Error::ConflictingConstraint { dof, first, second } => {
                write!(f, "dof {dof} constrained to both {first} and {second}")
            }
            Error::CoarseningStagnation { level, fine, coarse } => write!(
                f,
                "AMG coarsening stagnated at level {level}: {fine} -> {coarse} dofs"
            ),
            Error::NullspaceMismatch(msg) => write!(f, "near-nullspace mismatch: {msg}"),
            Error::NonPositiveEigenEstimate(v) => {
                write!(f, "eigenvalue estimate must be positive, got {v}")
            }
            Error::UnknownRegion(r) => write!(f, "unknown region id {r}"),
            Error::InvalidMaterialValue { what, value, temperature } => {
                write!(f, "{what} = {value} is not physical at T = {temperature} K")
            }
            Error::NewtonDiverged { iterations, history } => write!(
                f,
                "Newton did not converge in {iterations} iterations (last residual {:.3e})",
                history.last().copied().unwrap_or(f64::NAN)
            ),
            Error::SolverFailure(msg) => write!(f, "linear solver failure: {msg}"),
            Error::UnconstrainedRigidModes(modes) => {
                write!(f, "elastic system is insufficiently constrained; free rigid modes: {}",
                    modes.join(", "))
            }
            Error::TimeStepRetriesExhausted { retries, dt } => write!(
                f,
                "time step rejected {retries} times; dt reduced to {dt:.3e} s without acceptance"
            ),
            Error::PointOutsideCell(bary) => {
                write!(f, "barycentric point {bary:?} lies outside the cell")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
