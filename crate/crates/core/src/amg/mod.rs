//! Algebraic multigrid hierarchies used as Krylov preconditioners.
//!
//! Two setup strategies share one V-cycle engine: classical coarsening with
//! direct interpolation for scalar diffusion operators, and smoothed
//! aggregation guided by a near-nullspace for vector elasticity operators.
//! Both produce a fixed hierarchy of Galerkin coarse operators that is built
//! once and then applied as a symmetric positive definite V(1,1) cycle.

mod aggregation;
mod classical;
mod nullspace;

pub use aggregation::{build_smoothed_aggregation, SaOptions};
pub use classical::{build_classical, ClassicalOptions};
pub use nullspace::{rigid_body_modes, NearNullspace};

use crate::error::Error;
use crate::krylov::dense::{cholesky_factor, cholesky_solve, lu_solve, DenseMatrix};
use crate::krylov::{gauss_seidel_sweep, ChebyshevSmoother, CsrMatrix, Preconditioner, SweepDirection};
use crate::Result;

/// Levels stop coarsening once they are at most this many unknowns.
pub const DEFAULT_COARSE_SIZE: usize = 200;

/// Strength threshold for classical coarsening of scalar operators.
pub const CLASSICAL_STRENGTH_THRESHOLD: f64 = 0.25;

/// Aggregation strength threshold for linear vector elements.
pub const SA_STRENGTH_THRESHOLD_P1: f64 = 0.08;

/// Aggregation strength threshold for quadratic vector elements.
pub const SA_STRENGTH_THRESHOLD_P2: f64 = 0.12;

/// A level that keeps more than this fraction of its unknowns has stagnated.
pub const STAGNATION_SHRINK: f64 = 0.9;

/// Polynomial degree of the aggregation-side Chebyshev smoother.
pub const CHEBYSHEV_DEGREE: usize = 2;

const MAX_LEVELS: usize = 25;

/// Per-level relaxation. Both variants are symmetric operators, which keeps
/// the V(1,1) cycle symmetric positive definite.
pub(crate) enum LevelSmoother {
    SymmetricGaussSeidel,
    Chebyshev(ChebyshevSmoother),
}

impl LevelSmoother {
    /// x gets one smoothing correction toward A x = b.
    fn smooth(&self, a: &CsrMatrix, x: &mut [f64], b: &[f64]) {
        match self {
            LevelSmoother::SymmetricGaussSeidel => {
                gauss_seidel_sweep(a, x, b, SweepDirection::Forward)
                    .and_then(|_| gauss_seidel_sweep(a, x, b, SweepDirection::Backward))
                    .expect("level diagonal verified at setup");
            }
            LevelSmoother::Chebyshev(c) => c.apply(a, x, b),
        }
    }
}

pub(crate) struct AmgLevel {
    pub(crate) a: CsrMatrix,
    /// Prolongation to this level from the next coarser one; None on the
    /// coarsest level.
    pub(crate) p: Option<CsrMatrix>,
    /// Cached transpose of p.
    pub(crate) r: Option<CsrMatrix>,
    pub(crate) smoother: Option<LevelSmoother>,
}

enum CoarseSolver {
    Cholesky(DenseMatrix),
    /// Fallback when the coarse operator is not numerically positive
    /// definite; solves with partial pivoting on every application.
    Lu(DenseMatrix),
}

/// Size and fill statistics for one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDiagnostics {
    pub size: usize,
    pub nnz: usize,
}

/// Hierarchy-wide statistics reported after setup.
#[derive(Debug, Clone, PartialEq)]
pub struct AmgDiagnostics {
    pub levels: Vec<LevelDiagnostics>,
    /// Sum of level sizes over the fine size.
    pub grid_complexity: f64,
    /// Sum of level nonzeros over the fine nonzeros.
    pub operator_complexity: f64,
}

impl std::fmt::Display for AmgDiagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (l, level) in self.levels.iter().enumerate() {
            writeln!(f, "level {}: {} unknowns, {} nonzeros", l, level.size, level.nnz)?;
        }
        write!(
            f,
            "grid complexity {:.3}, operator complexity {:.3}",
            self.grid_complexity, self.operator_complexity
        )
    }
}

/// A fixed multigrid hierarchy applied as one V(1,1) cycle per call.
pub struct AmgHierarchy {
    levels: Vec<AmgLevel>,
    coarse: CoarseSolver,
}

impl AmgHierarchy {
    /// Finalizes a hierarchy: factors the coarsest operator and checks the
    /// structural invariants the builders promise.
    pub(crate) fn finish(levels: Vec<AmgLevel>) -> Result<AmgHierarchy> {
        assert!(!levels.is_empty(), "hierarchy needs at least one level");
        for w in levels.windows(2) {
            assert!(
                w[1].a.n_rows() < w[0].a.n_rows(),
                "level sizes must strictly decrease"
            );
        }
        for level in &levels {
            if matches!(level.smoother, Some(LevelSmoother::SymmetricGaussSeidel))
                && level.a.diagonal().iter().any(|&d| d == 0.0)
            {
                return Err(Error::ZeroDiagonal(
                    level.a.diagonal().iter().position(|&d| d == 0.0).unwrap(),
                ));
            }
        }
        let coarse_a = &levels[levels.len() - 1].a;
        let dense = DenseMatrix::from_csr(coarse_a);
        let coarse = match cholesky_factor(&dense) {
            Ok(l) => CoarseSolver::Cholesky(l),
            Err(_) => {
                lu_solve(&dense, &vec![0.0; coarse_a.n_rows()])
                    .map_err(|_| Error::SolverFailure("coarse operator is singular".into()))?;
                CoarseSolver::Lu(dense)
            }
        };
        Ok(AmgHierarchy { levels, coarse })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// The operator the hierarchy was built from.
    pub fn fine_matrix(&self) -> &CsrMatrix {
        &self.levels[0].a
    }

    /// Operator of level `l` and the prolongator from level `l + 1` into it;
    /// the prolongator is None on the coarsest level.
    pub fn level_operators(&self, l: usize) -> (&CsrMatrix, Option<&CsrMatrix>) {
        (&self.levels[l].a, self.levels[l].p.as_ref())
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.a.n_rows()).collect()
    }

    pub fn operator_complexity(&self) -> f64 {
        self.diagnostics().operator_complexity
    }

    pub fn diagnostics(&self) -> AmgDiagnostics {
        let levels: Vec<LevelDiagnostics> = self
            .levels
            .iter()
            .map(|l| LevelDiagnostics { size: l.a.n_rows(), nnz: l.a.nnz() })
            .collect();
        let fine_size = levels[0].size as f64;
        let fine_nnz = levels[0].nnz as f64;
        AmgDiagnostics {
            grid_complexity: levels.iter().map(|l| l.size as f64).sum::<f64>() / fine_size,
            operator_complexity: levels.iter().map(|l| l.nnz as f64).sum::<f64>() / fine_nnz,
            levels,
        }
    }

    /// One V(1,1) cycle for A x = r starting from x = 0.
    pub fn vcycle(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.levels[0].a.n_rows(), "residual length");
        self.cycle(0, r)
    }

    fn cycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        if l + 1 == self.levels.len() {
            return self.coarse_solve(b);
        }
        let level = &self.levels[l];
        let a = &level.a;
        let smoother = level.smoother.as_ref().expect("non-coarsest level has a smoother");
        let mut x = vec![0.0; b.len()];
        smoother.smooth(a, &mut x, b);
        let mut res = a.spmv(&x);
        for (ri, bi) in res.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let rc = level.r.as_ref().expect("non-coarsest level restricts").spmv(&res);
        let xc = self.cycle(l + 1, &rc);
        let px = level.p.as_ref().expect("non-coarsest level prolongs").spmv(&xc);
        for (xi, pi) in x.iter_mut().zip(&px) {
            *xi += pi;
        }
        smoother.smooth(a, &mut x, b);
        x
    }

    fn coarse_solve(&self, b: &[f64]) -> Vec<f64> {
        match &self.coarse {
            CoarseSolver::Cholesky(l) => cholesky_solve(l, b),
            CoarseSolver::Lu(a) => lu_solve(a, b).expect("coarse solvability verified at setup"),
        }
    }
}

impl Preconditioner for AmgHierarchy {
    fn apply_to(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(&self.cycle(0, r));
    }
}

/// Galerkin coarse operator R A P with R = P^T supplied by the caller.
pub(crate) fn galerkin_product(a: &CsrMatrix, p: &CsrMatrix, r: &CsrMatrix) -> Result<CsrMatrix> {
    let ap = a.matmul(p)?;
    r.matmul(&ap)
}

/// Strong-connection graph shared by both coarsening strategies. Row i lists
/// the columns i depends on strongly, in ascending order.
pub(crate) struct StrengthGraph {
    pub(crate) ptr: Vec<usize>,
    pub(crate) idx: Vec<usize>,
}

impl StrengthGraph {
    pub(crate) fn row(&self, i: usize) -> &[usize] {
        &self.idx[self.ptr[i]..self.ptr[i + 1]]
    }

    pub(crate) fn num_edges(&self) -> usize {
        self.idx.len()
    }

    pub(crate) fn num_rows(&self) -> usize {
        self.ptr.len() - 1
    }

    pub(crate) fn transpose(&self) -> StrengthGraph {
        let n = self.num_rows();
        let mut counts = vec![0usize; n + 1];
        for &j in &self.idx {
            counts[j + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut idx = vec![0usize; self.idx.len()];
        let mut next = counts.clone();
        for i in 0..n {
            for &j in self.row(i) {
                idx[next[j]] = i;
                next[j] += 1;
            }
        }
        StrengthGraph { ptr: counts, idx }
    }
}
