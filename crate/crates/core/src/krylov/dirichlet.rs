//! Dirichlet constraints by symmetric elimination.

use super::CsrMatrix;
use crate::{Error, Result};

/// Imposes `x[dof] = value` constraints on the system Ax = b in place.
///
/// Constrained rows and columns are zeroed with a unit diagonal, and the
/// right-hand side of every free row is lifted by the eliminated column
/// contribution, so a symmetric A stays symmetric. Repeating a dof with
/// the same value is allowed; conflicting values are an error.
pub fn apply_dirichlet(
    a: &mut CsrMatrix,
    b: &mut [f64],
    constraints: &[(usize, f64)],
) -> Result<()> {
    let n = a.n_rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let mut value: Vec<Option<f64>> = vec![None; n];
    for &(dof, g) in constraints {
        if dof >= n {
            return Err(Error::IndexOutOfRange { what: "dof", index: dof, bound: n });
        }
        match value[dof] {
            Some(prev) if prev != g => {
                return Err(Error::ConflictingConstraint { dof, first: prev, second: g })
            }
            _ => value[dof] = Some(g),
        }
    }

    for i in 0..n {
        match value[i] {
            Some(g) => {
                let diag = a.entry_index(i, i).ok_or(Error::ZeroDiagonal(i))?;
                let span = a.row_ptr()[i]..a.row_ptr()[i + 1];
                for k in span {
                    a.values_mut()[k] = if k == diag { 1.0 } else { 0.0 };
                }
                b[i] = g;
            }
            None => {
                let span = a.row_ptr()[i]..a.row_ptr()[i + 1];
                for k in span {
                    let j = a.col_idx()[k];
                    if let Some(g) = value[j] {
                        b[i] -= a.values()[k] * g;
                        a.values_mut()[k] = 0.0;
                    }
                }
            }
        }
    }
    Ok(())
}
