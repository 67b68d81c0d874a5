//! Sparse matrix storage, Krylov solvers, smoothers and spectral estimates.

mod dense_mod;
mod dirichlet;
mod mmio;
mod smooth;
mod solvers;

pub use dirichlet::apply_dirichlet;
pub use mmio::{read_matrix_market, write_matrix_market};
pub use smooth::{
    chebyshev_smoother, estimate_lambda_max, gauss_seidel_smoother, gauss_seidel_sweep,
    jacobi_smoother, ChebyshevSmoother, SweepDirection, CHEBYSHEV_EIG_RATIO,
    LAMBDA_SAFETY_FACTOR,
};
pub use solvers::{bicgstab, cg};

pub mod dense {
    pub use super::dense_mod::*;
}

use crate::{Error, Result};
use rayon::prelude::*;

/// Rows below this count run serially in `spmv`; the rayon dispatch
/// overhead dominates otherwise.
const PARALLEL_ROW_THRESHOLD: usize = 4096;

/// Compressed sparse row matrix with strictly increasing column indices
/// per row. `block_size` annotates the nodal layout of system matrices
/// (1 for scalar fields, 3 for interleaved vector fields).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    block_size: usize,
    symmetric_structure: bool,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, validating the structure.
    pub fn from_raw(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 || row_ptr[0] != 0 {
            return Err(Error::DimensionMismatch { expected: n_rows + 1, got: row_ptr.len() });
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::DimensionMismatch {
                expected: *row_ptr.last().unwrap(),
                got: values.len(),
            });
        }
        for i in 0..n_rows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidMesh(format!("row pointer not monotone at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidMesh(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
            if let Some(&last) = cols.last() {
                if last >= n_cols {
                    return Err(Error::IndexOutOfRange { what: "column", index: last, bound: n_cols });
                }
            }
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
            block_size: 1,
            symmetric_structure: false,
        })
    }

    /// Builds a matrix from unsorted `(row, col, value)` triplets, summing
    /// duplicates.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(i, j, _) in triplets {
            if i >= n_rows {
                return Err(Error::IndexOutOfRange { what: "row", index: i, bound: n_rows });
            }
            if j >= n_cols {
                return Err(Error::IndexOutOfRange { what: "column", index: j, bound: n_cols });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_unstable_by_key(|&(i, j, _)| (i, j));

        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        for &(i, j, v) in &sorted {
            if col_idx.len() > row_ptr[i] && row_ptr[i + 1] > 0 && col_idx.last() == Some(&j)
                && row_ptr[i + 1] == col_idx.len()
            {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] = col_idx.len();
            }
        }
        // Forward-fill empty rows.
        for i in 0..n_rows {
            if row_ptr[i + 1] < row_ptr[i] {
                row_ptr[i + 1] = row_ptr[i];
            }
        }
        for i in 0..n_rows {
            let next = row_ptr[i + 1].max(row_ptr[i]);
            row_ptr[i + 1] = next;
        }
        CsrMatrix::from_raw(n_rows, n_cols, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            block_size: 1,
            symmetric_structure: true,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Annotates the nodal block layout; only 1 (scalar) and 3 (vector)
    /// are meaningful for system matrices.
    pub fn set_block_size(&mut self, b: usize) -> Result<()> {
        if b != 1 && b != 3 {
            return Err(Error::InvalidConfig(format!("block size must be 1 or 3, got {b}")));
        }
        self.block_size = b;
        Ok(())
    }

    pub fn symmetric_structure(&self) -> bool {
        self.symmetric_structure
    }

    /// Checks that `(i, j)` is present iff `(j, i)` is, and records the
    /// outcome in the symmetric-structure flag.
    pub fn verify_symmetric_structure(&mut self) -> bool {
        let ok = self.is_square()
            && (0..self.n_rows).all(|i| {
                self.row(i).0.iter().all(|&j| self.entry_index(j, i).is_some())
            });
        self.symmetric_structure = ok;
        ok
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Index into `values` of entry `(i, j)`, if present in the pattern.
    pub fn entry_index(&self, i: usize, j: usize) -> Option<usize> {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].binary_search(&j).ok().map(|k| span.start + k)
    }

    /// Value of entry `(i, j)`, zero if absent.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entry_index(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Main diagonal, zero where the pattern has no diagonal entry.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.entry(i, i)).collect()
    }

    /// y = Ax. Rows are processed independently, so the result does not
    /// depend on the thread count.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols, "spmv input length");
        assert_eq!(y.len(), self.n_rows, "spmv output length");
        let row = |i: usize| -> f64 {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            acc
        };
        if self.n_rows < PARALLEL_ROW_THRESHOLD {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row(i);
            }
        } else {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        }
    }

    pub fn spmv(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        y
    }

    /// B = Aᵀ by counting sort over columns.
    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut cursor = counts.clone();
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let slot = cursor[j];
                cursor[j] += 1;
                col_idx[slot] = i;
                values[slot] = self.values[k];
            }
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr: counts,
            col_idx,
            values,
            block_size: self.block_size,
            symmetric_structure: self.symmetric_structure,
        }
    }

    /// C = self · other by row-wise sparse accumulation.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch { expected: self.n_cols, got: other.n_rows });
        }
        let n_rows = self.n_rows;
        let n_cols = other.n_cols;
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        row_ptr.push(0usize);
        let mut col_idx: Vec<usize> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        // marker[j] points at the accumulator slot for column j in the
        // current row, or usize::MAX when untouched.
        let mut marker = vec![usize::MAX; n_cols];
        let mut row_cols: Vec<usize> = Vec::new();
        let mut row_vals: Vec<f64> = Vec::new();
        for i in 0..n_rows {
            row_cols.clear();
            row_vals.clear();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let mid = self.col_idx[k];
                let v = self.values[k];
                for kk in other.row_ptr[mid]..other.row_ptr[mid + 1] {
                    let j = other.col_idx[kk];
                    let w = v * other.values[kk];
                    if marker[j] == usize::MAX {
                        marker[j] = row_cols.len();
                        row_cols.push(j);
                        row_vals.push(w);
                    } else {
                        row_vals[marker[j]] += w;
                    }
                }
            }
            let mut order: Vec<usize> = (0..row_cols.len()).collect();
            order.sort_unstable_by_key(|&s| row_cols[s]);
            for &s in &order {
                col_idx.push(row_cols[s]);
                values.push(row_vals[s]);
            }
            for &j in &row_cols {
                marker[j] = usize::MAX;
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix::from_raw(n_rows, n_cols, row_ptr, col_idx, values)
    }

    /// C = self + alpha · other; the pattern is the union of both.
    pub fn add_scaled(&self, other: &CsrMatrix, alpha: f64) -> Result<CsrMatrix> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch { expected: self.n_rows, got: other.n_rows });
        }
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        row_ptr.push(0usize);
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(col_idx.capacity());
        for i in 0..self.n_rows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let ja = ca.get(p).copied().unwrap_or(usize::MAX);
                let jb = cb.get(q).copied().unwrap_or(usize::MAX);
                if ja < jb {
                    col_idx.push(ja);
                    values.push(va[p]);
                    p += 1;
                } else if jb < ja {
                    col_idx.push(jb);
                    values.push(alpha * vb[q]);
                    q += 1;
                } else {
                    col_idx.push(ja);
                    values.push(va[p] + alpha * vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix::from_raw(self.n_rows, self.n_cols, row_ptr, col_idx, values)
    }

    /// Scales row i by s[i] in place.
    pub fn scale_rows(&mut self, s: &[f64]) {
        assert_eq!(s.len(), self.n_rows, "row scaling length");
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                self.values[k] *= s[i];
            }
        }
    }

    /// Largest relative asymmetry max |a_ij − a_ji| / max |a_ij|.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - t.entry(i, j)).abs());
            }
        }
        worst / scale
    }
}

/// Sequential inner product; accumulation order is fixed so results are
/// reproducible across thread counts.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Outcome of an iterative solve. Breakdowns and stagnation are reported
/// here rather than as errors so callers can switch methods.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub breakdown_reason: Option<String>,
}

/// Action of an operator approximating A⁻¹.
pub trait Preconditioner: Sync {
    fn apply_to(&self, r: &[f64], z: &mut [f64]);

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; r.len()];
        self.apply_to(r, &mut z);
        z
    }
}

/// No-op preconditioner.
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply_to(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal (Jacobi) preconditioner.
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let inv_diag = a
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| if d == 0.0 { Err(Error::ZeroDiagonal(i)) } else { Ok(1.0 / d) })
            .collect::<Result<Vec<_>>>()?;
        Ok(JacobiPreconditioner { inv_diag })
    }
}

impl Preconditioner for JacobiPreconditioner {
    fn apply_to(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// The 1D Poisson matrix tridiag(-1, 2, -1) with homogeneous boundary
/// rows, a standard SPD test operator.
pub fn poisson_1d(n: usize) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(3 * n);
    for i in 0..n {
        if i > 0 {
            triplets.push((i, i - 1, -1.0));
        }
        triplets.push((i, i, 2.0));
        if i + 1 < n {
            triplets.push((i, i + 1, -1.0));
        }
    }
    let mut a = CsrMatrix::from_triplets(n, n, &triplets).expect("valid triplets");
    a.symmetric_structure = true;
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let a = CsrMatrix::from_triplets(
            2,
            2,
            &[(1, 0, 3.0), (0, 0, 1.0), (1, 0, -1.0), (0, 1, 2.0)],
        )
        .unwrap();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.entry(0, 0), 1.0);
        assert_eq!(a.entry(0, 1), 2.0);
        assert_eq!(a.entry(1, 0), 2.0);
        assert_eq!(a.entry(1, 1), 0.0);
    }

    #[test]
    fn identity_spmv_is_identity() {
        let a = CsrMatrix::identity(4);
        let x = vec![1.0, -2.0, 3.5, 0.0];
        assert_eq!(a.spmv(&x), x);
    }

    #[test]
    fn poisson_spmv_telescopes_on_ones() {
        let a = poisson_1d(6);
        let y = a.spmv(&vec![1.0; 6]);
        assert_eq!(y[0], 1.0);
        assert_eq!(y[5], 1.0);
        for &v in &y[1..5] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn spmv_matches_dense_oracle() {
        // Fixed 5x5 matrix with both signs and an empty row section.
        let triplets = [
            (0, 0, 2.0),
            (0, 3, -1.5),
            (1, 1, 4.0),
            (2, 0, 1.0),
            (2, 2, -3.0),
            (2, 4, 0.5),
            (4, 1, -2.0),
            (4, 4, 6.0),
        ];
        let a = CsrMatrix::from_triplets(5, 5, &triplets).unwrap();
        let x = [1.0, -1.0, 2.0, 3.0, -2.0];
        let mut dense = [[0.0; 5]; 5];
        for &(i, j, v) in &triplets {
            dense[i][j] += v;
        }
        let expect: Vec<f64> =
            dense.iter().map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        let got = a.spmv(&x);
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn transpose_roundtrip() {
        let a = CsrMatrix::from_triplets(3, 4, &[(0, 1, 1.0), (1, 3, 2.0), (2, 0, -1.0)]).unwrap();
        let att = a.transpose().transpose();
        assert_eq!(att.n_rows(), 3);
        assert_eq!(att.n_cols(), 4);
        for i in 0..3 {
            for j in 0..4 {
                assert_eq!(a.entry(i, j), att.entry(i, j));
            }
        }
    }

    #[test]
    fn symmetric_structure_flag() {
        let mut sym = poisson_1d(4);
        assert!(sym.verify_symmetric_structure());
        let mut asym =
            CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(!asym.verify_symmetric_structure());
        assert!(!asym.symmetric_structure());
        assert!(sym.symmetric_structure());
    }

    #[test]
    fn matmul_matches_dense_product() {
        let a = CsrMatrix::from_triplets(
            3,
            4,
            &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0), (1, 3, 0.5), (2, 0, 3.0)],
        )
        .unwrap();
        let b = CsrMatrix::from_triplets(
            4,
            2,
            &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, -2.0), (2, 1, 1.0), (3, 0, 4.0)],
        )
        .unwrap();
        let c = a.matmul(&b).unwrap();
        let mut da = [[0.0; 4]; 3];
        let mut db = [[0.0; 2]; 4];
        for i in 0..3 {
            for j in 0..4 {
                da[i][j] = a.entry(i, j);
            }
        }
        for i in 0..4 {
            for j in 0..2 {
                db[i][j] = b.entry(i, j);
            }
        }
        for i in 0..3 {
            for j in 0..2 {
                let e: f64 = (0..4).map(|k| da[i][k] * db[k][j]).sum();
                assert!((c.entry(i, j) - e).abs() < 1e-14);
            }
        }
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn add_scaled_unions_patterns() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0)]).unwrap();
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 1, 3.0), (1, 1, -1.0)]).unwrap();
        let c = a.add_scaled(&b, 2.0).unwrap();
        assert_eq!(c.entry(0, 0), 1.0);
        assert_eq!(c.entry(0, 1), 6.0);
        assert_eq!(c.entry(1, 1), 0.0);
        assert_eq!(c.nnz(), 3);
    }

    #[test]
    fn scale_rows_multiplies_in_place() {
        let mut a = poisson_1d(3);
        a.scale_rows(&[1.0, 0.5, 2.0]);
        assert_eq!(a.entry(1, 0), -0.5);
        assert_eq!(a.entry(1, 1), 1.0);
        assert_eq!(a.entry(2, 1), -2.0);
    }
}
