//! Classical coarse/fine coarsening with direct interpolation.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{galerkin_product, AmgHierarchy, AmgLevel, LevelSmoother, StrengthGraph};
use super::{DEFAULT_COARSE_SIZE, MAX_LEVELS, STAGNATION_SHRINK};
use crate::error::Error;
use crate::krylov::CsrMatrix;
use crate::Result;

#[derive(Debug, Clone)]
pub struct ClassicalOptions {
    /// Fraction of the largest off-diagonal magnitude a connection must
    /// reach to count as strong.
    pub strength_threshold: f64,
    /// Coarsening stops once a level has at most this many unknowns.
    pub coarse_size_threshold: usize,
    pub max_levels: usize,
}

impl Default for ClassicalOptions {
    fn default() -> Self {
        ClassicalOptions {
            strength_threshold: super::CLASSICAL_STRENGTH_THRESHOLD,
            coarse_size_threshold: DEFAULT_COARSE_SIZE,
            max_levels: MAX_LEVELS,
        }
    }
}

/// Row i strongly depends on j when |a_ij| >= theta * max_k |a_ik| over
/// off-diagonal k.
pub(crate) fn strength_graph(a: &CsrMatrix, theta: f64) -> StrengthGraph {
    let n = a.n_rows();
    let mut ptr = Vec::with_capacity(n + 1);
    ptr.push(0usize);
    let mut idx = Vec::new();
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let mut max_off = 0.0f64;
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i {
                max_off = max_off.max(v.abs());
            }
        }
        if max_off > 0.0 {
            let cutoff = theta * max_off;
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i && v.abs() >= cutoff {
                    idx.push(j);
                }
            }
        }
        ptr.push(idx.len());
    }
    StrengthGraph { ptr, idx }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum PointKind {
    Coarse,
    Fine,
    Unassigned,
}

pub(crate) struct Splitting {
    pub(crate) kind: Vec<PointKind>,
    /// Coarse ordinal for each coarse point, usize::MAX elsewhere.
    pub(crate) coarse_index: Vec<usize>,
    pub(crate) coarse_count: usize,
}

/// Greedy splitting: points influencing many undecided neighbors become
/// coarse first; their dependents become fine, which raises the priority of
/// the points those dependents rely on. Ties break toward the lowest index.
pub(crate) fn split_cf(strength: &StrengthGraph) -> Splitting {
    let n = strength.num_rows();
    let influence = strength.transpose();
    let mut weight: Vec<usize> = (0..n).map(|i| influence.row(i).len()).collect();
    let mut kind = vec![PointKind::Unassigned; n];
    // Decoupled rows, typical for eliminated boundary conditions: one
    // smoother sweep solves them exactly, so they never become coarse.
    for i in 0..n {
        if strength.row(i).is_empty() && influence.row(i).is_empty() {
            kind[i] = PointKind::Fine;
        }
    }
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = BinaryHeap::with_capacity(n);
    for i in 0..n {
        if kind[i] == PointKind::Unassigned {
            heap.push((weight[i], Reverse(i)));
        }
    }
    while let Some((w, Reverse(i))) = heap.pop() {
        if kind[i] != PointKind::Unassigned || w != weight[i] {
            continue;
        }
        kind[i] = PointKind::Coarse;
        for &j in influence.row(i) {
            if kind[j] != PointKind::Unassigned {
                continue;
            }
            kind[j] = PointKind::Fine;
            for &k in strength.row(j) {
                if kind[k] == PointKind::Unassigned {
                    weight[k] += 1;
                    heap.push((weight[k], Reverse(k)));
                }
            }
        }
    }
    let mut coarse_index = vec![usize::MAX; n];
    let mut coarse_count = 0;
    for i in 0..n {
        if kind[i] == PointKind::Coarse {
            coarse_index[i] = coarse_count;
            coarse_count += 1;
        }
    }
    Splitting { kind, coarse_index, coarse_count }
}

/// Direct interpolation: a fine point takes a weighted combination of its
/// strong coarse neighbors, scaled so the full off-diagonal row sum is
/// preserved. Coarse points inject.
fn direct_interpolation(
    a: &CsrMatrix,
    strength: &StrengthGraph,
    split: &Splitting,
) -> Result<CsrMatrix> {
    let n = a.n_rows();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        match split.kind[i] {
            PointKind::Coarse => triplets.push((i, split.coarse_index[i], 1.0)),
            PointKind::Fine | PointKind::Unassigned => {
                let strong = strength.row(i);
                let (cols, vals) = a.row(i);
                let mut diag = 0.0;
                let mut off_sum = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    if j == i {
                        diag = v;
                    } else {
                        off_sum += v;
                    }
                }
                let mut coarse_sum = 0.0;
                for &c in strong {
                    if split.kind[c] == PointKind::Coarse {
                        coarse_sum += a.entry(i, c);
                    }
                }
                if diag == 0.0 {
                    return Err(Error::ZeroDiagonal(i));
                }
                if coarse_sum.abs() < 1e-300 {
                    continue;
                }
                let alpha = off_sum / coarse_sum;
                for &c in strong {
                    if split.kind[c] == PointKind::Coarse {
                        let w = -alpha * a.entry(i, c) / diag;
                        if w != 0.0 {
                            triplets.push((i, split.coarse_index[c], w));
                        }
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, split.coarse_count, &triplets)
}

/// Builds a multigrid hierarchy for a scalar operator by repeated
/// coarse/fine splitting and Galerkin projection. Symmetric Gauss-Seidel
/// smooths every non-coarsest level.
pub fn build_classical(a: &CsrMatrix, opts: &ClassicalOptions) -> Result<AmgHierarchy> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::DimensionMismatch { expected: a.n_rows(), got: a.n_cols() });
    }
    if a.block_size() != 1 {
        return Err(Error::InvalidConfig(
            "classical coarsening requires a scalar operator".into(),
        ));
    }
    if !(0.0..1.0).contains(&opts.strength_threshold) {
        return Err(Error::InvalidConfig(format!(
            "strength threshold {} outside [0, 1)",
            opts.strength_threshold
        )));
    }
    let mut levels: Vec<AmgLevel> = Vec::new();
    let mut current = a.clone();
    loop {
        let n = current.n_rows();
        if n <= opts.coarse_size_threshold || levels.len() + 1 >= opts.max_levels {
            break;
        }
        let strength = strength_graph(&current, opts.strength_threshold);
        if strength.num_edges() == 0 {
            break;
        }
        let split = split_cf(&strength);
        let nc = split.coarse_count;
        if nc == 0 || nc == n {
            break;
        }
        if nc as f64 > STAGNATION_SHRINK * n as f64 {
            return Err(Error::CoarseningStagnation { level: levels.len(), fine: n, coarse: nc });
        }
        let p = direct_interpolation(&current, &strength, &split)?;
        let r = p.transpose();
        let coarse = galerkin_product(&current, &p, &r)?;
        levels.push(AmgLevel {
            a: current,
            p: Some(p),
            r: Some(r),
            smoother: Some(LevelSmoother::SymmetricGaussSeidel),
        });
        current = coarse;
    }
    levels.push(AmgLevel { a: current, p: None, r: None, smoother: None });
    AmgHierarchy::finish(levels)
}
