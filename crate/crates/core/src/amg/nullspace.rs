//! Near-nullspace vectors that guide smoothed aggregation.

use crate::error::Error;
use crate::fem::DofMap;
use crate::Result;

/// Orthonormal vectors spanning the low-energy modes of an operator:
/// constants for diffusion, rigid body motions for elasticity.
pub struct NearNullspace {
    vectors: Vec<Vec<f64>>,
    block_size: usize,
}

impl NearNullspace {
    /// The single normalized constant vector on n unknowns.
    pub fn constants(n: usize) -> NearNullspace {
        let scale = 1.0 / (n as f64).sqrt();
        NearNullspace { vectors: vec![vec![scale; n]], block_size: 1 }
    }

    /// Orthonormalizes the given vectors. Fails when they are linearly
    /// dependent or inconsistently sized.
    pub fn from_vectors(vectors: Vec<Vec<f64>>, block_size: usize) -> Result<NearNullspace> {
        if vectors.is_empty() {
            return Err(Error::NullspaceMismatch("no near-nullspace vectors given".into()));
        }
        let n = vectors[0].len();
        if n == 0 || block_size == 0 || n % block_size != 0 {
            return Err(Error::NullspaceMismatch(format!(
                "length {} is not a multiple of block size {}",
                n, block_size
            )));
        }
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::NullspaceMismatch("vectors differ in length".into()));
        }
        let vectors = orthonormalize(vectors)?;
        Ok(NearNullspace { vectors, block_size })
    }

    pub fn num_vectors(&self) -> usize {
        self.vectors.len()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Length of each vector.
    pub fn len(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
fn orthonormalize(mut vectors: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let k = vectors.len();
    for j in 0..k {
        let original_norm = norm(&vectors[j]);
        for _ in 0..2 {
            for i in 0..j {
                let (head, tail) = vectors.split_at_mut(j);
                let q = &head[i];
                let v = &mut tail[0];
                let c: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let nrm = norm(&vectors[j]);
        if nrm <= 1e-12 * original_norm.max(1e-300) {
            return Err(Error::NullspaceMismatch(format!(
                "vector {} is linearly dependent on the earlier ones",
                j
            )));
        }
        for v in vectors[j].iter_mut() {
            *v /= nrm;
        }
    }
    Ok(vectors)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The six rigid body modes of a vector-valued space: three translations and
/// three rotations about the centroid of the nodes, orthonormalized. The
/// rotation about z evaluates to (-(y - yc), x - xc, 0) at each node before
/// orthonormalization, and cyclically for the other axes.
pub fn rigid_body_modes(dofmap: &DofMap) -> Result<NearNullspace> {
    if dofmap.value_size() != 3 {
        return Err(Error::NullspaceMismatch(
            "rigid body modes require a vector-valued space".into(),
        ));
    }
    let coords = dofmap.node_coords();
    let nn = coords.len();
    let n = 3 * nn;
    let mut centroid = [0.0f64; 3];
    for c in coords {
        for d in 0..3 {
            centroid[d] += c[d];
        }
    }
    for d in 0..3 {
        centroid[d] /= nn as f64;
    }
    let mut modes = vec![vec![0.0; n]; 6];
    for (node, c) in coords.iter().enumerate() {
        let x = c[0] - centroid[0];
        let y = c[1] - centroid[1];
        let z = c[2] - centroid[2];
        for d in 0..3 {
            modes[d][3 * node + d] = 1.0;
        }
        modes[3][3 * node + 1] = -z;
        modes[3][3 * node + 2] = y;
        modes[4][3 * node] = z;
        modes[4][3 * node + 2] = -x;
        modes[5][3 * node] = -y;
        modes[5][3 * node + 1] = x;
    }
    NearNullspace::from_vectors(modes, 3)
}
