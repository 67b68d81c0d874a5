//! Dihedral-angle quality measures.

use super::{geom, Mesh, CELL_EDGES};
use crate::{Error, Result};
use rayon::prelude::*;

/// Interior dihedral angles of cell `c` in degrees, ordered like
/// [`CELL_EDGES`].
pub fn dihedral_angles(mesh: &Mesh, c: usize) -> Result<[f64; 6]> {
    if c >= mesh.cell_count() {
        return Err(Error::IndexOutOfRange { what: "cell", index: c, bound: mesh.cell_count() });
    }
    dihedral_angles_from_coords(mesh.cell_coords(c)).map_err(|e| match e {
        Error::DegenerateCell { volume, .. } => Error::DegenerateCell { cell: c, volume },
        other => other,
    })
}

/// Interior dihedral angles of the tetrahedron `p` in degrees.
///
/// The angle at an edge is measured between the vectors to the two opposite
/// vertices after projecting out the edge direction.
pub fn dihedral_angles_from_coords(p: [[f64; 3]; 4]) -> Result<[f64; 6]> {
    let vol = super::signed_volume(p[0], p[1], p[2], p[3]);
    if vol == 0.0 {
        return Err(Error::DegenerateCell { cell: 0, volume: vol });
    }
    let mut angles = [0.0; 6];
    for (slot, [i, j]) in CELL_EDGES.into_iter().enumerate() {
        let (k, l) = opposite_pair(i, j);
        let e = geom::sub(p[j], p[i]);
        let e = geom::scale(e, 1.0 / geom::norm(e));
        let a = reject(geom::sub(p[k], p[i]), e);
        let b = reject(geom::sub(p[l], p[i]), e);
        angles[slot] = geom::norm(geom::cross(a, b)).atan2(geom::dot(a, b)).to_degrees();
    }
    Ok(angles)
}

fn opposite_pair(i: usize, j: usize) -> (usize, usize) {
    let mut rest = (0..4).filter(|&v| v != i && v != j);
    (rest.next().unwrap(), rest.next().unwrap())
}

fn reject(v: [f64; 3], unit: [f64; 3]) -> [f64; 3] {
    geom::sub(v, geom::scale(unit, geom::dot(v, unit)))
}

/// Distribution of dihedral angles over a mesh.
#[derive(Debug, Clone)]
pub struct QualityReport {
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    /// Cell attaining the minimum angle (lowest index on ties).
    pub worst_cell: usize,
    /// Counts over `histogram.len()` equal bins spanning [0, 180] degrees.
    pub histogram: Vec<usize>,
    pub cell_count: usize,
}

#[derive(Clone)]
struct Acc {
    min: f64,
    max: f64,
    worst: usize,
    hist: Vec<usize>,
}

impl Acc {
    fn new(bins: usize) -> Self {
        Acc { min: f64::INFINITY, max: f64::NEG_INFINITY, worst: usize::MAX, hist: vec![0; bins] }
    }

    fn merge(mut self, other: Acc) -> Acc {
        if (other.min, other.worst) < (self.min, self.worst) {
            self.min = other.min;
            self.worst = other.worst;
        }
        self.max = self.max.max(other.max);
        for (h, o) in self.hist.iter_mut().zip(&other.hist) {
            *h += o;
        }
        self
    }
}

/// Computes the dihedral-angle distribution of the whole mesh with
/// `n_bins` histogram bins over [0, 180] degrees.
pub fn quality_report(mesh: &Mesh, n_bins: usize) -> Result<QualityReport> {
    if n_bins == 0 {
        return Err(Error::InvalidConfig("quality histogram needs at least one bin".into()));
    }
    if mesh.cell_count() == 0 {
        return Err(Error::InvalidMesh("quality report of an empty mesh".into()));
    }
    let acc = (0..mesh.cell_count())
        .into_par_iter()
        .try_fold(
            || Acc::new(n_bins),
            |mut acc, c| -> Result<Acc> {
                for angle in dihedral_angles(mesh, c)? {
                    let bin = ((angle / 180.0) * n_bins as f64) as usize;
                    acc.hist[bin.min(n_bins - 1)] += 1;
                    if (angle, c) < (acc.min, acc.worst) {
                        acc.min = angle;
                        acc.worst = c;
                    }
                    acc.max = acc.max.max(angle);
                }
                Ok(acc)
            },
        )
        .try_reduce(|| Acc::new(n_bins), |a, b| Ok(a.merge(b)))?;

    Ok(QualityReport {
        min_angle_deg: acc.min,
        max_angle_deg: acc.max,
        worst_cell: acc.worst,
        histogram: acc.hist,
        cell_count: mesh.cell_count(),
    })
}
