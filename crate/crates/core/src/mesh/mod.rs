//! Tetrahedral mesh storage, generation, refinement and quality analysis.
//!
//! A [`Mesh`] is immutable after construction: the constructor normalises
//! cell orientation to positive signed volume, validates connectivity and
//! facet tags, and precomputes the boundary facet list. Refinement returns
//! a new mesh.

mod generate;
mod quality;
mod refine;

pub use generate::build_box_mesh;
pub use quality::{dihedral_angles, dihedral_angles_from_coords, quality_report, QualityReport};
pub use refine::uniform_refine;

use crate::{Error, Result};
use std::collections::HashMap;

/// Geometry helpers on `[f64; 3]`.
pub mod geom {
    pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    pub fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }

    pub fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
        [a[0] * s, a[1] * s, a[2] * s]
    }

    pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    pub fn norm(a: [f64; 3]) -> f64 {
        dot(a, a).sqrt()
    }
}

/// Local faces of a reference tetrahedron; face `i` is opposite vertex `i`.
pub const CELL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Local edges of a reference tetrahedron in lexicographic order.
pub const CELL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Relative volume below which a cell counts as degenerate,
/// scaled by the cube of the mesh bounding-box diagonal.
pub const DEGENERACY_TOLERANCE: f64 = 1e-14;

/// A conforming tetrahedral mesh with region and boundary tags.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 3]>,
    cells: Vec<[usize; 4]>,
    cell_region: Vec<i32>,
    facet_tags: HashMap<[usize; 3], i32>,
    boundary: Vec<[usize; 3]>,
}

impl Mesh {
    /// Builds a mesh from raw arrays, normalising cell orientation and
    /// validating connectivity, degeneracy and facet tags.
    pub fn new(
        vertices: Vec<[f64; 3]>,
        mut cells: Vec<[usize; 4]>,
        cell_region: Vec<i32>,
        facet_tags: HashMap<[usize; 3], i32>,
    ) -> Result<Self> {
        if cells.len() != cell_region.len() {
            return Err(Error::InvalidMesh(format!(
                "{} cells but {} region ids",
                cells.len(),
                cell_region.len()
            )));
        }
        let nv = vertices.len();
        let vol_tol = DEGENERACY_TOLERANCE * bbox_diagonal(&vertices).powi(3);
        for (c, cell) in cells.iter_mut().enumerate() {
            for &v in cell.iter() {
                if v >= nv {
                    return Err(Error::IndexOutOfRange { what: "vertex", index: v, bound: nv });
                }
            }
            let [a, b, cc, d] = *cell;
            if a == b || a == cc || a == d || b == cc || b == d || cc == d {
                return Err(Error::InvalidMesh(format!("cell {c} repeats a vertex index")));
            }
            let vol = signed_volume(vertices[a], vertices[b], vertices[cc], vertices[d]);
            if vol.abs() < vol_tol {
                return Err(Error::DegenerateCell { cell: c, volume: vol });
            }
            if vol < 0.0 {
                cell.swap(2, 3);
            }
        }

        let boundary = extract_boundary(&cells);
        for facet in facet_tags.keys() {
            let mut key = *facet;
            key.sort_unstable();
            if key != *facet {
                return Err(Error::InvalidMesh(format!(
                    "facet tag key {facet:?} is not a sorted vertex triple"
                )));
            }
            if boundary.binary_search(facet).is_err() {
                return Err(Error::InvalidMesh(format!(
                    "tagged facet {facet:?} is not a boundary facet"
                )));
            }
        }

        Ok(Mesh { vertices, cells, cell_region, facet_tags, boundary })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> [f64; 3] {
        self.vertices[v]
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> [usize; 4] {
        self.cells[c]
    }

    pub fn cell_regions(&self) -> &[i32] {
        &self.cell_region
    }

    pub fn cell_region(&self, c: usize) -> i32 {
        self.cell_region[c]
    }

    pub fn facet_tags(&self) -> &HashMap<[usize; 3], i32> {
        &self.facet_tags
    }

    /// Tag of a boundary facet, keyed by its sorted vertex triple.
    pub fn facet_tag(&self, facet: [usize; 3]) -> Option<i32> {
        self.facet_tags.get(&sorted3(facet)).copied()
    }

    /// Corner coordinates of cell `c`.
    pub fn cell_coords(&self, c: usize) -> [[f64; 3]; 4] {
        let [a, b, cc, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[cc], self.vertices[d]]
    }

    /// Signed volume of cell `c` (positive by construction).
    pub fn cell_volume(&self, c: usize) -> f64 {
        let [p0, p1, p2, p3] = self.cell_coords(c);
        signed_volume(p0, p1, p2, p3)
    }

    /// Sum of all cell volumes.
    pub fn total_volume(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_volume(c)).sum()
    }

    /// Axis-aligned bounding box as `(min, max)` corners.
    pub fn bbox(&self) -> ([f64; 3], [f64; 3]) {
        bbox(&self.vertices)
    }

    /// All facets incident to exactly one cell, as sorted vertex triples in
    /// lexicographic order.
    pub fn boundary_facets(&self) -> &[[usize; 3]] {
        &self.boundary
    }

    /// The unique cell owning boundary facet `facet`, or an error if the
    /// facet is interior or unknown.
    pub fn boundary_facet_cell(&self, facet: [usize; 3]) -> Result<usize> {
        let key = sorted3(facet);
        if self.boundary.binary_search(&key).is_err() {
            return Err(Error::InvalidMesh(format!("facet {facet:?} is not on the boundary")));
        }
        for (c, cell) in self.cells.iter().enumerate() {
            if CELL_FACES.iter().any(|f| sorted3([cell[f[0]], cell[f[1]], cell[f[2]]]) == key) {
                return Ok(c);
            }
        }
        unreachable!("boundary facet without owner cell")
    }

    /// Map from every tagged boundary facet to `(owner cell, tag)`.
    ///
    /// Built in one sweep over the cells; use this instead of repeated
    /// [`Mesh::boundary_facet_cell`] lookups when integrating over many
    /// facets.
    pub fn tagged_facet_owners(&self) -> Vec<([usize; 3], usize, i32)> {
        let mut owners = Vec::with_capacity(self.facet_tags.len());
        for (c, cell) in self.cells.iter().enumerate() {
            for f in CELL_FACES {
                let key = sorted3([cell[f[0]], cell[f[1]], cell[f[2]]]);
                if let Some(&tag) = self.facet_tags.get(&key) {
                    if self.boundary.binary_search(&key).is_ok() {
                        owners.push((key, c, tag));
                    }
                }
            }
        }
        owners.sort_unstable();
        owners
    }

    /// Outward unit normal of a boundary facet of cell `c`.
    ///
    /// `facet` must be one of the four faces of the cell; the normal points
    /// away from the remaining vertex.
    pub fn facet_outward_normal(&self, c: usize, facet: [usize; 3]) -> Result<[f64; 3]> {
        let cell = self.cells[c];
        let key = sorted3(facet);
        let opposite = cell
            .iter()
            .copied()
            .find(|v| !key.contains(v))
            .ok_or_else(|| Error::InvalidMesh(format!("facet {facet:?} not in cell {c}")))?;
        if !key.iter().all(|v| cell.contains(v)) {
            return Err(Error::InvalidMesh(format!("facet {facet:?} not in cell {c}")));
        }
        let p0 = self.vertices[key[0]];
        let n = geom::cross(geom::sub(self.vertices[key[1]], p0), geom::sub(self.vertices[key[2]], p0));
        let n = geom::scale(n, 1.0 / geom::norm(n));
        let to_opposite = geom::sub(self.vertices[opposite], p0);
        Ok(if geom::dot(n, to_opposite) > 0.0 { geom::scale(n, -1.0) } else { n })
    }
}

pub(crate) fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

pub(crate) fn signed_volume(p0: [f64; 3], p1: [f64; 3], p2: [f64; 3], p3: [f64; 3]) -> f64 {
    let a = geom::sub(p1, p0);
    let b = geom::sub(p2, p0);
    let c = geom::sub(p3, p0);
    geom::dot(a, geom::cross(b, c)) / 6.0
}

fn bbox(vertices: &[[f64; 3]]) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in vertices {
        for k in 0..3 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    (lo, hi)
}

fn bbox_diagonal(vertices: &[[f64; 3]]) -> f64 {
    if vertices.is_empty() {
        return 0.0;
    }
    let (lo, hi) = bbox(vertices);
    geom::norm(geom::sub(hi, lo))
}

/// Sorted list of facets incident to exactly one cell.
fn extract_boundary(cells: &[[usize; 4]]) -> Vec<[usize; 3]> {
    let mut faces: Vec<[u32; 3]> = Vec::with_capacity(cells.len() * 4);
    for cell in cells {
        for f in CELL_FACES {
            let key = sorted3([cell[f[0]], cell[f[1]], cell[f[2]]]);
            faces.push([key[0] as u32, key[1] as u32, key[2] as u32]);
        }
    }
    faces.sort_unstable();
    let mut boundary = Vec::new();
    let mut i = 0;
    while i < faces.len() {
        let mut j = i + 1;
        while j < faces.len() && faces[j] == faces[i] {
            j += 1;
        }
        if j - i == 1 {
            let f = faces[i];
            boundary.push([f[0] as usize, f[1] as usize, f[2] as usize]);
        }
        i = j;
    }
    boundary
}
