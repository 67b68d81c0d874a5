//! Lagrange shape functions on the reference tetrahedron and triangle.
//!
//! Cell node order: the four vertices, then the six edge midpoints in
//! [`crate::mesh::CELL_EDGES`] order. Facet node order: the three
//! vertices, then edges (0,1), (0,2), (1,2).

use crate::mesh::CELL_EDGES;
use crate::{Error, Result};

pub const MAX_CELL_NODES: usize = 10;
pub const MAX_FACET_NODES: usize = 6;

pub fn cell_node_count(degree: usize) -> Result<usize> {
    match degree {
        1 => Ok(4),
        2 => Ok(10),
        other => Err(Error::UnsupportedDegree(other)),
    }
}

pub fn facet_node_count(degree: usize) -> Result<usize> {
    match degree {
        1 => Ok(3),
        2 => Ok(6),
        other => Err(Error::UnsupportedDegree(other)),
    }
}

/// Values of all cell shape functions at barycentric point `l`.
pub fn eval_cell_basis(degree: usize, l: [f64; 4], out: &mut [f64]) {
    match degree {
        1 => out[..4].copy_from_slice(&l),
        2 => {
            for v in 0..4 {
                out[v] = l[v] * (2.0 * l[v] - 1.0);
            }
            for (e, [i, j]) in CELL_EDGES.into_iter().enumerate() {
                out[4 + e] = 4.0 * l[i] * l[j];
            }
        }
        _ => unreachable!("degree validated by cell_node_count"),
    }
}

/// Constant barycentric gradients with respect to the reference
/// coordinates (x, y, z) where λ = (1-x-y-z, x, y, z).
const BARY_GRAD: [[f64; 3]; 4] =
    [[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Reference-coordinate gradients of all cell shape functions at `l`.
pub fn eval_cell_basis_grad(degree: usize, l: [f64; 4], out: &mut [[f64; 3]]) {
    match degree {
        1 => out[..4].copy_from_slice(&BARY_GRAD),
        2 => {
            for v in 0..4 {
                let c = 4.0 * l[v] - 1.0;
                for k in 0..3 {
                    out[v][k] = c * BARY_GRAD[v][k];
                }
            }
            for (e, [i, j]) in CELL_EDGES.into_iter().enumerate() {
                for k in 0..3 {
                    out[4 + e][k] = 4.0 * (l[j] * BARY_GRAD[i][k] + l[i] * BARY_GRAD[j][k]);
                }
            }
        }
        _ => unreachable!("degree validated by cell_node_count"),
    }
}

/// Facet (triangle) edge order relative to the facet's own vertex list.
pub const FACET_EDGES: [[usize; 2]; 3] = [[0, 1], [0, 2], [1, 2]];

/// Values of all facet shape functions at triangle barycentric point `l`
/// (only the first three slots of `l` are used).
pub fn eval_facet_basis(degree: usize, l: [f64; 4], out: &mut [f64]) {
    match degree {
        1 => out[..3].copy_from_slice(&l[..3]),
        2 => {
            for v in 0..3 {
                out[v] = l[v] * (2.0 * l[v] - 1.0);
            }
            for (e, [i, j]) in FACET_EDGES.into_iter().enumerate() {
                out[3 + e] = 4.0 * l[i] * l[j];
            }
        }
        _ => unreachable!("degree validated by facet_node_count"),
    }
}

/// Geometry of a cell: Jacobian determinant and the transform taking
/// reference gradients to physical gradients.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    /// |det J|; equals six times the cell volume.
    pub det_j_abs: f64,
    /// Inverse-transpose Jacobian: grad_x = j_inv_t · grad_ref.
    pub j_inv_t: [[f64; 3]; 3],
}

impl CellGeometry {
    pub fn new(coords: [[f64; 3]; 4]) -> Result<Self> {
        let mut j = [[0.0; 3]; 3];
        for col in 0..3 {
            for row in 0..3 {
                j[row][col] = coords[col + 1][row] - coords[0][row];
            }
        }
        let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
            - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
            + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
        let scale: f64 = coords
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
            .max(1e-30);
        if det.abs() < 1e-14 * scale.powi(3) {
            return Err(Error::DegenerateCell { cell: 0, volume: det / 6.0 });
        }
        let inv_det = 1.0 / det;
        let mut inv = [[0.0; 3]; 3];
        inv[0][0] = (j[1][1] * j[2][2] - j[1][2] * j[2][1]) * inv_det;
        inv[0][1] = (j[0][2] * j[2][1] - j[0][1] * j[2][2]) * inv_det;
        inv[0][2] = (j[0][1] * j[1][2] - j[0][2] * j[1][1]) * inv_det;
        inv[1][0] = (j[1][2] * j[2][0] - j[1][0] * j[2][2]) * inv_det;
        inv[1][1] = (j[0][0] * j[2][2] - j[0][2] * j[2][0]) * inv_det;
        inv[1][2] = (j[0][2] * j[1][0] - j[0][0] * j[1][2]) * inv_det;
        inv[2][0] = (j[1][0] * j[2][1] - j[1][1] * j[2][0]) * inv_det;
        inv[2][1] = (j[0][1] * j[2][0] - j[0][0] * j[2][1]) * inv_det;
        inv[2][2] = (j[0][0] * j[1][1] - j[0][1] * j[1][0]) * inv_det;
        // j_inv_t[r][c] = inv[c][r]
        let j_inv_t = [
            [inv[0][0], inv[1][0], inv[2][0]],
            [inv[0][1], inv[1][1], inv[2][1]],
            [inv[0][2], inv[1][2], inv[2][2]],
        ];
        Ok(CellGeometry { det_j_abs: det.abs(), j_inv_t })
    }

    pub fn to_physical_grad(&self, g_ref: [f64; 3]) -> [f64; 3] {
        let m = &self.j_inv_t;
        [
            m[0][0] * g_ref[0] + m[0][1] * g_ref[1] + m[0][2] * g_ref[2],
            m[1][0] * g_ref[0] + m[1][1] * g_ref[1] + m[1][2] * g_ref[2],
            m[2][0] * g_ref[0] + m[2][1] * g_ref[1] + m[2][2] * g_ref[2],
        ]
    }

    /// Physical point for barycentric coordinates `l`.
    pub fn map_point(coords: [[f64; 3]; 4], l: [f64; 4]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (v, c) in coords.iter().enumerate() {
            for k in 0..3 {
                p[k] += l[v] * c[k];
            }
        }
        p
    }
}

/// Doubled area of a triangle, the facet integral Jacobian.
pub fn facet_double_area(coords: [[f64; 3]; 3]) -> f64 {
    let u = [
        coords[1][0] - coords[0][0],
        coords[1][1] - coords[0][1],
        coords[1][2] - coords[0][2],
    ];
    let v = [
        coords[2][0] - coords[0][0],
        coords[2][1] - coords[0][1],
        coords[2][2] - coords[0][2],
    ];
    let c = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

/// Physical point on a facet for triangle barycentric coordinates.
pub fn facet_map_point(coords: [[f64; 3]; 3], l: [f64; 4]) -> [f64; 3] {
    let mut p = [0.0; 3];
    for (v, c) in coords.iter().enumerate() {
        for k in 0..3 {
            p[k] += l[v] * c[k];
        }
    }
    p
}
