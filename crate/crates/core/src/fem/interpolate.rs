//! Nodal interpolation, point evaluation and L2 norms.

use super::basis::{eval_cell_basis, CellGeometry, MAX_CELL_NODES};
use super::quadrature::tet_quadrature;
use super::DofMap;
use crate::mesh::Mesh;
use crate::{Error, Result};

fn check_value_size(dm: &DofMap, expected: usize) -> Result<()> {
    if dm.value_size() != expected {
        return Err(Error::DimensionMismatch { expected, got: dm.value_size() });
    }
    Ok(())
}

/// Evaluates `f` at every node of a scalar space.
pub fn interpolate_scalar(dm: &DofMap, f: impl Fn([f64; 3]) -> f64) -> Result<Vec<f64>> {
    check_value_size(dm, 1)?;
    Ok(dm.node_coords().iter().map(|&p| f(p)).collect())
}

/// Evaluates `f` at every node of a vector space, components interleaved.
pub fn interpolate_vector(dm: &DofMap, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<Vec<f64>> {
    check_value_size(dm, 3)?;
    let mut coeffs = Vec::with_capacity(dm.n_dofs());
    for &p in dm.node_coords() {
        coeffs.extend_from_slice(&f(p));
    }
    Ok(coeffs)
}

fn check_point(bary: [f64; 4]) -> Result<()> {
    let sum: f64 = bary.iter().sum();
    if bary.iter().any(|&l| l < -1e-10) || (sum - 1.0).abs() > 1e-10 {
        return Err(Error::PointOutsideCell(bary));
    }
    Ok(())
}

/// Value of a scalar field at barycentric point `bary` of cell `c`.
pub fn evaluate_scalar(dm: &DofMap, coeffs: &[f64], c: usize, bary: [f64; 4]) -> Result<f64> {
    check_value_size(dm, 1)?;
    check_point(bary)?;
    let mut vals = [0.0; MAX_CELL_NODES];
    eval_cell_basis(dm.degree(), bary, &mut vals);
    Ok(dm.cell_nodes(c).iter().zip(&vals).map(|(&n, v)| coeffs[n] * v).sum())
}

/// Value of a vector field at barycentric point `bary` of cell `c`.
pub fn evaluate_vector(dm: &DofMap, coeffs: &[f64], c: usize, bary: [f64; 4]) -> Result<[f64; 3]> {
    check_value_size(dm, 3)?;
    check_point(bary)?;
    let mut vals = [0.0; MAX_CELL_NODES];
    eval_cell_basis(dm.degree(), bary, &mut vals);
    let mut out = [0.0; 3];
    for (&node, v) in dm.cell_nodes(c).iter().zip(&vals) {
        for k in 0..3 {
            out[k] += coeffs[node * 3 + k] * v;
        }
    }
    Ok(out)
}

/// L2 norm of the difference between a scalar field and `exact`,
/// integrated with the degree-4 rule.
pub fn l2_error_scalar(
    mesh: &Mesh,
    dm: &DofMap,
    coeffs: &[f64],
    exact: &dyn Fn([f64; 3]) -> f64,
) -> Result<f64> {
    check_value_size(dm, 1)?;
    let rule = tet_quadrature(4)?;
    let mut vals = [0.0; MAX_CELL_NODES];
    let mut total = 0.0;
    for c in 0..mesh.cell_count() {
        let coords = mesh.cell_coords(c);
        let geom = CellGeometry::new(coords)?;
        let nodes = dm.cell_nodes(c);
        for (&l, &w) in rule.points().iter().zip(rule.weights()) {
            eval_cell_basis(dm.degree(), l, &mut vals);
            let uh: f64 = nodes.iter().zip(&vals).map(|(&n, v)| coeffs[n] * v).sum();
            let x = CellGeometry::map_point(coords, l);
            let diff = uh - exact(x);
            total += w * geom.det_j_abs * diff * diff;
        }
    }
    Ok(total.sqrt())
}

/// L2 norm of a scalar field.
pub fn l2_norm_scalar(mesh: &Mesh, dm: &DofMap, coeffs: &[f64]) -> Result<f64> {
    l2_error_scalar(mesh, dm, coeffs, &|_| 0.0)
}
