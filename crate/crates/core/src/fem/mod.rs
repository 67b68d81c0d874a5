//! Lagrange function spaces, dof maps, quadrature and element kernels.

mod assemble;
mod basis;
mod interpolate;
mod kernels;
mod quadrature;

pub use assemble::{build_pattern, scatter_matrix, scatter_vector};
pub use basis::{
    cell_node_count, eval_cell_basis, eval_cell_basis_grad, eval_facet_basis, facet_double_area,
    facet_map_point, facet_node_count, CellGeometry, FACET_EDGES, MAX_CELL_NODES, MAX_FACET_NODES,
};
pub use interpolate::{
    evaluate_scalar, evaluate_vector, interpolate_scalar, interpolate_vector, l2_error_scalar,
    l2_norm_scalar,
};
pub use kernels::{
    element_body_load, element_elastic_system, element_pressure_load, element_robin_matrices,
    element_thermal_matrices, SymTensor3,
};
pub use quadrature::{tet_quadrature, triangle_quadrature, FacetQuadratureRule, QuadratureRule};

use crate::mesh::{Mesh, CELL_EDGES};
use crate::{Error, Result};

/// Isotropic elastic moduli with the derived Lamé pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticModuli {
    young: f64,
    poisson: f64,
}

impl ElasticModuli {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) || !(poisson > -1.0 && poisson < 0.5) {
            return Err(Error::InvalidModuli { young, poisson });
        }
        Ok(ElasticModuli { young, poisson })
    }

    pub fn young(&self) -> f64 {
        self.young
    }

    pub fn poisson(&self) -> f64 {
        self.poisson
    }

    /// (λ, μ)
    pub fn lame(&self) -> (f64, f64) {
        let lambda =
            self.young * self.poisson / ((1.0 + self.poisson) * (1.0 - 2.0 * self.poisson));
        let mu = self.young / (2.0 * (1.0 + self.poisson));
        (lambda, mu)
    }
}

/// A conforming Lagrange space of degree 1 or 2 with scalar (1) or
/// vector (3) values.
#[derive(Debug)]
pub struct FunctionSpace<'m> {
    mesh: &'m Mesh,
    degree: usize,
    value_size: usize,
    /// Sorted unique vertex pairs; populated only for degree 2, where
    /// edge midpoints carry dofs.
    edges: Vec<[usize; 2]>,
}

impl<'m> FunctionSpace<'m> {
    pub fn new(mesh: &'m Mesh, degree: usize, value_size: usize) -> Result<Self> {
        if degree != 1 && degree != 2 {
            return Err(Error::UnsupportedDegree(degree));
        }
        if value_size != 1 && value_size != 3 {
            return Err(Error::InvalidConfig(format!(
                "value size must be 1 or 3, got {value_size}"
            )));
        }
        let edges = if degree == 2 { unique_edges(mesh) } else { Vec::new() };
        Ok(FunctionSpace { mesh, degree, value_size, edges })
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn value_size(&self) -> usize {
        self.value_size
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_count(&self) -> usize {
        self.mesh.vertex_count() + self.edges.len()
    }

    pub fn dof_count(&self) -> usize {
        self.node_count() * self.value_size
    }

    /// Global node id of the edge dof between vertices `u` and `v`.
    fn edge_node(&self, u: usize, v: usize) -> usize {
        let key = if u < v { [u, v] } else { [v, u] };
        self.mesh.vertex_count()
            + self.edges.binary_search(&key).expect("cell edge present in edge list")
    }

    /// Builds the cell-to-node map with vertex nodes first, then edge
    /// nodes, and node coordinates for interpolation.
    pub fn build_dofmap(&self) -> DofMap {
        let nodes_per_cell = if self.degree == 1 { 4 } else { 10 };
        let mut cell_nodes = Vec::with_capacity(self.mesh.cell_count() * nodes_per_cell);
        for cell in self.mesh.cells() {
            cell_nodes.extend_from_slice(cell);
            if self.degree == 2 {
                for [a, b] in CELL_EDGES {
                    cell_nodes.push(self.edge_node(cell[a], cell[b]));
                }
            }
        }
        let mut node_coords = self.mesh.vertices().to_vec();
        node_coords.reserve(self.edges.len());
        for &[u, v] in &self.edges {
            let (p, q) = (self.mesh.vertex(u), self.mesh.vertex(v));
            node_coords.push([
                0.5 * (p[0] + q[0]),
                0.5 * (p[1] + q[1]),
                0.5 * (p[2] + q[2]),
            ]);
        }
        DofMap {
            n_dofs: self.dof_count(),
            value_size: self.value_size,
            degree: self.degree,
            nodes_per_cell,
            cell_nodes,
            node_coords,
        }
    }
}

/// Sorted unique vertex pairs over all cell edges.
pub(crate) fn unique_edges(mesh: &Mesh) -> Vec<[usize; 2]> {
    let mut edges: Vec<[usize; 2]> = Vec::with_capacity(mesh.cell_count() * 6);
    for cell in mesh.cells() {
        for [a, b] in CELL_EDGES {
            let (u, v) = (cell[a], cell[b]);
            edges.push(if u < v { [u, v] } else { [v, u] });
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Cell-to-global-dof numbering plus node coordinates.
///
/// Nodes are vertices then edge midpoints; a node's dofs are interleaved,
/// so dof = node × value_size + component.
#[derive(Debug, Clone)]
pub struct DofMap {
    n_dofs: usize,
    value_size: usize,
    degree: usize,
    nodes_per_cell: usize,
    cell_nodes: Vec<usize>,
    node_coords: Vec<[f64; 3]>,
}

impl DofMap {
    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn node_count(&self) -> usize {
        self.node_coords.len()
    }

    pub fn value_size(&self) -> usize {
        self.value_size
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.nodes_per_cell
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.nodes_per_cell * self.value_size
    }

    pub fn cell_count(&self) -> usize {
        self.cell_nodes.len() / self.nodes_per_cell
    }

    pub fn cell_nodes(&self, c: usize) -> &[usize] {
        &self.cell_nodes[c * self.nodes_per_cell..(c + 1) * self.nodes_per_cell]
    }

    /// Appends the cell's global dofs in local order (node-major,
    /// components interleaved) to `out`.
    pub fn cell_dofs_into(&self, c: usize, out: &mut Vec<usize>) {
        out.clear();
        for &node in self.cell_nodes(c) {
            for comp in 0..self.value_size {
                out.push(node * self.value_size + comp);
            }
        }
    }

    pub fn node_coords(&self) -> &[[f64; 3]] {
        &self.node_coords
    }

    pub fn dof_node(&self, dof: usize) -> usize {
        dof / self.value_size
    }

    pub fn dof_component(&self, dof: usize) -> usize {
        dof % self.value_size
    }
}
