//! Shared fixtures for the integration tests.

use tfsolve_core::fem::{
    build_pattern, element_thermal_matrices, scatter_matrix, tet_quadrature, DofMap,
    FunctionSpace,
};
use tfsolve_core::krylov::{apply_dirichlet, CsrMatrix};
use tfsolve_core::mesh::{build_box_mesh, Mesh};

/// True when `p` lies on a face of the unit cube.
pub fn on_unit_cube_boundary(p: [f64; 3]) -> bool {
    p.iter().any(|&x| x.abs() < 1e-12 || (x - 1.0).abs() < 1e-12)
}

/// Unit-cube Poisson system with Dirichlet data `g` eliminated on every
/// boundary node: returns the mesh, dof map, constrained matrix and right
/// hand side. The interior load is zero, so the discrete solution
/// approximates the harmonic extension of `g`.
pub fn poisson_dirichlet_system(
    n: usize,
    degree: usize,
    g: impl Fn([f64; 3]) -> f64,
) -> (Mesh, DofMap, CsrMatrix, Vec<f64>) {
    let mesh = build_box_mesh([0.0; 3], [1.0; 3], n, n, n).unwrap();
    let space = FunctionSpace::new(&mesh, degree, 1).unwrap();
    let dm = space.build_dofmap();
    let mut a = build_pattern(&dm).unwrap();
    let rule = tet_quadrature(2 * degree.max(1)).unwrap();
    let kappa = vec![1.0; rule.len()];
    let rho_cv = vec![0.0; rule.len()];
    let mut dofs = Vec::new();
    for c in 0..mesh.cell_count() {
        let (k, _) =
            element_thermal_matrices(mesh.cell_coords(c), degree, &rule, &kappa, &rho_cv)
                .unwrap();
        dm.cell_dofs_into(c, &mut dofs);
        scatter_matrix(&mut a, &dofs, &dofs, &k);
    }
    let mut b = vec![0.0; dm.n_dofs()];
    let constraints: Vec<(usize, f64)> = dm
        .node_coords()
        .iter()
        .enumerate()
        .filter(|&(_, &p)| on_unit_cube_boundary(p))
        .map(|(i, &p)| (i, g(p)))
        .collect();
    assert!(!constraints.is_empty());
    apply_dirichlet(&mut a, &mut b, &constraints).unwrap();
    (mesh, dm, a, b)
}
