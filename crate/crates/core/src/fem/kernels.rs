//! Element-level weak-form kernels.
//!
//! Every kernel integrates over one cell or one boundary facet with
//! coefficients already sampled at the quadrature points, so temperature
//! dependence is the caller's concern. Local dof order is node-major with
//! interleaved components.

use super::basis::{
    cell_node_count, eval_cell_basis, eval_cell_basis_grad, eval_facet_basis, facet_double_area,
    facet_node_count, CellGeometry, MAX_CELL_NODES, MAX_FACET_NODES,
};
use super::quadrature::QuadratureRule;
use super::ElasticModuli;
use crate::{Error, Result};

/// Symmetric 3x3 tensor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub yz: f64,
    pub xz: f64,
    pub xy: f64,
}

impl SymTensor3 {
    /// s times the identity.
    pub fn isotropic(s: f64) -> Self {
        SymTensor3 { xx: s, yy: s, zz: s, ..Default::default() }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn as_matrix(&self) -> [[f64; 3]; 3] {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }
}

fn check_samples(rule: &QuadratureRule, len: usize) -> Result<()> {
    if len != rule.len() {
        return Err(Error::DimensionMismatch { expected: rule.len(), got: len });
    }
    Ok(())
}

/// Stiffness ∫ κ ∇φa·∇φb and mass ∫ ρc φa φb over one cell.
pub fn element_thermal_matrices(
    coords: [[f64; 3]; 4],
    degree: usize,
    rule: &QuadratureRule,
    kappa_q: &[f64],
    rho_cv_q: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_samples(rule, kappa_q.len())?;
    check_samples(rule, rho_cv_q.len())?;
    let n = cell_node_count(degree)?;
    let geom = CellGeometry::new(coords)?;
    let mut ke = vec![0.0; n * n];
    let mut me = vec![0.0; n * n];
    let mut vals = [0.0; MAX_CELL_NODES];
    let mut grads_ref = [[0.0; 3]; MAX_CELL_NODES];
    let mut grads = [[0.0; 3]; MAX_CELL_NODES];

    for (q, (&l, &w)) in rule.points().iter().zip(rule.weights()).enumerate() {
        eval_cell_basis(degree, l, &mut vals);
        eval_cell_basis_grad(degree, l, &mut grads_ref);
        for a in 0..n {
            grads[a] = geom.to_physical_grad(grads_ref[a]);
        }
        let wk = w * geom.det_j_abs * kappa_q[q];
        let wm = w * geom.det_j_abs * rho_cv_q[q];
        for a in 0..n {
            for b in 0..n {
                let gdot =
                    grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1] + grads[a][2] * grads[b][2];
                ke[a * n + b] += wk * gdot;
                me[a * n + b] += wm * vals[a] * vals[b];
            }
        }
    }
    Ok((ke, me))
}

/// Surface mass ∫ β φa φb and load ∫ β T_bc φa over one boundary facet.
///
/// The returned arrays couple only the facet's own nodes; the caller maps
/// them to cell dofs.
pub fn element_robin_matrices(
    facet_coords: [[f64; 3]; 3],
    degree: usize,
    rule: &QuadratureRule,
    beta_q: &[f64],
    t_bc_q: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_samples(rule, beta_q.len())?;
    check_samples(rule, t_bc_q.len())?;
    let n = facet_node_count(degree)?;
    let double_area = facet_double_area(facet_coords);
    let mut re = vec![0.0; n * n];
    let mut rv = vec![0.0; n];
    let mut vals = [0.0; MAX_FACET_NODES];

    for (q, (&l, &w)) in rule.points().iter().zip(rule.weights()).enumerate() {
        eval_facet_basis(degree, l, &mut vals);
        let wb = w * double_area * beta_q[q];
        for a in 0..n {
            for b in 0..n {
                re[a * n + b] += wb * vals[a] * vals[b];
            }
            rv[a] += wb * t_bc_q[q] * vals[a];
        }
    }
    Ok((re, rv))
}

/// Elastic stiffness ∫ σ(φ) : ∇φ and thermal-stress load ∫ (C:ε_T) : ∇φ
/// over one cell. Local dofs are (node, component) interleaved, 3n total.
pub fn element_elastic_system(
    coords: [[f64; 3]; 4],
    degree: usize,
    rule: &QuadratureRule,
    moduli_q: &[ElasticModuli],
    thermal_strain_q: &[SymTensor3],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_samples(rule, moduli_q.len())?;
    check_samples(rule, thermal_strain_q.len())?;
    let n = cell_node_count(degree)?;
    let geom = CellGeometry::new(coords)?;
    let ndof = 3 * n;
    let mut ke = vec![0.0; ndof * ndof];
    let mut fe = vec![0.0; ndof];
    let mut grads_ref = [[0.0; 3]; MAX_CELL_NODES];
    let mut grads = [[0.0; 3]; MAX_CELL_NODES];

    for (q, (&l, &w)) in rule.points().iter().zip(rule.weights()).enumerate() {
        eval_cell_basis_grad(degree, l, &mut grads_ref);
        for a in 0..n {
            grads[a] = geom.to_physical_grad(grads_ref[a]);
        }
        let (lambda, mu) = moduli_q[q].lame();
        let wdet = w * geom.det_j_abs;

        // Thermal stress C : ε_T = 2 μ ε_T + λ tr(ε_T) I.
        let eps = thermal_strain_q[q];
        let tr = lambda * eps.trace();
        let stress = [
            [2.0 * mu * eps.xx + tr, 2.0 * mu * eps.xy, 2.0 * mu * eps.xz],
            [2.0 * mu * eps.xy, 2.0 * mu * eps.yy + tr, 2.0 * mu * eps.yz],
            [2.0 * mu * eps.xz, 2.0 * mu * eps.yz, 2.0 * mu * eps.zz + tr],
        ];

        for a in 0..n {
            let ga = grads[a];
            for i in 0..3 {
                fe[a * 3 + i] +=
                    wdet * (stress[i][0] * ga[0] + stress[i][1] * ga[1] + stress[i][2] * ga[2]);
            }
            for b in 0..n {
                let gb = grads[b];
                let gdot = ga[0] * gb[0] + ga[1] * gb[1] + ga[2] * gb[2];
                for i in 0..3 {
                    for j in 0..3 {
                        let mut v = lambda * ga[i] * gb[j] + mu * ga[j] * gb[i];
                        if i == j {
                            v += mu * gdot;
                        }
                        ke[(a * 3 + i) * ndof + (b * 3 + j)] += wdet * v;
                    }
                }
            }
        }
    }
    Ok((ke, fe))
}

/// Body load ∫ f·φ over one cell; 3n entries.
pub fn element_body_load(
    coords: [[f64; 3]; 4],
    degree: usize,
    rule: &QuadratureRule,
    f_q: &[[f64; 3]],
) -> Result<Vec<f64>> {
    check_samples(rule, f_q.len())?;
    let n = cell_node_count(degree)?;
    let geom = CellGeometry::new(coords)?;
    let mut fe = vec![0.0; 3 * n];
    let mut vals = [0.0; MAX_CELL_NODES];
    for (q, (&l, &w)) in rule.points().iter().zip(rule.weights()).enumerate() {
        eval_cell_basis(degree, l, &mut vals);
        let wdet = w * geom.det_j_abs;
        for a in 0..n {
            for i in 0..3 {
                fe[a * 3 + i] += wdet * f_q[q][i] * vals[a];
            }
        }
    }
    Ok(fe)
}

/// Facet load ∫ p (n·φ) with `normal` the outward unit normal; entries
/// for the facet's own nodes, components interleaved.
pub fn element_pressure_load(
    facet_coords: [[f64; 3]; 3],
    degree: usize,
    rule: &QuadratureRule,
    p_q: &[f64],
    normal: [f64; 3],
) -> Result<Vec<f64>> {
    check_samples(rule, p_q.len())?;
    let n = facet_node_count(degree)?;
    let double_area = facet_double_area(facet_coords);
    let mut fe = vec![0.0; 3 * n];
    let mut vals = [0.0; MAX_FACET_NODES];
    for (q, (&l, &w)) in rule.points().iter().zip(rule.weights()).enumerate() {
        eval_facet_basis(degree, l, &mut vals);
        let wp = w * double_area * p_q[q];
        for a in 0..n {
            for i in 0..3 {
                fe[a * 3 + i] += wp * normal[i] * vals[a];
            }
        }
    }
    Ok(fe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::{tet_quadrature, triangle_quadrature};

    const REF_TET: [[f64; 3]; 4] =
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    fn symmetry(m: &[f64], n: usize) -> f64 {
        let scale = m.iter().fold(1e-300f64, |s, v| s.max(v.abs()));
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                worst = worst.max((m[a * n + b] - m[b * n + a]).abs());
            }
        }
        worst / scale
    }

    #[test]
    fn thermal_reference_tet_oracle() {
        // grad λ0 = (-1,-1,-1), so K[0][0] = |grad|^2 × volume = 3/6.
        let rule = tet_quadrature(2).unwrap();
        let ones = vec![1.0; rule.len()];
        let (ke, me) = element_thermal_matrices(REF_TET, 1, &rule, &ones, &ones).unwrap();
        assert!((ke[0] - 0.5).abs() < 1e-14);
        // Row sums vanish: constants in the nullspace.
        for a in 0..4 {
            let s: f64 = (0..4).map(|b| ke[a * 4 + b]).sum();
            assert!(s.abs() < 1e-14);
        }
        // Mass entries sum to the volume.
        let total: f64 = me.iter().sum();
        assert!((total - 1.0 / 6.0).abs() < 1e-14);
        assert!(symmetry(&ke, 4) < 1e-14);
        assert!(symmetry(&me, 4) < 1e-14);
    }

    #[test]
    fn thermal_matrices_scale_with_coefficients() {
        let rule = tet_quadrature(2).unwrap();
        let ones = vec![1.0; rule.len()];
        let fives = vec![5.0; rule.len()];
        let (k1, m1) = element_thermal_matrices(REF_TET, 1, &rule, &ones, &ones).unwrap();
        let (k5, m5) = element_thermal_matrices(REF_TET, 1, &rule, &fives, &fives).unwrap();
        for (a, b) in k1.iter().zip(&k5) {
            assert!((5.0 * a - b).abs() < 1e-13);
        }
        for (a, b) in m1.iter().zip(&m5) {
            assert!((5.0 * a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn p2_thermal_row_sums_vanish_on_skewed_cell() {
        let coords = [[0.1, 0.0, 0.2], [1.3, 0.1, 0.0], [0.2, 1.1, 0.3], [0.0, 0.2, 0.9]];
        let rule = tet_quadrature(4).unwrap();
        let ones = vec![1.0; rule.len()];
        let (ke, me) = element_thermal_matrices(coords, 2, &rule, &ones, &ones).unwrap();
        let scale = ke.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for a in 0..10 {
            let s: f64 = (0..10).map(|b| ke[a * 10 + b]).sum();
            assert!(s.abs() < 1e-13 * scale, "row {a}: {s}");
        }
        assert!(symmetry(&ke, 10) < 1e-14);
        assert!(symmetry(&me, 10) < 1e-14);
    }

    #[test]
    fn robin_matrix_sums_to_beta_area() {
        let tri = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let rule = triangle_quadrature(2).unwrap();
        let beta = vec![1.0; rule.len()];
        let tbc = vec![300.0; rule.len()];
        let (re, rv) = element_robin_matrices(tri, 1, &rule, &beta, &tbc).unwrap();
        let total: f64 = re.iter().sum();
        assert!((total - 0.5).abs() < 1e-14, "area sum {total}");
        assert!(symmetry(&re, 3) < 1e-14);
        // Constant T_bc: vector = T_bc × row sums.
        for a in 0..3 {
            let row: f64 = (0..3).map(|b| re[a * 3 + b]).sum();
            assert!((rv[a] - 300.0 * row).abs() < 1e-11);
        }
    }

    #[test]
    fn robin_with_zero_beta_is_zero() {
        let tri = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 3.0, 1.0]];
        let rule = triangle_quadrature(4).unwrap();
        let beta = vec![0.0; rule.len()];
        let tbc = vec![1000.0; rule.len()];
        let (re, rv) = element_robin_matrices(tri, 2, &rule, &beta, &tbc).unwrap();
        assert!(re.iter().all(|&v| v == 0.0));
        assert!(rv.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn elastic_zero_thermal_strain_gives_zero_load() {
        let rule = tet_quadrature(2).unwrap();
        let moduli = vec![ElasticModuli::new(10.0, 0.25).unwrap(); rule.len()];
        let strain = vec![SymTensor3::default(); rule.len()];
        let (ke, fe) = element_elastic_system(REF_TET, 1, &rule, &moduli, &strain).unwrap();
        assert!(fe.iter().all(|&v| v == 0.0));
        assert!(symmetry(&ke, 12) < 1e-14);
    }

    #[test]
    fn isotropic_thermal_strain_formula() {
        let alpha = 1e-5;
        let eps = SymTensor3::isotropic(alpha * (500.0 - 300.0));
        assert!((eps.xx - 2e-3).abs() < 1e-18);
        assert!((eps.trace() - 6e-3).abs() < 1e-17);
        assert_eq!(eps.xy, 0.0);
    }

    #[test]
    fn elastic_kernel_annihilates_rigid_motions() {
        let coords = [[0.2, 0.1, 0.0], [1.1, 0.3, 0.2], [0.4, 1.2, 0.1], [0.3, 0.2, 1.4]];
        let rule = tet_quadrature(2).unwrap();
        let moduli = vec![ElasticModuli::new(200e9, 0.3).unwrap(); rule.len()];
        let strain = vec![SymTensor3::default(); rule.len()];
        let (ke, _) = element_elastic_system(coords, 1, &rule, &moduli, &strain).unwrap();
        let scale = ke.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        // Translations and infinitesimal rotations evaluated at nodes.
        let modes: [&dyn Fn([f64; 3]) -> [f64; 3]; 6] = [
            &|_| [1.0, 0.0, 0.0],
            &|_| [0.0, 1.0, 0.0],
            &|_| [0.0, 0.0, 1.0],
            &|p| [-p[1], p[0], 0.0],
            &|p| [0.0, -p[2], p[1]],
            &|p| [p[2], 0.0, -p[0]],
        ];
        for (m, mode) in modes.iter().enumerate() {
            let mut u = [0.0; 12];
            for (v, c) in coords.iter().enumerate() {
                let val = mode(*c);
                u[v * 3] = val[0];
                u[v * 3 + 1] = val[1];
                u[v * 3 + 2] = val[2];
            }
            for row in 0..12 {
                let r: f64 = (0..12).map(|col| ke[row * 12 + col] * u[col]).sum();
                assert!(r.abs() < 1e-12 * scale, "mode {m} row {row}: {r}");
            }
        }
    }

    #[test]
    fn elastic_uniform_strain_matches_hookes_law() {
        // u = (c x, 0, 0) has strain e_xx = c; K u must equal the load of
        // the matching stress field, checked through energy: uᵀKu =
        // volume × (λ + 2μ) c².
        let rule = tet_quadrature(2).unwrap();
        let m = ElasticModuli::new(7.0, 0.2).unwrap();
        let (lambda, mu) = m.lame();
        let moduli = vec![m; rule.len()];
        let strain = vec![SymTensor3::default(); rule.len()];
        let (ke, _) = element_elastic_system(REF_TET, 1, &rule, &moduli, &strain).unwrap();
        let c = 0.01;
        let mut u = [0.0; 12];
        for (v, p) in REF_TET.iter().enumerate() {
            u[v * 3] = c * p[0];
        }
        let energy: f64 = (0..12)
            .map(|i| (0..12).map(|j| u[i] * ke[i * 12 + j] * u[j]).sum::<f64>())
            .sum();
        let expect = (lambda + 2.0 * mu) * c * c / 6.0;
        assert!((energy - expect).abs() < 1e-14, "{energy} vs {expect}");
    }

    #[test]
    fn thermal_stress_load_balances_uniform_expansion() {
        // For ε_T = s I, the load is ∫ (3λ+2μ)s div(φ); acting on the
        // interpolant of u = s x it returns the same energy as K.
        let rule = tet_quadrature(2).unwrap();
        let m = ElasticModuli::new(3.0, 0.1).unwrap();
        let moduli = vec![m; rule.len()];
        let s = 2e-3;
        let strain = vec![SymTensor3::isotropic(s); rule.len()];
        let (ke, fe) = element_elastic_system(REF_TET, 1, &rule, &moduli, &strain).unwrap();
        // u = s x exactly: K u = f for a single unconstrained cell under
        // free expansion (both sides live in the same polynomial space).
        let mut u = [0.0; 12];
        for (v, p) in REF_TET.iter().enumerate() {
            for k in 0..3 {
                u[v * 3 + k] = s * p[k];
            }
        }
        for row in 0..12 {
            let ku: f64 = (0..12).map(|col| ke[row * 12 + col] * u[col]).sum();
            assert!((ku - fe[row]).abs() < 1e-15, "row {row}: {ku} vs {}", fe[row]);
        }
    }

    #[test]
    fn body_load_totals_force_times_volume() {
        let rule = tet_quadrature(2).unwrap();
        let g = 9.81;
        let f = vec![[0.0, 0.0, -g]; rule.len()];
        let fe = element_body_load(REF_TET, 1, &rule, &f).unwrap();
        let z_total: f64 = (0..4).map(|a| fe[a * 3 + 2]).sum();
        assert!((z_total + g / 6.0).abs() < 1e-14);
        let x_total: f64 = (0..4).map(|a| fe[a * 3]).sum();
        assert!(x_total.abs() < 1e-16);
    }

    #[test]
    fn pressure_load_totals_p_times_area_along_normal() {
        let tri = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let rule = triangle_quadrature(2).unwrap();
        let p = vec![7.0; rule.len()];
        let n = [0.0, 0.0, -1.0];
        let fe = element_pressure_load(tri, 1, &rule, &p, n).unwrap();
        let dotted: f64 = (0..3).map(|a| {
            fe[a * 3] * n[0] + fe[a * 3 + 1] * n[1] + fe[a * 3 + 2] * n[2]
        })
        .sum();
        assert!((dotted - 7.0 * 0.5).abs() < 1e-13);
    }

    #[test]
    fn sample_length_mismatch_is_an_error() {
        let rule = tet_quadrature(2).unwrap();
        let short = vec![1.0; rule.len() - 1];
        let ones = vec![1.0; rule.len()];
        assert!(matches!(
            element_thermal_matrices(REF_TET, 1, &rule, &short, &ones),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
