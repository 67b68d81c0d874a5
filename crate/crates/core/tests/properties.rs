//! Randomized invariants for geometry, sparse kernels, interpolation and
//! material tables.

use proptest::prelude::*;
use tfsolve_core::fem::{evaluate_scalar, interpolate_scalar, CellGeometry, FunctionSpace};
use tfsolve_core::krylov::CsrMatrix;
use tfsolve_core::mesh::{build_box_mesh, dihedral_angles_from_coords, geom};
use tfsolve_core::sim::PropertyTable;

fn rotate(p: [f64; 3], angles: [f64; 3]) -> [f64; 3] {
    let mut q = p;
    for (axis, &t) in angles.iter().enumerate() {
        let (s, c) = t.sin_cos();
        let i = (axis + 1) % 3;
        let j = (axis + 2) % 3;
        let (a, b) = (q[i], q[j]);
        q[i] = c * a - s * b;
        q[j] = s * a + c * b;
    }
    q
}

fn tet_volume(p: [[f64; 3]; 4]) -> f64 {
    let d = [geom::sub(p[1], p[0]), geom::sub(p[2], p[0]), geom::sub(p[3], p[0])];
    geom::dot(d[0], geom::cross(d[1], d[2])) / 6.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dihedral_angles_ignore_rigid_motions(
        jitter in prop::array::uniform4(prop::array::uniform3(-0.3f64..0.3)),
        angles in prop::array::uniform3(0.0f64..std::f64::consts::TAU),
        shift in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let base = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mut tet = [[0.0; 3]; 4];
        for v in 0..4 {
            tet[v] = geom::add(base[v], jitter[v]);
        }
        prop_assume!(tet_volume(tet).abs() > 0.02);
        let moved = tet.map(|p| geom::add(rotate(p, angles), shift));
        let original = dihedral_angles_from_coords(tet).unwrap();
        let transformed = dihedral_angles_from_coords(moved).unwrap();
        for (a, b) in original.iter().zip(&transformed) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn spmv_matches_the_dense_product(
        n in 1usize..8,
        m in 1usize..8,
        raw in prop::collection::vec((0usize..8, 0usize..8, -10.0f64..10.0), 0..40),
        x_raw in prop::collection::vec(-10.0f64..10.0, 8),
    ) {
        let triplets: Vec<(usize, usize, f64)> =
            raw.iter().map(|&(i, j, v)| (i % n, j % m, v)).collect();
        let a = CsrMatrix::from_triplets(n, m, &triplets).unwrap();
        let x = &x_raw[..m];
        let mut dense = vec![0.0; n];
        for &(i, j, v) in &triplets {
            dense[i] += v * x[j];
        }
        let sparse = a.spmv(x);
        for (s, d) in sparse.iter().zip(&dense) {
            prop_assert!((s - d).abs() <= 1e-12 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn interpolation_reproduces_matching_polynomials(
        coeff in prop::array::uniform10(-3.0f64..3.0),
        cell_pick in 0usize..12,
        bary_raw in prop::array::uniform4(0.01f64..1.0),
    ) {
        let mesh = build_box_mesh([0.0; 3], [1.0, 1.0, 2.0], 1, 1, 2).unwrap();
        let total: f64 = bary_raw.iter().sum();
        let bary = bary_raw.map(|v| v / total);
        let cell = cell_pick % mesh.cell_count();
        for degree in [1usize, 2] {
            let f = |p: [f64; 3]| {
                let quad = if degree == 2 {
                    coeff[4] * p[0] * p[0]
                        + coeff[5] * p[1] * p[1]
                        + coeff[6] * p[2] * p[2]
                        + coeff[7] * p[0] * p[1]
                        + coeff[8] * p[1] * p[2]
                        + coeff[9] * p[0] * p[2]
                } else {
                    0.0
                };
                coeff[0] + coeff[1] * p[0] + coeff[2] * p[1] + coeff[3] * p[2] + quad
            };
            let dm = FunctionSpace::new(&mesh, degree, 1).unwrap().build_dofmap();
            let coeffs = interpolate_scalar(&dm, f).unwrap();
            let uh = evaluate_scalar(&dm, &coeffs, cell, bary).unwrap();
            let exact = f(CellGeometry::map_point(mesh.cell_coords(cell), bary));
            prop_assert!((uh - exact).abs() <= 1e-12 * (1.0 + exact.abs()), "degree {degree}");
        }
    }

    #[test]
    fn property_tables_interpolate_and_clamp(
        offsets in prop::collection::vec(0.5f64..50.0, 2..8),
        values in prop::collection::vec(-100.0f64..100.0, 8),
        pick in 0.0f64..1.0,
    ) {
        let mut t = 200.0;
        let samples: Vec<(f64, f64)> = offsets
            .iter()
            .zip(&values)
            .map(|(&dt, &v)| {
                t += dt;
                (t, v)
            })
            .collect();
        let table = PropertyTable::new(&samples).unwrap();
        let (t_lo, v_lo) = samples[0];
        let (t_hi, v_hi) = samples[samples.len() - 1];
        prop_assert_eq!(table.eval(t_lo - 10.0), v_lo);
        prop_assert_eq!(table.eval(t_hi + 10.0), v_hi);
        let seg = ((pick * (samples.len() - 1) as f64) as usize).min(samples.len() - 2);
        let (ta, va) = samples[seg];
        let (tb, vb) = samples[seg + 1];
        let frac = pick.fract();
        let query = ta + frac * (tb - ta);
        let expected = va + frac * (vb - va);
        prop_assert!((table.eval(query) - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
    }
}
