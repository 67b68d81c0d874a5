//! Quasi-static linear elasticity with thermal expansion.
//!
//! Solves K u = f where the stiffness uses the temperature-interpolated
//! Young's modulus and the load collects thermal expansion against the
//! reference temperature, scheduled surface pressures, and an optional
//! constant body force. Displacement boundary regions pin whole facets;
//! additional point constraints can pin individual dofs. The system is
//! solved by CG with a smoothed-aggregation hierarchy whose near-nullspace
//! is the rigid body modes restricted to the free dofs.

use rayon::prelude::*;

use crate::amg::{
    build_smoothed_aggregation, rigid_body_modes, AmgHierarchy, NearNullspace, SaOptions,
    SA_STRENGTH_THRESHOLD_P1, SA_STRENGTH_THRESHOLD_P2,
};
use crate::error::Error;
use crate::fem::{
    build_pattern, cell_node_count, element_body_load, element_elastic_system,
    element_pressure_load, eval_cell_basis, eval_cell_basis_grad, facet_node_count,
    scatter_matrix, scatter_vector, tet_quadrature, triangle_quadrature, CellGeometry, DofMap,
    QuadratureRule, SymTensor3, MAX_CELL_NODES,
};
use crate::krylov::dense::{symmetric_eigen, DenseMatrix};
use crate::krylov::{apply_dirichlet, cg, CsrMatrix};
use crate::mesh::Mesh;
use crate::sim::{facet_nodes, BoundaryCondition, BoundarySchedule, MaterialTable};
use crate::Result;

/// Cells per parallel assembly batch; see the thermal counterpart.
const ASSEMBLY_CHUNK: usize = 4096;

/// Default relative tolerance of the displacement solve.
pub const ELASTIC_RTOL: f64 = 1e-6;

const MODE_NAMES: [&str; 6] = [
    "translation-x",
    "translation-y",
    "translation-z",
    "rotation-x",
    "rotation-y",
    "rotation-z",
];

/// Elasticity on a fixed mesh; shares mesh, materials and schedule with the
/// thermal problem but owns the vector-valued dof map.
pub struct ElasticProblem<'a> {
    pub mesh: &'a Mesh,
    pub dofmap: &'a DofMap,
    pub materials: &'a MaterialTable,
    pub schedule: &'a BoundarySchedule,
    /// Constant volumetric load, e.g. gravity times density.
    pub body_force: [f64; 3],
    /// Extra `u[dof] = value` pins beyond the scheduled facet regions.
    pub point_constraints: Vec<(usize, f64)>,
    pub parallel_assembly: bool,
}

impl<'a> ElasticProblem<'a> {
    pub fn new(
        mesh: &'a Mesh,
        dofmap: &'a DofMap,
        materials: &'a MaterialTable,
        schedule: &'a BoundarySchedule,
    ) -> Result<Self> {
        if dofmap.value_size() != 3 {
            return Err(Error::InvalidConfig(format!(
                "elastic problem needs a vector space, got value size {}",
                dofmap.value_size()
            )));
        }
        Ok(Self {
            mesh,
            dofmap,
            materials,
            schedule,
            body_force: [0.0; 3],
            point_constraints: Vec::new(),
            parallel_assembly: true,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ElasticSolveOptions {
    pub krylov_rtol: f64,
    pub max_krylov: usize,
    /// Keep rotations in the near-nullspace; translations-only is the
    /// degraded variant used for comparison studies.
    pub use_rotations: bool,
    /// Aggregation strength threshold; `None` picks a default per degree.
    pub strength_threshold: Option<f64>,
    /// Scales the smoothing eigenvalue estimate; diagnostic knob.
    pub lambda_scale: f64,
}

impl Default for ElasticSolveOptions {
    fn default() -> Self {
        Self {
            krylov_rtol: ELASTIC_RTOL,
            max_krylov: 1000,
            use_rotations: true,
            strength_threshold: None,
            lambda_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ElasticReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub built_preconditioner: bool,
    /// Wall seconds of assembly and constraint application.
    pub assembly_seconds: f64,
    /// Wall seconds of the hierarchy build; zero on reuse.
    pub precond_seconds: f64,
    /// Wall seconds of the Krylov solve.
    pub krylov_seconds: f64,
}

struct CellSystem {
    ke: Vec<f64>,
    fe: Vec<f64>,
}

fn cell_elastic_system(
    problem: &ElasticProblem,
    rule: &QuadratureRule,
    cell: usize,
    temperature: &[f64],
) -> Result<CellSystem> {
    let dm = problem.dofmap;
    let n = cell_node_count(dm.degree())?;
    let nodes = dm.cell_nodes(cell);
    let coords = problem.mesh.cell_coords(cell);
    let material = problem.materials.get(problem.mesh.cell_region(cell))?;

    let mut vals = [0.0; MAX_CELL_NODES];
    let mut moduli_q = Vec::with_capacity(rule.len());
    let mut strain_q = Vec::with_capacity(rule.len());
    for &l in rule.points() {
        eval_cell_basis(dm.degree(), l, &mut vals);
        let mut t_q = 0.0;
        for a in 0..n {
            t_q += vals[a] * temperature[nodes[a]];
        }
        moduli_q.push(material.moduli_at(t_q)?);
        strain_q.push(SymTensor3::isotropic(
            material.alpha.eval(t_q) * (t_q - material.t_ref),
        ));
    }

    let (ke, mut fe) = element_elastic_system(coords, dm.degree(), rule, &moduli_q, &strain_q)?;
    if problem.body_force != [0.0; 3] {
        let f_q = vec![problem.body_force; rule.len()];
        let body = element_body_load(coords, dm.degree(), rule, &f_q)?;
        for (fi, bi) in fe.iter_mut().zip(&body) {
            *fi += bi;
        }
    }
    Ok(CellSystem { ke, fe })
}

/// Stiffness and load at the given time and nodal temperature field.
pub fn assemble_elastic(
    problem: &ElasticProblem,
    time: f64,
    temperature: &[f64],
) -> Result<(CsrMatrix, Vec<f64>)> {
    let dm = problem.dofmap;
    if temperature.len() != dm.node_count() {
        return Err(Error::DimensionMismatch {
            expected: dm.node_count(),
            got: temperature.len(),
        });
    }
    let mut stiffness = build_pattern(dm)?;
    let mut load = vec![0.0; dm.n_dofs()];

    let rule = tet_quadrature(2 * dm.degree())?;
    let n_cells = problem.mesh.cell_count();
    let mut dofs = Vec::new();
    let mut chunk = Vec::new();
    for start in (0..n_cells).step_by(ASSEMBLY_CHUNK) {
        let end = (start + ASSEMBLY_CHUNK).min(n_cells);
        chunk.clear();
        if problem.parallel_assembly {
            (start..end)
                .into_par_iter()
                .map(|c| cell_elastic_system(problem, &rule, c, temperature))
                .collect_into_vec(&mut chunk);
        } else {
            chunk.extend((start..end).map(|c| cell_elastic_system(problem, &rule, c, temperature)));
        }
        for (c, sys) in (start..end).zip(chunk.drain(..)) {
            let sys = sys?;
            dm.cell_dofs_into(c, &mut dofs);
            scatter_matrix(&mut stiffness, &dofs, &dofs, &sys.ke);
            scatter_vector(&mut load, &dofs, &sys.fe);
        }
    }

    let degree = dm.degree();
    let nf = facet_node_count(degree)?;
    let facet_rule = triangle_quadrature(2 * degree)?;
    for (facet, cell, tag) in problem.mesh.tagged_facet_owners() {
        let Some(BoundaryCondition::Pressure { .. }) = problem.schedule.condition(tag) else {
            continue;
        };
        let p = problem.schedule.eval_pressure(tag, time)?;
        let coords = facet.map(|v| problem.mesh.vertex(v));
        let normal = problem.mesh.facet_outward_normal(cell, facet)?;
        let p_q = vec![p; facet_rule.len()];
        let fe = element_pressure_load(coords, degree, &facet_rule, &p_q, normal)?;
        let nodes = facet_nodes(dm, problem.mesh.cell(cell), cell, facet);
        let mut facet_dofs = Vec::with_capacity(3 * nf);
        for &node in &nodes[..nf] {
            for comp in 0..3 {
                facet_dofs.push(node * 3 + comp);
            }
        }
        scatter_vector(&mut load, &facet_dofs, &fe);
    }
    Ok((stiffness, load))
}

/// All `u[dof] = value` constraints active at the given time: scheduled
/// displacement facets plus the problem's point constraints.
pub fn dirichlet_constraints(problem: &ElasticProblem, time: f64) -> Result<Vec<(usize, f64)>> {
    let dm = problem.dofmap;
    let nf = facet_node_count(dm.degree())?;
    let mut constraints = Vec::new();
    for (facet, cell, tag) in problem.mesh.tagged_facet_owners() {
        let Some(BoundaryCondition::Displacement { .. }) = problem.schedule.condition(tag) else {
            continue;
        };
        let value = problem.schedule.eval_displacement(tag, time)?;
        let nodes = facet_nodes(dm, problem.mesh.cell(cell), cell, facet);
        for &node in &nodes[..nf] {
            for comp in 0..3 {
                constraints.push((node * 3 + comp, value[comp]));
            }
        }
    }
    constraints.extend_from_slice(&problem.point_constraints);
    Ok(constraints)
}

/// Errors when the constraints leave a rigid motion free, naming the
/// offending modes. A motion is free when the rigid modes restricted to
/// the constrained dofs are rank deficient.
fn check_rigid_constraints(dm: &DofMap, constraints: &[(usize, f64)]) -> Result<()> {
    let modes = rigid_body_modes(dm)?;
    let vectors = modes.vectors();
    let mut constrained = vec![false; dm.n_dofs()];
    for &(dof, _) in constraints {
        if dof >= dm.n_dofs() {
            return Err(Error::IndexOutOfRange { what: "dof", index: dof, bound: dm.n_dofs() });
        }
        constrained[dof] = true;
    }

    let k = vectors.len();
    let mut gram = DenseMatrix::zeros(k, k);
    for (dof, &c) in constrained.iter().enumerate() {
        if !c {
            continue;
        }
        for i in 0..k {
            for j in i..k {
                let v = vectors[i][dof] * vectors[j][dof];
                gram[(i, j)] += v;
                if i != j {
                    gram[(j, i)] += v;
                }
            }
        }
    }

    let (eigs, vecs) = symmetric_eigen(&gram)?;
    let mut names = Vec::new();
    for (col, &lambda) in eigs.iter().enumerate() {
        if lambda > 1e-10 {
            continue;
        }
        let max = (0..k).map(|i| vecs[(i, col)].abs()).fold(0.0, f64::max);
        for i in 0..k {
            if vecs[(i, col)].abs() >= 0.5 * max {
                names.push(MODE_NAMES[i].to_string());
            }
        }
    }
    if names.is_empty() {
        return Ok(());
    }
    names.sort();
    names.dedup();
    Err(Error::UnconstrainedRigidModes(names))
}

/// Rigid body modes with constrained dofs zeroed, re-orthonormalized.
/// Dropping rotations leaves the three translations, the deliberately
/// incomplete variant.
fn constrained_nullspace(
    dm: &DofMap,
    constraints: &[(usize, f64)],
    use_rotations: bool,
) -> Result<NearNullspace> {
    let modes = rigid_body_modes(dm)?;
    let keep = if use_rotations { 6 } else { 3 };
    let mut vectors: Vec<Vec<f64>> = modes.vectors()[..keep].to_vec();
    for &(dof, _) in constraints {
        for v in &mut vectors {
            v[dof] = 0.0;
        }
    }
    NearNullspace::from_vectors(vectors, 3)
}

/// Assembles and solves the displacement system for one temperature field.
///
/// The hierarchy in `cache` is reused when present; the stiffness drifts
/// with temperature but stays spectrally close, so one hierarchy serves a
/// whole transient run.
pub fn solve_elastic(
    problem: &ElasticProblem,
    time: f64,
    temperature: &[f64],
    opts: &ElasticSolveOptions,
    cache: &mut Option<AmgHierarchy>,
) -> Result<(Vec<f64>, ElasticReport)> {
    let assembly_started = std::time::Instant::now();
    let (mut stiffness, mut load) = assemble_elastic(problem, time, temperature)?;
    let constraints = dirichlet_constraints(problem, time)?;
    check_rigid_constraints(problem.dofmap, &constraints)?;
    apply_dirichlet(&mut stiffness, &mut load, &constraints)?;
    let assembly_seconds = assembly_started.elapsed().as_secs_f64();

    let precond_started = std::time::Instant::now();
    let mut built = false;
    if cache.is_none() {
        let nullspace = constrained_nullspace(problem.dofmap, &constraints, opts.use_rotations)?;
        let strength = opts.strength_threshold.unwrap_or(if problem.dofmap.degree() == 1 {
            SA_STRENGTH_THRESHOLD_P1
        } else {
            SA_STRENGTH_THRESHOLD_P2
        });
        let sa = SaOptions {
            strength_threshold: strength,
            lambda_scale: opts.lambda_scale,
            ..Default::default()
        };
        *cache = Some(build_smoothed_aggregation(&stiffness, &nullspace, &sa)?);
        built = true;
    }
    let pc = cache.as_ref().expect("preconditioner built above");
    let precond_seconds = precond_started.elapsed().as_secs_f64();

    let krylov_started = std::time::Instant::now();
    let (u, rep) = cg(&stiffness, &load, None, pc, opts.krylov_rtol, opts.max_krylov)?;
    if !rep.converged {
        return Err(Error::SolverFailure(format!(
            "displacement solve stalled at relative residual {:.3e}{}",
            rep.relative_residual,
            rep.breakdown_reason.map_or(String::new(), |r| format!(" ({r})"))
        )));
    }
    Ok((
        u,
        ElasticReport {
            iterations: rep.iterations,
            relative_residual: rep.relative_residual,
            built_preconditioner: built,
            assembly_seconds,
            precond_seconds,
            krylov_seconds: krylov_started.elapsed().as_secs_f64(),
        },
    ))
}

/// Von Mises stress per cell, evaluated at the centroid.
pub fn cell_von_mises(
    problem: &ElasticProblem,
    displacement: &[f64],
    temperature: &[f64],
) -> Result<Vec<f64>> {
    let dm = problem.dofmap;
    if displacement.len() != dm.n_dofs() {
        return Err(Error::DimensionMismatch { expected: dm.n_dofs(), got: displacement.len() });
    }
    let n = cell_node_count(dm.degree())?;
    let centroid = [0.25; 4];
    let mut vals = [0.0; MAX_CELL_NODES];
    let mut grads_ref = [[0.0; 3]; MAX_CELL_NODES];
    let mut out = Vec::with_capacity(problem.mesh.cell_count());

    for c in 0..problem.mesh.cell_count() {
        let nodes = dm.cell_nodes(c);
        let geom = CellGeometry::new(problem.mesh.cell_coords(c))?;
        let material = problem.materials.get(problem.mesh.cell_region(c))?;
        eval_cell_basis(dm.degree(), centroid, &mut vals);
        eval_cell_basis_grad(dm.degree(), centroid, &mut grads_ref);

        let mut t_c = 0.0;
        let mut grad_u = [[0.0; 3]; 3];
        for a in 0..n {
            t_c += vals[a] * temperature[nodes[a]];
            let g = geom.to_physical_grad(grads_ref[a]);
            for i in 0..3 {
                let ui = displacement[nodes[a] * 3 + i];
                for j in 0..3 {
                    grad_u[i][j] += ui * g[j];
                }
            }
        }

        let thermal = material.alpha.eval(t_c) * (t_c - material.t_ref);
        let (lambda, mu) = material.moduli_at(t_c)?.lame();
        let mut eps = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                eps[i][j] = 0.5 * (grad_u[i][j] + grad_u[j][i]);
            }
            eps[i][i] -= thermal;
        }
        let tr = eps[0][0] + eps[1][1] + eps[2][2];
        let mut dev_sq = 0.0;
        let mean = (lambda * tr + 2.0 * mu * tr / 3.0) + 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let mut sigma = 2.0 * mu * eps[i][j];
                if i == j {
                    sigma += lambda * tr;
                }
                let dev = if i == j { sigma - mean } else { sigma };
                dev_sq += dev * dev;
            }
        }
        out.push((1.5 * dev_sq).sqrt());
    }
    Ok(out)
}
