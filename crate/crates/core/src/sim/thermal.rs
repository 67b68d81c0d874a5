//! Nonlinear heat equation: assembly and Newton solve.
//!
//! Discretizes one theta-scheme step of
//!   rho c_v(T) dT/dt = div(kappa(T) grad T)
//! with Robin boundaries on tagged facet regions. Writing w_th for the
//! theta average (1-theta) w_m + theta w_{m+1} of a quantity w, the nodal
//! residual is
//!   F_a = int rho c_th (T_{m+1}-T_m)/dt N_a
//!       + int kappa_th grad T_th . grad N_a
//!       +- int beta_th (T_th - T_bc,th) N_a over Robin facets,
//! where the boundary sign is `BoundaryFluxSign`. The steady problem is
//! the same assembly with the transient term dropped and theta = 1.
//!
//! The Jacobian is exact: it carries the kappa'(T) and c_v'(T) chain-rule
//! terms, so Newton converges quadratically for smooth property tables.

use rayon::prelude::*;
use std::time::Instant;

use crate::amg::{build_classical, AmgHierarchy, ClassicalOptions};
use crate::error::Error;
use crate::Result;
use crate::fem::{
    build_pattern, cell_node_count, element_robin_matrices, eval_cell_basis, eval_cell_basis_grad,
    facet_node_count, scatter_matrix, scatter_vector, tet_quadrature, triangle_quadrature,
    CellGeometry, DofMap, QuadratureRule, MAX_CELL_NODES,
};
use crate::krylov::{bicgstab, cg, norm2, CsrMatrix};
use crate::mesh::Mesh;
use crate::sim::{facet_nodes, BoundaryCondition, BoundarySchedule, MaterialTable};

/// Cells per parallel assembly batch; element matrices for one batch are
/// computed concurrently, then scattered serially in cell order so the
/// result is bitwise independent of thread count.
const ASSEMBLY_CHUNK: usize = 4096;

/// Default Newton tolerance on |F| / |F_initial|.
pub const NEWTON_RTOL: f64 = 1e-9;

/// Default tolerance for the inner Krylov solves; kept well below the
/// Newton tolerance so inexact steps never dominate the error.
pub const INNER_KRYLOV_RTOL: f64 = 1e-11;

/// Sign of the Robin boundary term in the residual.
///
/// `Cooling` adds `+beta (T - T_bc)`: a body hotter than its surroundings
/// loses heat, which is the dissipative convention. `Heating` flips the
/// sign, pairing with the flux convention `kappa grad T . n = beta (T - T_bc)`,
/// where the same boundary pumps heat in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundaryFluxSign {
    #[default]
    Cooling,
    Heating,
}

impl BoundaryFluxSign {
    fn factor(self) -> f64 {
        match self {
            BoundaryFluxSign::Cooling => 1.0,
            BoundaryFluxSign::Heating => -1.0,
        }
    }
}

/// Which step of the heat equation to assemble.
#[derive(Clone, Copy, Debug)]
pub enum ThermalMode {
    /// Equilibrium problem; boundary data evaluated at `time`.
    Steady { time: f64 },
    /// One theta-scheme step from `time_start` to `time_start + dt`.
    Transient { time_start: f64, dt: f64, theta: f64 },
}

impl ThermalMode {
    fn validate(self) -> Result<()> {
        if let ThermalMode::Transient { dt, theta, .. } = self {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")));
            }
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "theta must lie in (0, 1], got {theta}"
                )));
            }
        }
        Ok(())
    }

    fn theta(self) -> f64 {
        match self {
            ThermalMode::Steady { .. } => 1.0,
            ThermalMode::Transient { theta, .. } => theta,
        }
    }

    /// Inverse time step; zero drops the transient term entirely.
    fn inv_dt(self) -> f64 {
        match self {
            ThermalMode::Steady { .. } => 0.0,
            ThermalMode::Transient { dt, .. } => 1.0 / dt,
        }
    }

    fn times(self) -> (f64, f64) {
        match self {
            ThermalMode::Steady { time } => (time, time),
            ThermalMode::Transient { time_start, dt, .. } => (time_start, time_start + dt),
        }
    }
}

/// Heat equation on a fixed mesh with tabulated materials and scheduled
/// boundary conditions.
pub struct ThermalProblem<'a> {
    pub mesh: &'a Mesh,
    pub dofmap: &'a DofMap,
    pub materials: &'a MaterialTable,
    pub schedule: &'a BoundarySchedule,
    pub flux_sign: BoundaryFluxSign,
    pub parallel_assembly: bool,
}

impl<'a> ThermalProblem<'a> {
    pub fn new(
        mesh: &'a Mesh,
        dofmap: &'a DofMap,
        materials: &'a MaterialTable,
        schedule: &'a BoundarySchedule,
    ) -> Result<Self> {
        if dofmap.value_size() != 1 {
            return Err(Error::InvalidConfig(format!(
                "thermal problem needs a scalar space, got value size {}",
                dofmap.value_size()
            )));
        }
        Ok(Self {
            mesh,
            dofmap,
            materials,
            schedule,
            flux_sign: BoundaryFluxSign::default(),
            parallel_assembly: true,
        })
    }
}

/// Inner linear solver for Newton steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KrylovKind {
    #[default]
    Cg,
    Bicgstab,
}

#[derive(Clone, Debug)]
pub struct ThermalSolveOptions {
    pub newton_rtol: f64,
    pub max_newton: usize,
    pub krylov_rtol: f64,
    pub max_krylov: usize,
    pub solver: KrylovKind,
    /// Halve the Newton step while it increases the residual norm.
    pub line_search: bool,
    pub amg: ClassicalOptions,
}

impl Default for ThermalSolveOptions {
    fn default() -> Self {
        Self {
            newton_rtol: NEWTON_RTOL,
            max_newton: 25,
            krylov_rtol: INNER_KRYLOV_RTOL,
            max_krylov: 2000,
            solver: KrylovKind::default(),
            line_search: false,
            amg: ClassicalOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonReport {
    /// Linear solves performed; 0 when the initial iterate already satisfies
    /// the tolerance.
    pub iterations: usize,
    /// Residual 2-norm before each update plus the final accepted norm.
    pub residual_history: Vec<f64>,
    pub krylov_iterations: Vec<usize>,
    pub used_fallback: bool,
    pub built_preconditioner: bool,
    /// Wall seconds spent assembling residuals and Jacobians.
    pub assembly_seconds: f64,
    /// Wall seconds spent building the hierarchy; zero on reuse.
    pub precond_seconds: f64,
    /// Wall seconds spent in Krylov solves.
    pub krylov_seconds: f64,
}

impl NewtonReport {
    pub fn mean_krylov_iterations(&self) -> f64 {
        if self.krylov_iterations.is_empty() {
            return 0.0;
        }
        self.krylov_iterations.iter().sum::<usize>() as f64 / self.krylov_iterations.len() as f64
    }
}

struct CellTerms {
    jac: [f64; MAX_CELL_NODES * MAX_CELL_NODES],
    res: [f64; MAX_CELL_NODES],
}

/// Residual and Jacobian of one cell, gathered local temperatures in hand.
fn cell_thermal_terms(
    problem: &ThermalProblem,
    mode: ThermalMode,
    rule: &QuadratureRule,
    cell: usize,
    t_old: &[f64],
    t_new: &[f64],
) -> Result<CellTerms> {
    let dm = problem.dofmap;
    let n = cell_node_count(dm.degree())?;
    let nodes = dm.cell_nodes(cell);
    let geom = CellGeometry::new(problem.mesh.cell_coords(cell))?;
    let material = problem.materials.get(problem.mesh.cell_region(cell))?;
    let rho = material.rho;
    let theta = mode.theta();
    let inv_dt = mode.inv_dt();

    let mut told_loc = [0.0; MAX_CELL_NODES];
    let mut tnew_loc = [0.0; MAX_CELL_NODES];
    for a in 0..n {
        told_loc[a] = t_old[nodes[a]];
        tnew_loc[a] = t_new[nodes[a]];
    }

    let mut out = CellTerms { jac: [0.0; MAX_CELL_NODES * MAX_CELL_NODES], res: [0.0; MAX_CELL_NODES] };
    let mut vals = [0.0; MAX_CELL_NODES];
    let mut grads_ref = [[0.0; 3]; MAX_CELL_NODES];
    let mut grads = [[0.0; 3]; MAX_CELL_NODES];

    for (&l, &w) in rule.points().iter().zip(rule.weights()) {
        eval_cell_basis(dm.degree(), l, &mut vals);
        eval_cell_basis_grad(dm.degree(), l, &mut grads_ref);
        for a in 0..n {
            grads[a] = geom.to_physical_grad(grads_ref[a]);
        }

        let mut t_old_q = 0.0;
        let mut t_new_q = 0.0;
        let mut grad_th = [0.0; 3];
        for a in 0..n {
            t_old_q += vals[a] * told_loc[a];
            t_new_q += vals[a] * tnew_loc[a];
            let c_th = (1.0 - theta) * told_loc[a] + theta * tnew_loc[a];
            grad_th[0] += c_th * grads[a][0];
            grad_th[1] += c_th * grads[a][1];
            grad_th[2] += c_th * grads[a][2];
        }
        let dt_q = t_new_q - t_old_q;

        let kappa_old = checked(material.kappa.eval(t_old_q), "thermal conductivity", t_old_q)?;
        let kappa_new = checked(material.kappa.eval(t_new_q), "thermal conductivity", t_new_q)?;
        let kappa_th = (1.0 - theta) * kappa_old + theta * kappa_new;
        let dkappa_new = material.kappa.derivative(t_new_q);

        let (cv_th, dcv_new) = if inv_dt > 0.0 {
            let cv_old = checked(material.c_v.eval(t_old_q), "heat capacity", t_old_q)?;
            let cv_new = checked(material.c_v.eval(t_new_q), "heat capacity", t_new_q)?;
            ((1.0 - theta) * cv_old + theta * cv_new, material.c_v.derivative(t_new_q))
        } else {
            (0.0, 0.0)
        };

        let wdet = w * geom.det_j_abs;
        for a in 0..n {
            let ga = grads[a];
            let gdot_th = grad_th[0] * ga[0] + grad_th[1] * ga[1] + grad_th[2] * ga[2];
            out.res[a] += wdet * (rho * cv_th * dt_q * inv_dt * vals[a] + kappa_th * gdot_th);
            for b in 0..n {
                let gb = grads[b];
                let gab = ga[0] * gb[0] + ga[1] * gb[1] + ga[2] * gb[2];
                let mass = rho * inv_dt * (cv_th + theta * dcv_new * dt_q) * vals[b] * vals[a];
                let diff = theta * (dkappa_new * vals[b] * gdot_th + kappa_th * gab);
                out.jac[a * n + b] += wdet * (mass + diff);
            }
        }
    }
    Ok(out)
}

fn checked(value: f64, what: &'static str, temperature: f64) -> Result<f64> {
    if value <= 0.0 || !value.is_finite() {
        return Err(Error::InvalidMaterialValue { what, value, temperature });
    }
    Ok(value)
}

/// Assembles the Robin boundary terms into the global system.
fn assemble_robin(
    problem: &ThermalProblem,
    mode: ThermalMode,
    t_old: &[f64],
    t_new: &[f64],
    jac: &mut CsrMatrix,
    res: &mut [f64],
) -> Result<()> {
    let dm = problem.dofmap;
    let degree = dm.degree();
    let nf = facet_node_count(degree)?;
    let rule = triangle_quadrature(2 * degree)?;
    let theta = mode.theta();
    let sign = problem.flux_sign.factor();
    let (time_old, time_new) = mode.times();

    for (facet, cell, tag) in problem.mesh.tagged_facet_owners() {
        let Some(BoundaryCondition::RobinThermal { .. }) = problem.schedule.condition(tag) else {
            continue;
        };
        let (beta_old, tbc_old) = problem.schedule.eval_robin(tag, time_old)?;
        let (beta_new, tbc_new) = problem.schedule.eval_robin(tag, time_new)?;
        let beta_th = (1.0 - theta) * beta_old + theta * beta_new;
        let tbc_th = (1.0 - theta) * tbc_old + theta * tbc_new;

        let coords = facet.map(|v| problem.mesh.vertex(v));
        let beta_q = vec![beta_th; rule.len()];
        let tbc_q = vec![tbc_th; rule.len()];
        let (re, rv) = element_robin_matrices(coords, degree, &rule, &beta_q, &tbc_q)?;

        let nodes = facet_nodes(dm, problem.mesh.cell(cell), cell, facet);
        for a in 0..nf {
            let mut flux = -rv[a];
            for b in 0..nf {
                let t_th = (1.0 - theta) * t_old[nodes[b]] + theta * t_new[nodes[b]];
                flux += re[a * nf + b] * t_th;
            }
            res[nodes[a]] += sign * flux;
            for b in 0..nf {
                let idx = jac
                    .entry_index(nodes[a], nodes[b])
                    .expect("facet nodes share a cell in the pattern");
                jac.values_mut()[idx] += sign * theta * re[a * nf + b];
            }
        }
    }
    Ok(())
}

/// Assembles the theta-step residual and exact Jacobian into preallocated
/// storage whose sparsity pattern came from `build_pattern`.
pub fn assemble_thermal_into(
    problem: &ThermalProblem,
    mode: ThermalMode,
    t_old: &[f64],
    t_new: &[f64],
    jac: &mut CsrMatrix,
    res: &mut [f64],
) -> Result<()> {
    mode.validate()?;
    let dm = problem.dofmap;
    let n_dofs = dm.n_dofs();
    if t_old.len() != n_dofs || t_new.len() != n_dofs {
        return Err(Error::DimensionMismatch {
            expected: n_dofs,
            got: if t_old.len() != n_dofs { t_old.len() } else { t_new.len() },
        });
    }
    if jac.n_rows() != n_dofs || res.len() != n_dofs {
        return Err(Error::DimensionMismatch { expected: n_dofs, got: jac.n_rows() });
    }

    jac.values_mut().fill(0.0);
    res.fill(0.0);

    let n = cell_node_count(dm.degree())?;
    let rule = tet_quadrature(2 * dm.degree())?;
    let n_cells = problem.mesh.cell_count();

    let mut chunk = Vec::new();
    for start in (0..n_cells).step_by(ASSEMBLY_CHUNK) {
        let end = (start + ASSEMBLY_CHUNK).min(n_cells);
        chunk.clear();
        if problem.parallel_assembly {
            (start..end)
                .into_par_iter()
                .map(|c| cell_thermal_terms(problem, mode, &rule, c, t_old, t_new))
                .collect_into_vec(&mut chunk);
        } else {
            chunk.extend(
                (start..end).map(|c| cell_thermal_terms(problem, mode, &rule, c, t_old, t_new)),
            );
        }
        for (c, terms) in (start..end).zip(chunk.drain(..)) {
            let terms = terms?;
            let nodes = dm.cell_nodes(c);
            scatter_matrix(jac, nodes, nodes, &terms.jac[..n * n]);
            scatter_vector(res, nodes, &terms.res[..n]);
        }
    }

    assemble_robin(problem, mode, t_old, t_new, jac, res)
}

/// Residual vector and Jacobian matrix of the theta step at state
/// (`t_old`, `t_new`). For `Steady` the old state is ignored.
pub fn assemble_thermal(
    problem: &ThermalProblem,
    mode: ThermalMode,
    t_old: &[f64],
    t_new: &[f64],
) -> Result<(Vec<f64>, CsrMatrix)> {
    let mut jac = build_pattern(problem.dofmap)?;
    let mut res = vec![0.0; problem.dofmap.n_dofs()];
    assemble_thermal_into(problem, mode, t_old, t_new, &mut jac, &mut res)?;
    Ok((res, jac))
}

fn solve_newton_step(
    jac: &CsrMatrix,
    rhs: &[f64],
    pc: &AmgHierarchy,
    opts: &ThermalSolveOptions,
    report: &mut NewtonReport,
) -> Result<Vec<f64>> {
    if opts.solver == KrylovKind::Cg {
        let (step, rep) = cg(jac, rhs, None, pc, opts.krylov_rtol, opts.max_krylov)?;
        if rep.converged {
            report.krylov_iterations.push(rep.iterations);
            return Ok(step);
        }
    }
    let (step, rep) = bicgstab(jac, rhs, None, pc, opts.krylov_rtol, opts.max_krylov)?;
    if !rep.converged {
        return Err(Error::SolverFailure(format!(
            "thermal step solve stalled at relative residual {:.3e}{}",
            rep.relative_residual,
            rep.breakdown_reason.map_or(String::new(), |r| format!(" ({r})"))
        )));
    }
    report.used_fallback = opts.solver == KrylovKind::Cg;
    report.krylov_iterations.push(rep.iterations);
    Ok(step)
}

/// Newton iteration on the theta-step residual, starting from `t_init`.
///
/// Converges when |F| drops below `newton_rtol` times its value at the
/// initial iterate. The Jacobian preconditioner is built once per cache
/// lifetime: pass the same `cache` across steps to reuse it, or an empty
/// one to force a rebuild.
pub fn newton_thermal(
    problem: &ThermalProblem,
    mode: ThermalMode,
    t_old: &[f64],
    t_init: &[f64],
    opts: &ThermalSolveOptions,
    cache: &mut Option<AmgHierarchy>,
) -> Result<(Vec<f64>, NewtonReport)> {
    mode.validate()?;
    let mut t = t_init.to_vec();
    let mut jac = build_pattern(problem.dofmap)?;
    let mut res = vec![0.0; problem.dofmap.n_dofs()];
    let mut report = NewtonReport {
        iterations: 0,
        residual_history: Vec::new(),
        krylov_iterations: Vec::new(),
        used_fallback: false,
        built_preconditioner: false,
        assembly_seconds: 0.0,
        precond_seconds: 0.0,
        krylov_seconds: 0.0,
    };

    let assembly_started = Instant::now();
    assemble_thermal_into(problem, mode, t_old, &t, &mut jac, &mut res)?;
    report.assembly_seconds += assembly_started.elapsed().as_secs_f64();
    let mut rnorm = norm2(&res);
    let r0 = rnorm;
    report.residual_history.push(rnorm);

    for _ in 0..opts.max_newton {
        if rnorm <= opts.newton_rtol * r0 || r0 == 0.0 {
            return Ok((t, report));
        }
        if cache.is_none() {
            let precond_started = Instant::now();
            *cache = Some(build_classical(&jac, &opts.amg)?);
            report.precond_seconds += precond_started.elapsed().as_secs_f64();
            report.built_preconditioner = true;
        }
        let pc = cache.as_ref().expect("preconditioner built above");

        let rhs: Vec<f64> = res.iter().map(|&v| -v).collect();
        let krylov_started = Instant::now();
        let step = solve_newton_step(&jac, &rhs, pc, opts, &mut report)?;
        report.krylov_seconds += krylov_started.elapsed().as_secs_f64();
        report.iterations += 1;

        let mut scale = 1.0;
        loop {
            for (ti, si) in t.iter_mut().zip(&step) {
                *ti += scale * si;
            }
            let assembly_started = Instant::now();
            assemble_thermal_into(problem, mode, t_old, &t, &mut jac, &mut res)?;
            report.assembly_seconds += assembly_started.elapsed().as_secs_f64();
            let next = norm2(&res);
            if !opts.line_search || next < rnorm || scale < 1.0 / 128.0 {
                rnorm = next;
                break;
            }
            for (ti, si) in t.iter_mut().zip(&step) {
                *ti -= scale * si;
            }
            scale *= 0.5;
        }
        report.residual_history.push(rnorm);
    }

    if rnorm <= opts.newton_rtol * r0 {
        return Ok((t, report));
    }
    Err(Error::NewtonDiverged {
        iterations: report.iterations,
        history: report.residual_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{element_thermal_matrices, FunctionSpace};
    use crate::mesh::build_box_mesh;
    use crate::sim::{Material, PropertyTable};

    fn constant_materials(kappa: f64, c_v: f64) -> MaterialTable {
        let mut table = MaterialTable::new();
        table.insert(0, Material::constant(1e-5, 2.0e11, kappa, c_v, 1000.0, 0.3, 293.0).unwrap());
        table
    }

    fn robin_all_faces(beta: f64, t_bc: f64) -> BoundarySchedule {
        let mut schedule = BoundarySchedule::new();
        for tag in 1..=6 {
            schedule.insert(
                tag,
                BoundaryCondition::RobinThermal {
                    beta: PropertyTable::constant(beta),
                    t_bc: PropertyTable::constant(t_bc),
                },
            );
        }
        schedule
    }

    fn varying_materials() -> MaterialTable {
        let kappa =
            PropertyTable::new(&[(200.0, 10.0), (400.0, 16.0), (800.0, 22.0)]).unwrap();
        let c_v =
            PropertyTable::new(&[(200.0, 450.0), (500.0, 520.0), (800.0, 640.0)]).unwrap();
        let alpha = PropertyTable::constant(1.2e-5);
        let young = PropertyTable::constant(2.0e11);
        let mut table = MaterialTable::new();
        table.insert(
            0,
            Material::new(alpha, young, kappa, c_v, 7800.0, 0.3, 293.0).unwrap(),
        );
        table
    }

    #[test]
    fn uniform_state_at_ambient_has_zero_residual() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 2, 2, 2).unwrap();
        let dm = FunctionSpace::new(&mesh, 1, 1).unwrap().build_dofmap();
        let materials = varying_materials();
        let schedule = robin_all_faces(25.0, 350.0);
        let problem = ThermalProblem::new(&mesh, &dm, &materials, &schedule).unwrap();

        let t = vec![350.0; dm.n_dofs()];
        let (res, _) =
            assemble_thermal(&problem, ThermalMode::Steady { time: 0.0 }, &t, &t).unwrap();
        assert!(norm2(&res) < 1e-9, "residual {}", norm2(&res));
    }

    #[test]
    fn constant_conductivity_gives_symmetric_jacobian() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 2, 2, 2).unwrap();
        let dm = FunctionSpace::new(&mesh, 1, 1).unwrap().build_dofmap();
        // Conductivity constant, capacity varying: every Jacobian term is
        // then a symmetric product.
        let kappa = PropertyTable::constant(14.0);
        let c_v = PropertyTable::new(&[(200.0, 400.0), (800.0, 700.0)]).unwrap();
        let mut materials = MaterialTable::new();
        materials.insert(
            0,
            Material::new(
                PropertyTable::constant(1e-5),
                PropertyTable::constant(1e11),
                kappa,
                c_v,
                7800.0,
                0.3,
                293.0,
            )
            .unwrap(),
        );
        let schedule = robin_all_faces(40.0, 300.0);
        let problem = ThermalProblem::new(&mesh, &dm, &materials, &schedule).unwrap();

        let coords = dm.node_coords();
        let t_old: Vec<f64> =
            coords.iter().map(|p| 300.0 + 40.0 * p[0] + 25.0 * p[1] * p[2]).collect();
        let t_new: Vec<f64> =
            coords.iter().map(|p| 320.0 + 30.0 * p[2] + 10.0 * p[0] * p[1]).collect();
        let mode = ThermalMode::Transient { time_start: 0.0, dt: 2.0, theta: 0.6 };
        let (_, jac) = assemble_thermal(&problem, mode, &t_old, &t_new).unwrap();

        let scale = jac.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(jac.asymmetry() <= 1e-12 * scale, "asymmetry {}", jac.asymmetry());
    }

    #[test]
    fn finite_differences_confirm_jacobian() {
        let mesh = build_box_mesh([0.0; 3], [1.0, 0.8, 0.6], 2, 2, 2).unwrap();
        let dm = FunctionSpace::new(&mesh, 1, 1).unwrap().build_dofmap();
        assert!(dm.n_dofs() <= 200);
        let materials = varying_materials();
        let schedule = robin_all_faces(60.0, 330.0);
        let problem = ThermalProblem::new(&mesh, &dm, &materials, &schedule).unwrap();

        let coords = dm.node_coords();
        let t_old: Vec<f64> =
            coords.iter().map(|p| 290.0 + 120.0 * p[0] + 60.0 * p[1] - 40.0 * p[2]).collect();
        let mut t_new: Vec<f64> =
            coords.iter().map(|p| 300.0 + 180.0 * p[0] * p[0] + 90.0 * p[2]).collect();
        let mode = ThermalMode::Transient { time_start: 0.0, dt: 0.5, theta: 0.7 };

        let (res, jac) = assemble_thermal(&problem, mode, &t_old, &t_new).unwrap();
        let jmax = jac.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));

        for j in 0..dm.n_dofs() {
            let eps = 1e-6 * t_new[j].abs().max(1.0);
            let saved = t_new[j];
            t_new[j] += eps;
            let (res_p, _) = assemble_thermal(&problem, mode, &t_old, &t_new).unwrap();
            t_new[j] = saved;
            for i in 0..dm.n_dofs() {
                let fd = (res_p[i] - res[i]) / eps;
                let exact = jac.entry(i, j);
                assert!(
                    (fd - exact).abs() <= 1e-5 * jmax,
                    "J[{i}][{j}]: fd {fd} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn linear_problem_converges_in_one_newton_iteration() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 3, 3, 3).unwrap();
        let dm = FunctionSpace::new(&mesh, 1, 1).unwrap().build_dofmap();
        let materials = constant_materials(12.0, 500.0);
        let schedule = robin_all_faces(80.0, 420.0);
        let problem = ThermalProblem::new(&mesh, &dm, &materials, &schedule).unwrap();

        let init = vec![300.0; dm.n_dofs()];
        let mut cache = None;
        let (t, report) = newton_thermal(
            &problem,
            ThermalMode::Steady { time: 0.0 },
            &init,
            &init,
            &ThermalSolveOptions::default(),
            &mut cache,
        )
        .unwrap();
        assert_eq!(report.iterations, 1);
        assert!(report.built_preconditioner);
        for &ti in &t {
            assert!((ti - 420.0).abs() < 1e-6, "{ti}");
        }
    }

    #[test]
    fn smooth_nonlinearity_converges_quadratically() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 3, 3, 3).unwrap();
        let dm = FunctionSpace::new(&mesh, 1, 1).unwrap().build_dofmap();
        // kappa = 1 + 0.004 T sampled on a wide range; piecewise-linear in T
        // keeps kappa' exact so Newton is genuinely quadratic.
        let kappa = PropertyTable::new(&[(0.0, 1.0), (2000.0, 9.0)]).unwrap();
        let mut materials = MaterialTable::new();
        materials.insert(
            0,
            Material::new(
                PropertyTable::constant(1e-5),
                PropertyTable::constant(1e11),
                kappa,
                PropertyTable::constant(500.0),
                1000.0,
                0.3,
                293.0,
            )
            .unwrap(),
        );
        let mut schedule = BoundarySchedule::new();
        schedule.insert(
            1,
            BoundaryCondition::RobinThermal {
                beta: PropertyTable::constant(500.0),
                t_bc: PropertyTable::constant(300.0),
            },
        );
        schedule.insert(
            2,
            BoundaryCondition::RobinThermal {
                beta: PropertyTable::constant(500.0),
                t_bc: PropertyTable::constant(1500.0),
            },
        );
        let problem = ThermalProblem::new(&mesh, &dm, &materials, &schedule).unwrap();

        let init = vec![400.0; dm.n_dofs()];
        let mut cache = None;
        let (_, report) = newton_thermal(
            &problem,
            ThermalMode::Steady { time: 0.0 },
            &init,
            &init,
            &ThermalSolveOptions::default(),
            &mut cache,
        )
        .unwrap();

        let h = &report.residual_history;
        assert!(report.iterations >= 3, "needs a genuinely nonlinear run, got {h:?}");
        assert!(report.iterations <= 8, "history {h:?}");
        for w in h.windows(2) {
            assert!(w[1] < w[0], "history not decreasing: {h:?}");
        }
        // Quadratic signature: the contraction factor itself collapses.
        let early = h[1] / h[0];
        let late = h[h.len() - 1] / h[h.len() - 2];
        assert!(late < 1e-2 * early, "ratios {early} -> {late}, history {h:?}");
    }

    #[test]
    fn stiff_robin_bounds_interior_temperatures() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 3, 3, 3).unwrap();
        let dm = FunctionSpace::new(&mesh, 1, 1).unwrap().build_dofmap();
        let materials = constant_materials(1.0, 500.0);
        let mut schedule = BoundarySchedule::new();
        schedule.insert(
            1,
            BoundaryCondition::RobinThermal {
                beta: PropertyTable::constant(1e6),
                t_bc: PropertyTable::constant(300.0),
            },
        );
        schedule.insert(
            2,
            BoundaryCondition::RobinThermal {
                beta: PropertyTable::constant(1e6),
                t_bc: PropertyTable::constant(500.0),
            },
        );
        let problem = ThermalProblem::new(&mesh, &dm, &materials, &schedule).unwrap();

        let init = vec![400.0; dm.n_dofs()];
        let mut cache = None;
        let (t, _) = newton_thermal(
            &problem,
            ThermalMode::Steady { time: 0.0 },
            &init,
            &init,
            &ThermalSolveOptions::default(),
            &mut cache,
        )
        .unwrap();

        for &ti in &t {
            assert!(ti >= 300.0 - 1e-6 && ti <= 500.0 + 1e-6, "{ti}");
        }
        // Insulated side walls leave a 1D profile: plane averages must
        // increase monotonically from the cold face to the hot face.
        let coords = dm.node_coords();
        let mut planes = std::collections::BTreeMap::new();
        for (i, p) in coords.iter().enumerate() {
            let key = (p[0] * 3.0).round() as i64;
            let e = planes.entry(key).or_insert((0.0, 0usize));
            e.0 += t[i];
            e.1 += 1;
        }
        let means: Vec<f64> = planes.values().map(|(s, c)| s / *c as f64).collect();
        for w in means.windows(2) {
            assert!(w[1] > w[0], "plane means not monotone: {means:?}");
        }
    }

    #[test]
    fn boundary_sign_flips_robin_contribution() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 2, 2, 2).unwrap();
        let dm = FunctionSpace::new(&mesh, 1, 1).unwrap().build_dofmap();
        let materials = constant_materials(10.0, 500.0);
        let schedule = robin_all_faces(7.0, 350.0);
        let mut problem = ThermalProblem::new(&mesh, &dm, &materials, &schedule).unwrap();

        // Uniform nonequilibrium state: volume terms vanish identically and
        // the residual is pure boundary flux, beta (T - T_bc) times surface
        // area 6 once summed over the partition of unity.
        let t = vec![400.0; dm.n_dofs()];
        let (res, _) =
            assemble_thermal(&problem, ThermalMode::Steady { time: 0.0 }, &t, &t).unwrap();
        let total: f64 = res.iter().sum();
        let expect = 7.0 * 50.0 * 6.0;
        assert!((total - expect).abs() < 1e-9 * expect, "{total} vs {expect}");

        problem.flux_sign = BoundaryFluxSign::Heating;
        let (res, _) =
            assemble_thermal(&problem, ThermalMode::Steady { time: 0.0 }, &t, &t).unwrap();
        let flipped: f64 = res.iter().sum();
        assert!((flipped + expect).abs() < 1e-9 * expect, "{flipped} vs {}", -expect);
    }

    #[test]
    fn negative_interpolated_conductivity_is_rejected() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 1, 1, 1).unwrap();
        let dm = FunctionSpace::new(&mesh, 1, 1).unwrap().build_dofmap();
        // Bypasses the constructor check to model a table that dips negative
        // in the interpolated range.
        let bad = Material {
            alpha: PropertyTable::constant(1e-5),
            young: PropertyTable::constant(1e11),
            kappa: PropertyTable::new(&[(200.0, 5.0), (600.0, -5.0)]).unwrap(),
            c_v: PropertyTable::constant(500.0),
            rho: 1000.0,
            poisson: 0.3,
            t_ref: 293.0,
        };
        let mut materials = MaterialTable::new();
        materials.insert(0, bad);
        let schedule = BoundarySchedule::new();
        let problem = ThermalProblem::new(&mesh, &dm, &materials, &schedule).unwrap();

        let t = vec![550.0; dm.n_dofs()];
        let err = assemble_thermal(&problem, ThermalMode::Steady { time: 0.0 }, &t, &t)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidMaterialValue { what: "thermal conductivity", .. }));
    }

    #[test]
    fn parallel_assembly_matches_serial_bitwise() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 3, 3, 3).unwrap();
        let dm = FunctionSpace::new(&mesh, 2, 1).unwrap().build_dofmap();
        let materials = varying_materials();
        let schedule = robin_all_faces(33.0, 360.0);
        let mut problem = ThermalProblem::new(&mesh, &dm, &materials, &schedule).unwrap();

        let coords = dm.node_coords();
        let t_old: Vec<f64> = coords.iter().map(|p| 300.0 + 90.0 * p[0] * p[1]).collect();
        let t_new: Vec<f64> = coords.iter().map(|p| 310.0 + 70.0 * p[2]).collect();
        let mode = ThermalMode::Transient { time_start: 0.0, dt: 1.5, theta: 1.0 };

        problem.parallel_assembly = true;
        let (res_par, jac_par) = assemble_thermal(&problem, mode, &t_old, &t_new).unwrap();
        problem.parallel_assembly = false;
        let (res_ser, jac_ser) = assemble_thermal(&problem, mode, &t_old, &t_new).unwrap();

        assert_eq!(res_par, res_ser);
        assert_eq!(jac_par.values(), jac_ser.values());
        assert_eq!(jac_par.col_idx(), jac_ser.col_idx());
    }

    #[test]
    fn insulated_step_conserves_thermal_mass() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 3, 3, 3).unwrap();
        let dm = FunctionSpace::new(&mesh, 1, 1).unwrap().build_dofmap();
        let materials = constant_materials(12.0, 480.0);
        let schedule = BoundarySchedule::new();
        let problem = ThermalProblem::new(&mesh, &dm, &materials, &schedule).unwrap();

        let coords = dm.node_coords();
        let t0: Vec<f64> = coords
            .iter()
            .map(|p| 300.0 + 60.0 * (p[0] * 2.1).sin() + 40.0 * p[1] * p[2])
            .collect();
        let mode = ThermalMode::Transient { time_start: 0.0, dt: 0.05, theta: 1.0 };
        let mut cache = None;
        let (t1, _) = newton_thermal(
            &problem,
            mode,
            &t0,
            &t0,
            &ThermalSolveOptions::default(),
            &mut cache,
        )
        .unwrap();

        // Lumped thermal mass m = M 1 against the fixed mass matrix.
        let rule = tet_quadrature(2).unwrap();
        let mut m = vec![0.0; dm.n_dofs()];
        for c in 0..mesh.cell_count() {
            let zeros = vec![0.0; rule.len()];
            let rho_cv = vec![1000.0 * 480.0; rule.len()];
            let (_, me) =
                element_thermal_matrices(mesh.cell_coords(c), 1, &rule, &zeros, &rho_cv).unwrap();
            let nodes = dm.cell_nodes(c);
            for (a, &na) in nodes.iter().enumerate() {
                for b in 0..nodes.len() {
                    m[na] += me[a * nodes.len() + b];
                }
            }
        }
        let before: f64 = m.iter().zip(&t0).map(|(mi, ti)| mi * ti).sum();
        let after: f64 = m.iter().zip(&t1).map(|(mi, ti)| mi * ti).sum();
        assert!(
            (after - before).abs() <= 1e-10 * before.abs(),
            "thermal mass drifted: {before} -> {after}"
        );
    }

    #[test]
    fn divergent_iteration_reports_history() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 2, 2, 2).unwrap();
        let dm = FunctionSpace::new(&mesh, 1, 1).unwrap().build_dofmap();
        let materials = constant_materials(5.0, 500.0);
        let schedule = robin_all_faces(10.0, 400.0);
        let problem = ThermalProblem::new(&mesh, &dm, &materials, &schedule).unwrap();

        let init = vec![300.0; dm.n_dofs()];
        let opts = ThermalSolveOptions { max_newton: 0, ..Default::default() };
        let mut cache = None;
        let err =
            newton_thermal(&problem, ThermalMode::Steady { time: 0.0 }, &init, &init, &opts, &mut cache)
                .unwrap_err();
        match err {
            Error::NewtonDiverged { iterations, history } => {
                assert_eq!(iterations, 0);
                assert_eq!(history.len(), 1);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
