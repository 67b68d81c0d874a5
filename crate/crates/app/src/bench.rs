//! Refinement-sweep benchmark of Krylov solves on the thermal operator.
//!
//! Each level assembles the steady thermal Jacobian on a uniform unit-cube
//! mesh (constant conductivity, Robin exchange on every face) and solves
//! the Newton step system once without a preconditioner and once with an
//! AMG hierarchy. The reported seconds cover hierarchy construction and
//! the Krylov solve; assembly is excluded so the numbers track solver
//! complexity rather than integration cost.

use crate::error::{AppError, Result};
use std::io::Write;
use std::path::Path;
use std::time::Instant;
use tfsolve_core::amg::{
    build_classical, build_smoothed_aggregation, ClassicalOptions, NearNullspace, SaOptions,
};
use tfsolve_core::fem::FunctionSpace;
use tfsolve_core::krylov::{bicgstab, cg, CsrMatrix, IdentityPreconditioner, Preconditioner};
use tfsolve_core::mesh::build_box_mesh;
use tfsolve_core::sim::{
    assemble_thermal, BoundaryCondition, BoundarySchedule, KrylovKind, Material, MaterialTable,
    PropertyTable, ThermalMode, ThermalProblem,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmgKind {
    Classical,
    SmoothedAggregation,
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    /// Cube subdivisions at level 0; level l uses base << l.
    pub base: usize,
    /// Last refinement level, inclusive.
    pub levels: usize,
    pub degree: usize,
    pub amg: AmgKind,
    pub solver: KrylovKind,
    /// Also run the unpreconditioned solve (dominates wall time on fine
    /// meshes).
    pub with_unpreconditioned: bool,
    pub rtol: f64,
    pub parallel_assembly: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            base: 8,
            levels: 3,
            degree: 1,
            amg: AmgKind::Classical,
            solver: KrylovKind::Cg,
            with_unpreconditioned: true,
            rtol: 1e-6,
            parallel_assembly: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub level: usize,
    pub n_dofs: usize,
    pub unpreconditioned_iterations: Option<usize>,
    pub amg_iterations: usize,
    pub build_seconds: f64,
    pub solve_seconds: f64,
    pub operator_complexity: f64,
}

impl BenchRow {
    /// Criterion for near-linear complexity: hierarchy build plus solve.
    pub fn amg_seconds(&self) -> f64 {
        self.build_seconds + self.solve_seconds
    }
}

/// Steady thermal Jacobian and Newton right-hand side on a `divisions`-cubed
/// unit box at a uniform temperature of 400 K.
pub fn thermal_bench_system(
    divisions: usize,
    degree: usize,
    parallel_assembly: bool,
) -> Result<(CsrMatrix, Vec<f64>)> {
    let mesh = build_box_mesh([0.0; 3], [1.0; 3], divisions, divisions, divisions)?;
    let space = FunctionSpace::new(&mesh, degree, 1)?;
    let dm = space.build_dofmap();

    let mut materials = MaterialTable::new();
    materials.insert(0, Material::constant(1.2e-5, 2.0e11, 45.0, 470.0, 7.8e3, 0.3, 293.0)?);
    let mut schedule = BoundarySchedule::new();
    for tag in 1..=6 {
        schedule.insert(
            tag,
            BoundaryCondition::RobinThermal {
                beta: PropertyTable::constant(10.0),
                t_bc: PropertyTable::constant(350.0),
            },
        );
    }

    let mut problem = ThermalProblem::new(&mesh, &dm, &materials, &schedule)?;
    problem.parallel_assembly = parallel_assembly;
    let t = vec![400.0; dm.n_dofs()];
    let (residual, jacobian) =
        assemble_thermal(&problem, ThermalMode::Steady { time: 0.0 }, &t, &t)?;
    let rhs: Vec<f64> = residual.iter().map(|&v| -v).collect();
    Ok((jacobian, rhs))
}

fn krylov_solve(
    kind: KrylovKind,
    a: &CsrMatrix,
    b: &[f64],
    pc: &dyn Preconditioner,
    rtol: f64,
    max_iter: usize,
) -> Result<usize> {
    let (_, report) = match kind {
        KrylovKind::Cg => cg(a, b, None, pc, rtol, max_iter)?,
        KrylovKind::Bicgstab => bicgstab(a, b, None, pc, rtol, max_iter)?,
    };
    if !report.converged {
        return Err(AppError::config(format!(
            "benchmark solve stalled at relative residual {:.3e}",
            report.relative_residual
        )));
    }
    Ok(report.iterations)
}

/// Runs the sweep, invoking `emit` as each row completes.
pub fn run_bench(
    opts: &BenchOptions,
    emit: &mut dyn FnMut(&BenchRow),
) -> Result<Vec<BenchRow>> {
    if opts.base == 0 {
        return Err(AppError::config("bench base subdivisions must be positive"));
    }
    if opts.degree != 1 && opts.degree != 2 {
        return Err(AppError::config(format!("degree must be 1 or 2, got {}", opts.degree)));
    }
    let mut rows = Vec::with_capacity(opts.levels + 1);
    for level in 0..=opts.levels {
        let divisions = opts.base << level;
        let (a, b) = thermal_bench_system(divisions, opts.degree, opts.parallel_assembly)?;
        let n = a.n_rows();

        let unpre = if opts.with_unpreconditioned {
            Some(krylov_solve(opts.solver, &a, &b, &IdentityPreconditioner, opts.rtol, 200_000)?)
        } else {
            None
        };

        let build_started = Instant::now();
        let (pc, complexity) = match opts.amg {
            AmgKind::Classical => {
                let h = build_classical(&a, &ClassicalOptions::default())?;
                let complexity = h.diagnostics().operator_complexity;
                (h, complexity)
            }
            AmgKind::SmoothedAggregation => {
                let ones = NearNullspace::from_vectors(vec![vec![1.0; n]], 1)?;
                let h = build_smoothed_aggregation(&a, &ones, &SaOptions::default())?;
                let complexity = h.diagnostics().operator_complexity;
                (h, complexity)
            }
        };
        let build_seconds = build_started.elapsed().as_secs_f64();

        let solve_started = Instant::now();
        let amg_iterations = krylov_solve(opts.solver, &a, &b, &pc, opts.rtol, 10_000)?;
        let solve_seconds = solve_started.elapsed().as_secs_f64();

        let row = BenchRow {
            level,
            n_dofs: n,
            unpreconditioned_iterations: unpre,
            amg_iterations,
            build_seconds,
            solve_seconds,
            operator_complexity: complexity,
        };
        emit(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub const TSV_HEADER: &str = "level\tn\tcg_unpreconditioned\tcg_amg\tseconds\toperator_complexity";

pub fn tsv_line(row: &BenchRow) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{:.4}\t{:.3}",
        row.level,
        row.n_dofs,
        row.unpreconditioned_iterations.map_or_else(|| "-".to_string(), |i| i.to_string()),
        row.amg_iterations,
        row.amg_seconds(),
        row.operator_complexity
    )
}

/// CLI driver: prints rows as they finish and optionally writes the table.
pub fn bench_command(opts: &BenchOptions, out: Option<&Path>) -> Result<()> {
    println!("{TSV_HEADER}");
    let rows = run_bench(opts, &mut |row| {
        println!("{}", tsv_line(row));
    })?;
    if let Some(path) = out {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "{TSV_HEADER}")?;
        for row in &rows {
            writeln!(file, "{}", tsv_line(row))?;
        }
        file.flush()?;
        println!("table written to {}", path.display());
    }
    Ok(())
}
