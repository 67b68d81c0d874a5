//! Drivers behind the CLI subcommands.

use crate::config::{read_config, SimulationConfig};
use crate::error::{AppError, Result};
use crate::report::{StepLog, StepRecord, Timings};
use crate::meshio;
use crate::vtk::{write_vtk, FieldExport};
use std::path::{Path, PathBuf};
use tfsolve_core::fem::{DofMap, FunctionSpace};
use tfsolve_core::mesh::{build_box_mesh, quality_report, uniform_refine, Mesh};
use tfsolve_core::sim::{
    advance_transient, coupled_steady_solve, CoupledProblem, ElasticProblem, KrylovKind, State,
    ThermalProblem,
};

/// CLI overrides applied on top of the configuration file.
#[derive(Clone, Debug, Default)]
pub struct RunOverrides {
    /// Thermal Krylov solver: "cg" or "bicgstab".
    pub solver: Option<String>,
    /// Drop rotational modes from the elastic near-nullspace.
    pub no_rotations: bool,
    /// Output directory override.
    pub out: Option<PathBuf>,
    /// Enable parallel assembly (more than one thread requested).
    pub parallel: bool,
}

pub fn mesh_gen(
    out: &Path,
    lo: [f64; 3],
    hi: [f64; 3],
    divisions: [usize; 3],
) -> Result<()> {
    let mesh = build_box_mesh(lo, hi, divisions[0], divisions[1], divisions[2])?;
    meshio::write_mesh(&mesh, out)?;
    println!(
        "wrote {}: {} vertices, {} cells, {} tagged boundary facets",
        out.display(),
        mesh.vertex_count(),
        mesh.cell_count(),
        mesh.facet_tags().len()
    );
    Ok(())
}

pub fn refine(mesh_path: &Path, out: &Path, levels: usize) -> Result<()> {
    let mut mesh = meshio::read_mesh(mesh_path)?;
    for _ in 0..levels {
        mesh = uniform_refine(&mesh)?;
    }
    meshio::write_mesh(&mesh, out)?;
    println!(
        "wrote {}: {} vertices, {} cells after {} refinement level(s)",
        out.display(),
        mesh.vertex_count(),
        mesh.cell_count(),
        levels
    );
    Ok(())
}

pub fn quality(mesh_path: &Path, bins: usize) -> Result<()> {
    let mesh = meshio::read_mesh(mesh_path)?;
    let report = quality_report(&mesh, bins)?;
    print!("{}", quality_text(&report));
    Ok(())
}

/// Deterministic histogram rendering; one line per bin.
pub fn quality_text(report: &tfsolve_core::mesh::QualityReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let bins = report.histogram.len();
    let width = 180.0 / bins as f64;
    let peak = report.histogram.iter().copied().max().unwrap_or(0).max(1);
    writeln!(out, "dihedral angles over {} cells", report.cell_count).unwrap();
    writeln!(
        out,
        "min {:.3} deg (cell {}), max {:.3} deg",
        report.min_angle_deg, report.worst_cell, report.max_angle_deg
    )
    .unwrap();
    for (b, &count) in report.histogram.iter().enumerate() {
        let marks = (count * 50).div_ceil(peak);
        writeln!(
            out,
            "[{:6.1}, {:6.1}) {:>8} {}",
            b as f64 * width,
            (b + 1) as f64 * width,
            count,
            "#".repeat(if count == 0 { 0 } else { marks })
        )
        .unwrap();
    }
    out
}

/// Everything a coupled run needs, owned so the problem structs can borrow.
struct RunSetup {
    mesh: Mesh,
    thermal_dm: DofMap,
    elastic_dm: DofMap,
}

fn build_setup(config: &SimulationConfig, timings: &mut Timings) -> Result<RunSetup> {
    let mesh = timings.time("mesh_read", || meshio::read_mesh(&config.mesh_path))?;
    config.validate_against_mesh(&mesh)?;
    let (thermal_dm, elastic_dm) = timings.time("dofmap", || -> Result<(DofMap, DofMap)> {
        let degree = config.raw.degree;
        let thermal_space = FunctionSpace::new(&mesh, degree, 1)?;
        let elastic_space = FunctionSpace::new(&mesh, degree, 3)?;
        Ok((thermal_space.build_dofmap(), elastic_space.build_dofmap()))
    })?;
    Ok(RunSetup { mesh, thermal_dm, elastic_dm })
}

fn build_problem<'a>(
    config: &'a SimulationConfig,
    setup: &'a RunSetup,
    overrides: &RunOverrides,
) -> Result<CoupledProblem<'a>> {
    let mut thermal = ThermalProblem::new(
        &setup.mesh,
        &setup.thermal_dm,
        &config.materials,
        &config.schedule,
    )?;
    thermal.flux_sign = config.flux_sign();
    thermal.parallel_assembly = overrides.parallel;
    let mut elastic = ElasticProblem::new(
        &setup.mesh,
        &setup.elastic_dm,
        &config.materials,
        &config.schedule,
    )?;
    elastic.body_force = config.raw.elastic.body_force;
    elastic.parallel_assembly = overrides.parallel;

    let mut problem = CoupledProblem::new(thermal, elastic)?;
    problem.thermal_options = config.thermal_options();
    problem.elastic_options = config.elastic_options();
    if let Some(solver) = &overrides.solver {
        problem.thermal_options.solver = match solver.as_str() {
            "bicgstab" => KrylovKind::Bicgstab,
            "cg" => KrylovKind::Cg,
            other => {
                return Err(AppError::config(format!(
                    "--solver must be cg or bicgstab, got {other:?}"
                )))
            }
        };
    }
    if overrides.no_rotations {
        problem.elastic_options.use_rotations = false;
    }
    Ok(problem)
}

fn output_dir(config: &SimulationConfig, overrides: &RunOverrides) -> PathBuf {
    overrides.out.clone().unwrap_or_else(|| config.raw.output.directory.clone())
}

fn write_fields(
    dir: &Path,
    name: &str,
    mesh: &Mesh,
    state: &State,
) -> Result<PathBuf> {
    let path = dir.join(name);
    write_vtk(
        mesh,
        &FieldExport {
            temperature: Some(&state.temperature),
            displacement: Some(&state.displacement),
        },
        &path,
    )?;
    Ok(path)
}

pub fn steady(config_path: &Path, overrides: &RunOverrides) -> Result<()> {
    let mut timings = Timings::start();
    let config = timings.time("config_read", || read_config(config_path))?;
    let setup = build_setup(&config, &mut timings)?;
    let problem = build_problem(&config, &setup, overrides)?;

    let mut state =
        State::uniform(&setup.thermal_dm, &setup.elastic_dm, config.raw.thermal.steady_guess);
    let report = coupled_steady_solve(&problem, 0.0, &mut state)?;

    // Split the solver phases into assembly, hierarchy build, and Krylov
    // application so the breakdown mirrors where time actually went.
    let newton = &report.newton;
    let elastic = &report.elastic;
    timings.add(
        "assembly",
        newton.assembly_seconds + elastic.assembly_seconds,
        newton.iterations + 2,
    );
    timings.add("precond_build", newton.precond_seconds + elastic.precond_seconds, 2);
    let thermal_other =
        (phase_seconds(&report.phases, "thermal") - newton.assembly_seconds
            - newton.precond_seconds)
            .max(0.0);
    timings.add("thermal_solve", thermal_other, newton.iterations.max(1));
    let elastic_other = (phase_seconds(&report.phases, "elastic") - elastic.assembly_seconds
        - elastic.precond_seconds)
        .max(0.0);
    timings.add("elastic_solve", elastic_other, 1);

    let dir = output_dir(&config, overrides);
    timings.time("output", || -> Result<()> {
        std::fs::create_dir_all(&dir)?;
        write_fields(&dir, "steady.vtk", &setup.mesh, &state)?;
        Ok(())
    })?;
    timings.write(&dir.join("timing.jsonl"))?;

    println!("# effective configuration");
    print!("{}", config.echo());
    println!("# steady solve");
    println!(
        "newton iterations {}, mean krylov iterations {:.1}, final residual ratio {:.3e}",
        newton.iterations,
        newton.mean_krylov_iterations(),
        relative_drop(&newton.residual_history)
    );
    println!(
        "elastic iterations {}, relative residual {:.3e}",
        elastic.iterations, elastic.relative_residual
    );
    for p in timings.phases() {
        println!("phase {:<14} {:>10.4}s  calls {}", p.phase, p.seconds, p.calls);
    }
    println!(
        "total {:.4}s, phase coverage {:.1}%",
        timings.total_seconds(),
        100.0 * timings.coverage()
    );
    println!("fields written to {}", dir.join("steady.vtk").display());
    Ok(())
}

fn phase_seconds(phases: &[(&'static str, f64)], name: &str) -> f64 {
    phases.iter().find(|(n, _)| *n == name).map_or(0.0, |(_, s)| *s)
}

fn relative_drop(history: &[f64]) -> f64 {
    match (history.first(), history.last()) {
        (Some(&first), Some(&last)) if first > 0.0 => last / first,
        _ => 0.0,
    }
}

pub fn transient(config_path: &Path, overrides: &RunOverrides) -> Result<()> {
    let mut timings = Timings::start();
    let config = timings.time("config_read", || read_config(config_path))?;
    let setup = build_setup(&config, &mut timings)?;
    let problem = build_problem(&config, &setup, overrides)?;
    let mut controller = config.controller()?;

    let dir = output_dir(&config, overrides);
    std::fs::create_dir_all(&dir)?;
    let mut log = StepLog::create(&dir.join("steps.jsonl"))?;

    let mut state =
        State::uniform(&setup.thermal_dm, &setup.elastic_dm, config.raw.thermal.t0);
    let every = config.raw.output.every;
    let mut steps = 0usize;
    let mut rejections = 0usize;
    // The end-time clamp can leave state.time one ulp short of t_end.
    while controller.t_end - state.time > 1e-12 * controller.t_end {
        let step = advance_transient(&problem, &mut controller, &mut state)?;
        timings.add("assembly", step.newton.assembly_seconds, step.newton.iterations + 1);
        timings.add(
            "precond_build",
            step.newton.precond_seconds + step.elastic.precond_seconds,
            1,
        );
        timings.add(
            "thermal_solve",
            (step.thermal_seconds - step.newton.assembly_seconds
                - step.newton.precond_seconds)
                .max(0.0),
            1,
        );
        timings.add(
            "elastic_solve",
            (step.elastic_seconds - step.elastic.precond_seconds).max(0.0),
            1,
        );
        log.append(&StepRecord {
            step: step.step,
            time: step.time,
            dt: step.dt_used,
            dt_next: step.dt_next,
            max_temperature_change: step.max_change,
            rejections: step.rejections,
            newton_iterations: step.newton.iterations,
            thermal_krylov_iterations: step.newton.krylov_iterations.iter().sum(),
            elastic_krylov_iterations: step.elastic.iterations,
            thermal_seconds: step.thermal_seconds,
            elastic_seconds: step.elastic_seconds,
        })?;
        steps += 1;
        rejections += step.rejections;
        if every > 0 && steps % every == 0 {
            let name = format!("step_{:05}.vtk", step.step);
            timings.time("output", || write_fields(&dir, &name, &setup.mesh, &state))?;
        }
    }
    timings.write(&dir.join("timing.jsonl"))?;

    println!("# effective configuration");
    print!("{}", config.echo());
    println!("# transient run");
    let cache = &state.preconditioners;
    println!(
        "{} accepted steps, {} rejections, reached t = {}",
        steps, rejections, state.time
    );
    println!(
        "hierarchy builds: {} thermal, {} elastic",
        cache.thermal_builds, cache.elastic_builds
    );
    for event in &cache.events {
        println!("  rebuild step {} {} ({:?})", event.step, event.solver, event.reason);
    }
    for p in timings.phases() {
        println!("phase {:<14} {:>10.4}s  calls {}", p.phase, p.seconds, p.calls);
    }
    println!("step records in {}", dir.join("steps.jsonl").display());
    Ok(())
}
