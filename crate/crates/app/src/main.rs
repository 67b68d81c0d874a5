use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use tfsolve::bench::{bench_command, AmgKind, BenchOptions};
use tfsolve::commands::{self, RunOverrides};
use tfsolve::error::{AppError, Result};
use tfsolve_core::sim::KrylovKind;

#[derive(Parser)]
#[command(name = "tfsolve", version, about = "Coupled thermomechanical finite element solver")]
struct Cli {
    /// Worker threads for assembly; the default of 1 keeps runs reproducible.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Cg,
    Bicgstab,
}

impl SolverArg {
    fn kind(self) -> KrylovKind {
        match self {
            SolverArg::Cg => KrylovKind::Cg,
            SolverArg::Bicgstab => KrylovKind::Bicgstab,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SolverArg::Cg => "cg",
            SolverArg::Bicgstab => "bicgstab",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AmgArg {
    Classical,
    Sa,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a structured tetrahedral box mesh.
    MeshGen {
        #[arg(long)]
        out: PathBuf,
        /// Lower corner as x,y,z.
        #[arg(long, default_value = "0,0,0")]
        lo: String,
        /// Upper corner as x,y,z.
        #[arg(long, default_value = "1,1,1")]
        hi: String,
        #[arg(long, default_value_t = 4)]
        nx: usize,
        #[arg(long, default_value_t = 4)]
        ny: usize,
        #[arg(long, default_value_t = 4)]
        nz: usize,
    },
    /// Uniformly refine a mesh, eight children per cell and level.
    Refine {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        levels: usize,
    },
    /// Print a dihedral-angle quality histogram.
    Quality {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 18)]
        bins: usize,
    },
    /// Solve the steady coupled problem from a config file.
    Steady {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Thermal Krylov solver; overrides the config.
        #[arg(long)]
        solver: Option<SolverArg>,
        /// Drop rotational modes from the elastic near-nullspace.
        #[arg(long)]
        no_rotations: bool,
    },
    /// Run the adaptive transient from a config file.
    Transient {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        solver: Option<SolverArg>,
        #[arg(long)]
        no_rotations: bool,
    },
    /// Benchmark Krylov solves over a refinement sweep.
    Bench {
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Cube subdivisions at level 0.
        #[arg(long, default_value_t = 8)]
        base: usize,
        #[arg(long, default_value_t = 1)]
        degree: usize,
        #[arg(long, value_enum, default_value_t = AmgArg::Classical)]
        amg: AmgArg,
        #[arg(long, value_enum, default_value_t = SolverArg::Cg)]
        solver: SolverArg,
        /// Skip the unpreconditioned baseline solve.
        #[arg(long)]
        no_unpreconditioned: bool,
        #[arg(long, default_value_t = 1e-6)]
        rtol: f64,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(AppError::config("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| AppError::config(format!("thread pool: {e}")))?;
    let parallel = cli.threads > 1;

    match cli.command {
        Command::MeshGen { out, lo, hi, nx, ny, nz } => {
            commands::mesh_gen(&out, parse_triple(&lo, "--lo")?, parse_triple(&hi, "--hi")?, [
                nx, ny, nz,
            ])
        }
        Command::Refine { mesh, out, levels } => commands::refine(&mesh, &out, levels),
        Command::Quality { mesh, bins } => {
            if bins == 0 {
                return Err(AppError::config("--bins must be at least 1"));
            }
            commands::quality(&mesh, bins)
        }
        Command::Steady { config, out, solver, no_rotations } => {
            let overrides = RunOverrides {
                solver: solver.map(|s| s.name().to_string()),
                no_rotations,
                out,
                parallel,
            };
            commands::steady(&config, &overrides)
        }
        Command::Transient { config, out, solver, no_rotations } => {
            let overrides = RunOverrides {
                solver: solver.map(|s| s.name().to_string()),
                no_rotations,
                out,
                parallel,
            };
            commands::transient(&config, &overrides)
        }
        Command::Bench { levels, base, degree, amg, solver, no_unpreconditioned, rtol, out } => {
            let opts = BenchOptions {
                base,
                levels,
                degree,
                amg: match amg {
                    AmgArg::Classical => AmgKind::Classical,
                    AmgArg::Sa => AmgKind::SmoothedAggregation,
                },
                solver: solver.kind(),
                with_unpreconditioned: !no_unpreconditioned,
                rtol,
                parallel_assembly: parallel,
            };
            bench_command(&opts, out.as_deref())
        }
    }
}

fn parse_triple(text: &str, flag: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(AppError::config(format!("{flag} expects x,y,z, got {text:?}")));
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| AppError::config(format!("{flag}: bad coordinate {part:?}")))?;
    }
    Ok(out)
}

fn main() -> ExitCode {
    // Validation failures exit 1 and solver failures exit 2; clap's default
    // of 2 for usage errors would collide with the solver code.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
