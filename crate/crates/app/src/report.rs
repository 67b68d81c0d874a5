//! Timing and per-step reports as line-delimited JSON.
//!
//! Field order is fixed by struct declaration order and non-timing numbers
//! use shortest round-trip formatting, so reports of the same run are
//! byte-identical apart from measured durations.

use crate::error::Result;
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// One named phase of a run.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseRecord {
    pub phase: String,
    pub seconds: f64,
    pub calls: usize,
}

/// Wall-clock phase accumulator for a whole command invocation.
pub struct Timings {
    started: Instant,
    phases: Vec<PhaseRecord>,
}

impl Timings {
    pub fn start() -> Timings {
        Timings { started: Instant::now(), phases: Vec::new() }
    }

    /// Runs `f` under the named phase, accumulating into an existing entry
    /// of the same name.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.add(phase, t0.elapsed().as_secs_f64(), 1);
        out
    }

    pub fn add(&mut self, phase: &str, seconds: f64, calls: usize) {
        if let Some(p) = self.phases.iter_mut().find(|p| p.phase == phase) {
            p.seconds += seconds;
            p.calls += calls;
        } else {
            self.phases.push(PhaseRecord { phase: phase.to_string(), seconds, calls });
        }
    }

    pub fn total_seconds(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    pub fn phases(&self) -> &[PhaseRecord] {
        &self.phases
    }

    /// Fraction of elapsed wall time the named phases account for.
    pub fn coverage(&self) -> f64 {
        let sum: f64 = self.phases.iter().map(|p| p.seconds).sum();
        sum / self.total_seconds().max(f64::MIN_POSITIVE)
    }

    /// One JSON record per phase, then a total line.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for p in &self.phases {
            serde_json::to_writer(&mut out, p).map_err(std::io::Error::other)?;
            writeln!(out)?;
        }
        #[derive(Serialize)]
        struct Total {
            total_seconds: f64,
            coverage: f64,
        }
        serde_json::to_writer(
            &mut out,
            &Total { total_seconds: self.total_seconds(), coverage: self.coverage() },
        )
        .map_err(std::io::Error::other)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }
}

/// Per-step transient record; appended and flushed as each step completes so
/// interrupted runs keep their history.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub dt_next: f64,
    pub max_temperature_change: f64,
    pub rejections: usize,
    pub newton_iterations: usize,
    pub thermal_krylov_iterations: usize,
    pub elastic_krylov_iterations: usize,
    pub thermal_seconds: f64,
    pub elastic_seconds: f64,
}

pub struct StepLog {
    out: std::fs::File,
}

impl StepLog {
    pub fn create(path: &Path) -> Result<StepLog> {
        Ok(StepLog { out: std::fs::File::create(path)? })
    }

    pub fn append(&mut self, record: &StepRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record).map_err(std::io::Error::other)?;
        line.push(b'\n');
        self.out.write_all(&line)?;
        self.out.flush()?;
        Ok(())
    }
}
