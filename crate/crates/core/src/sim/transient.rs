//! Coupled time stepping with adaptive step control.
//!
//! Each step solves the thermal problem first, then feeds the accepted
//! temperature into the elastic solve; displacement never feeds back. A
//! step is rejected when the largest nodal temperature change exceeds the
//! controller's bound, halving the step and retrying. Accepted steps
//! rescale the step toward a target fraction of that bound:
//!   dt_next = dt * epsilon_target * max_change / observed.
//!
//! Preconditioners persist across steps. The elastic hierarchy is built
//! once per run; the thermal hierarchy is rebuilt after a rejection or
//! when the latest solve's Krylov work spikes above the rolling average.

use std::time::Instant;

use crate::amg::AmgHierarchy;
use crate::error::Error;
use crate::fem::DofMap;
use crate::sim::elastic::{solve_elastic, ElasticProblem, ElasticReport, ElasticSolveOptions};
use crate::sim::thermal::{
    newton_thermal, NewtonReport, ThermalMode, ThermalProblem, ThermalSolveOptions,
};
use crate::Result;

/// Largest factor the step may grow by in one acceptance.
pub const MAX_DT_GROWTH: f64 = 100.0;

/// Krylov-work spike threshold relative to the rolling average.
pub const SPIKE_FACTOR: f64 = 1.5;

/// Adaptive theta-scheme step controller.
#[derive(Clone, Debug)]
pub struct TimeController {
    pub theta: f64,
    /// Step size the next attempt will use, before end-time clamping.
    pub dt: f64,
    /// Largest admissible nodal temperature change per step.
    pub max_change: f64,
    /// Fraction of `max_change` the controller steers toward.
    pub epsilon_target: f64,
    pub t_end: f64,
    /// Halvings allowed per step before giving up.
    pub max_retries: usize,
}

impl TimeController {
    pub fn new(theta: f64, dt: f64, max_change: f64, epsilon_target: f64, t_end: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidConfig(format!("theta must lie in (0, 1], got {theta}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidConfig(format!("initial dt must be positive, got {dt}")));
        }
        if !(max_change > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "max temperature change must be positive, got {max_change}"
            )));
        }
        if !(epsilon_target > 0.0 && epsilon_target <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon target must lie in (0, 1], got {epsilon_target}"
            )));
        }
        if !(t_end > 0.0) {
            return Err(Error::InvalidConfig(format!("end time must be positive, got {t_end}")));
        }
        Ok(Self { theta, dt, max_change, epsilon_target, t_end, max_retries: 20 })
    }

    /// Step size after an accepted step with the given largest change.
    /// Vanishing changes are floored so one acceptance grows the step by
    /// at most `MAX_DT_GROWTH`.
    pub fn next_dt(&self, dt_used: f64, observed: f64) -> f64 {
        let target = self.epsilon_target * self.max_change;
        let denom = observed.max(target / MAX_DT_GROWTH);
        dt_used * target / denom
    }
}

/// Simulation state advanced step by step.
pub struct State {
    pub time: f64,
    /// Completed steps.
    pub step: usize,
    pub temperature: Vec<f64>,
    pub displacement: Vec<f64>,
    pub preconditioners: PreconditionerCache,
}

impl State {
    /// Uniform initial temperature, undeformed body.
    pub fn uniform(thermal_dm: &DofMap, elastic_dm: &DofMap, t0: f64) -> State {
        State {
            time: 0.0,
            step: 0,
            temperature: vec![t0; thermal_dm.n_dofs()],
            displacement: vec![0.0; elastic_dm.n_dofs()],
            preconditioners: PreconditionerCache::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RebuildReason {
    Initial,
    StepRejected,
    IterationSpike,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RebuildEvent {
    pub step: usize,
    pub solver: &'static str,
    pub reason: RebuildReason,
}

/// Rolling mean of per-step Krylov work since the last rebuild, used to
/// decide when a lagged preconditioner has gone stale.
#[derive(Clone, Debug)]
pub struct ReusePolicy {
    samples: Vec<f64>,
    pub spike_factor: f64,
}

impl Default for ReusePolicy {
    fn default() -> Self {
        Self { samples: Vec::new(), spike_factor: SPIKE_FACTOR }
    }
}

impl ReusePolicy {
    pub fn observe(&mut self, mean_iterations: f64) {
        self.samples.push(mean_iterations);
    }

    /// True when `latest` exceeds the rolling average by the spike factor.
    /// Never fires without history.
    pub fn is_spike(&self, latest: f64) -> bool {
        if self.samples.is_empty() {
            return false;
        }
        let avg = self.samples.iter().sum::<f64>() / self.samples.len() as f64;
        latest > self.spike_factor * avg
    }

    pub fn reset(&mut self) {
        self.samples.clear();
    }
}

/// Hierarchies reused across steps, with build bookkeeping.
#[derive(Default)]
pub struct PreconditionerCache {
    pub thermal: Option<AmgHierarchy>,
    pub elastic: Option<AmgHierarchy>,
    pub thermal_builds: usize,
    pub elastic_builds: usize,
    pub events: Vec<RebuildEvent>,
    pub policy: ReusePolicy,
    pending_thermal: Option<RebuildReason>,
}

impl PreconditionerCache {
    /// Schedules a thermal rebuild before the next solve.
    pub fn invalidate_thermal(&mut self, reason: RebuildReason) {
        self.thermal = None;
        self.pending_thermal = Some(reason);
    }
}

/// Thermal and elastic problems sharing one mesh, plus solver settings.
pub struct CoupledProblem<'a> {
    pub thermal: ThermalProblem<'a>,
    pub elastic: ElasticProblem<'a>,
    pub thermal_options: ThermalSolveOptions,
    pub elastic_options: ElasticSolveOptions,
}

impl<'a> CoupledProblem<'a> {
    pub fn new(thermal: ThermalProblem<'a>, elastic: ElasticProblem<'a>) -> Result<Self> {
        if thermal.dofmap.degree() != elastic.dofmap.degree()
            || thermal.dofmap.node_count() != elastic.dofmap.node_count()
        {
            return Err(Error::InvalidConfig(
                "thermal and elastic spaces must share nodes".into(),
            ));
        }
        Ok(Self {
            thermal,
            elastic,
            thermal_options: ThermalSolveOptions::default(),
            elastic_options: ElasticSolveOptions::default(),
        })
    }
}

/// Outcome of one accepted step.
#[derive(Clone, Debug)]
pub struct StepReport {
    /// Index of the completed step, counting from zero.
    pub step: usize,
    /// Simulated time after the step.
    pub time: f64,
    pub dt_used: f64,
    /// Step size the controller proposes next.
    pub dt_next: f64,
    pub rejections: usize,
    /// Largest nodal temperature change of the accepted attempt.
    pub max_change: f64,
    /// Wall time spent in thermal Newton solves, rejected attempts included.
    pub thermal_seconds: f64,
    /// Wall time of the elastic solve, hierarchy build included.
    pub elastic_seconds: f64,
    pub newton: NewtonReport,
    pub elastic: ElasticReport,
}

/// Timing and solver metadata of a steady solve; phase order is execution
/// order.
#[derive(Clone, Debug)]
pub struct SteadyReport {
    pub newton: NewtonReport,
    pub elastic: ElasticReport,
    pub phases: Vec<(&'static str, f64)>,
    pub total_seconds: f64,
}

fn max_abs_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter().zip(new).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max)
}

fn record_thermal_build(cache: &mut PreconditionerCache, step: usize, built: bool) {
    if !built {
        return;
    }
    cache.thermal_builds += 1;
    let reason = cache.pending_thermal.take().unwrap_or(RebuildReason::Initial);
    cache.events.push(RebuildEvent { step, solver: "thermal", reason });
    cache.policy.reset();
}

/// Advances the coupled state by one accepted step.
///
/// Attempts `controller.dt` clamped to the end time; when the temperature
/// moves more than `controller.max_change` at any dof the attempt is
/// rejected, the step halved and the thermal hierarchy invalidated. After
/// `controller.max_retries` rejections the step fails.
pub fn advance_transient(
    problem: &CoupledProblem,
    controller: &mut TimeController,
    state: &mut State,
) -> Result<StepReport> {
    let remaining = controller.t_end - state.time;
    if remaining <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "simulation already reached the end time {}",
            controller.t_end
        )));
    }

    let mut rejections = 0;
    let mut thermal_seconds = 0.0;
    loop {
        let dt = controller.dt.min(remaining);
        let mode = ThermalMode::Transient {
            time_start: state.time,
            dt,
            theta: controller.theta,
        };
        let cache = &mut state.preconditioners;
        let thermal_started = Instant::now();
        let (t_new, newton) = newton_thermal(
            &problem.thermal,
            mode,
            &state.temperature,
            &state.temperature,
            &problem.thermal_options,
            &mut cache.thermal,
        )?;
        thermal_seconds += thermal_started.elapsed().as_secs_f64();
        record_thermal_build(cache, state.step, newton.built_preconditioner);

        let observed = max_abs_change(&state.temperature, &t_new);
        if observed > controller.max_change {
            rejections += 1;
            if rejections > controller.max_retries {
                return Err(Error::TimeStepRetriesExhausted {
                    retries: controller.max_retries,
                    dt,
                });
            }
            controller.dt = 0.5 * dt;
            cache.invalidate_thermal(RebuildReason::StepRejected);
            continue;
        }

        let mean = newton.mean_krylov_iterations();
        if cache.policy.is_spike(mean) {
            cache.invalidate_thermal(RebuildReason::IterationSpike);
        }
        cache.policy.observe(mean);

        state.time += dt;
        state.temperature = t_new;
        let dt_next = controller.next_dt(dt, observed);
        controller.dt = dt_next;

        let elastic_started = Instant::now();
        let (u, elastic) = solve_elastic(
            &problem.elastic,
            state.time,
            &state.temperature,
            &problem.elastic_options,
            &mut state.preconditioners.elastic,
        )?;
        let elastic_seconds = elastic_started.elapsed().as_secs_f64();
        if elastic.built_preconditioner {
            state.preconditioners.elastic_builds += 1;
            state.preconditioners.events.push(RebuildEvent {
                step: state.step,
                solver: "elastic",
                reason: RebuildReason::Initial,
            });
        }
        state.displacement = u;

        let report = StepReport {
            step: state.step,
            time: state.time,
            dt_used: dt,
            dt_next,
            rejections,
            max_change: observed,
            thermal_seconds,
            elastic_seconds,
            newton,
            elastic,
        };
        state.step += 1;
        return Ok(report);
    }
}

/// Solves the steady coupled problem at the given time: one thermal Newton
/// solve from the state's temperature, then one elastic solve.
pub fn coupled_steady_solve(
    problem: &CoupledProblem,
    time: f64,
    state: &mut State,
) -> Result<SteadyReport> {
    let started = Instant::now();

    let thermal_started = Instant::now();
    let cache = &mut state.preconditioners;
    let (t, newton) = newton_thermal(
        &problem.thermal,
        ThermalMode::Steady { time },
        &state.temperature,
        &state.temperature,
        &problem.thermal_options,
        &mut cache.thermal,
    )?;
    record_thermal_build(cache, state.step, newton.built_preconditioner);
    state.temperature = t;
    let thermal_seconds = thermal_started.elapsed().as_secs_f64();

    let elastic_started = Instant::now();
    let (u, elastic) = solve_elastic(
        &problem.elastic,
        time,
        &state.temperature,
        &problem.elastic_options,
        &mut state.preconditioners.elastic,
    )?;
    if elastic.built_preconditioner {
        state.preconditioners.elastic_builds += 1;
        state.preconditioners.events.push(RebuildEvent {
            step: state.step,
            solver: "elastic",
            reason: RebuildReason::Initial,
        });
    }
    state.displacement = u;
    state.time = time;
    let elastic_seconds = elastic_started.elapsed().as_secs_f64();

    Ok(SteadyReport {
        newton,
        elastic,
        phases: vec![("thermal", thermal_seconds), ("elastic", elastic_seconds)],
        total_seconds: started.elapsed().as_secs_f64(),
    })
}
