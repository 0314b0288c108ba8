//! Discrete-event core: clock, event queue and the run loop.

mod queue;
mod report;
pub(crate) mod sim;

use thiserror::Error;

pub use queue::{Event, EventKind, EventQueue};
pub use report::{Counters, InstanceReport, NetworkReport, RunReport};

use crate::config::{ConfigError, Scenario};
use crate::path::PathError;
use crate::power::PowerError;
use crate::service::ServiceError;
use crate::stats::StatsError;

/// Default cap on processed events before a run is declared livelocked.
pub const DEFAULT_EVENT_CAP: u64 = 1_000_000_000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("event scheduled at {at_us}us before the clock ({clock_us}us)")]
    Causality { at_us: f64, clock_us: f64 },
    #[error("event cap of {0} exceeded")]
    Livelock(u64),
    #[error("conservation violated: {injected} injected, {completed} completed, {in_flight} in flight")]
    Conservation {
        injected: u64,
        completed: u64,
        in_flight: u64,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopCondition {
    /// Stop injecting at the client duration and process until no events remain.
    Drain,
    /// Stop at this simulated time (seconds) even if work is outstanding.
    Horizon(f64),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub stop: StopCondition,
    pub max_events: u64,
    /// Keep per-instance sojourn samples. Large fanouts can turn this off.
    pub record_tiers: bool,
    /// Keep the full `(timestamp, sequence, kind)` event trace in the report.
    pub record_trace: bool,
    /// Run the power manager when the client block configures one.
    pub power: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            stop: StopCondition::Drain,
            max_events: DEFAULT_EVENT_CAP,
            record_tiers: true,
            record_trace: false,
            power: true,
        }
    }
}

/// Runs one simulation of `scenario` to its stop condition.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, EngineError> {
    let mut sim = sim::Simulation::new(scenario, opts.clone())?;
    sim.run()?;
    Ok(sim.into_report())
}

/// Runs `scenario` under default options.
pub fn run_default(scenario: &Scenario) -> Result<RunReport, EngineError> {
    run(scenario, &RunOptions::default())
}
