//! Discrete-event simulator for graphs of interactive microservices.
//!
//! A scenario describes services as chains of queueing stages, the machines
//! and instances they run on, and the paths a request takes across them.
//! [`engine::run`] simulates it and returns a [`engine::RunReport`] with
//! end-to-end and per-tier latency samples.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod engine;
pub mod network;
pub mod path;
pub mod power;
pub mod queueing;
pub mod service;
pub mod stats;
pub mod workload;

pub use config::{generate_builtin_scenario, load_scenario, save_scenario, BuiltinKind, Scenario};
pub use engine::{run, run_default, EngineError, RunOptions, RunReport, StopCondition};
