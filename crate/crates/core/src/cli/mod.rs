//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for configuration or usage errors, 2 for
//! failures during simulation or output.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{generate_builtin_scenario, load_scenario, BuiltinKind, ConfigError, Scenario, SlowMode};
use crate::engine::{self, EngineError, RunOptions};
use crate::stats::{
    export, oracle_erlang_c, oracle_fanout_max, oracle_mm1, summarize, sweep, zero_load_mean_us, OutputFormat,
    StatsError, SweepResult,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qsim", version, about = "Discrete-event simulator for microservice graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and print a one-row summary.
    Run(RunArgs),
    /// Simulate a scenario at each of several constant rates.
    Sweep(SweepArgs),
    /// Fanout clusters of several sizes with a share of slow servers.
    Tailscale(TailscaleArgs),
    /// Run the power manager and emit its per-window trace.
    Power(PowerArgs),
    /// Check a scenario and run the analytic oracle suite.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario directory holding the JSON configuration files.
    #[arg(long, conflicts_with = "builtin")]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario, e.g. `two_tier` or `fanout:16`.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Overrides the client RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the client duration in seconds.
    #[arg(long)]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated offered loads in requests per second, increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    pub rates: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SlowModeArg {
    /// Each leaf visit is slow with the given probability.
    PerRequest,
    /// A fixed set of servers is slow for the whole run.
    Fixed,
}

#[derive(Debug, Args)]
pub struct TailscaleArgs {
    /// Comma-separated cluster sizes.
    #[arg(long, value_delimiter = ',', default_value = "5,10,50,100,500,1000")]
    pub n_list: Vec<u32>,
    #[arg(long, default_value_t = 0.01)]
    pub slow_frac: f64,
    #[arg(long, default_value_t = 10.0)]
    pub slow_factor: f64,
    #[arg(long, value_enum, default_value_t = SlowModeArg::PerRequest)]
    pub mode: SlowModeArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Simulated seconds per cluster size (one request per second).
    #[arg(long, default_value_t = 10000.0)]
    pub duration_s: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Scenario with a power block; the built-in diurnal two-tier fixture
    /// when neither this nor `--builtin` is given.
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub interval_s: Option<f64>,
    #[arg(long)]
    pub qos_ms: Option<f64>,
    /// Keep every tier at its top frequency (baseline).
    #[arg(long)]
    pub no_pm: bool,
    /// PM trace CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Skip the oracle simulations.
    #[arg(long)]
    pub config_only: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("writing output: {0}")]
    Io(#[from] io::Error),
    #[error("writing output: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0} oracle check(s) failed")]
    OracleFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Engine(EngineError::Config(_)) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("UQSIM_LOG")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Tailscale(a) => cmd_tailscale(a),
        Command::Power(a) => cmd_power(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!(
            "--{name} must be a positive finite number, got {v}"
        )))
    }
}

/// Loads the scenario and applies overrides, all before any simulation.
fn resolve(args: &ScenarioArgs, default_builtin: Option<&str>) -> Result<Scenario, CliError> {
    let seed = args.seed.unwrap_or(1);
    let mut s = match (&args.scenario, args.builtin.as_deref().or(default_builtin)) {
        (Some(dir), _) => load_scenario(dir)?,
        (None, Some(name)) => generate_builtin_scenario(&name.parse::<BuiltinKind>()?, seed)?,
        (None, None) => return Err(CliError::Usage("one of --scenario or --builtin is required".into())),
    };
    if let Some(seed) = args.seed {
        s.client.rng_seed = seed;
    }
    if let Some(d) = args.duration_s {
        let d = positive("duration-s", d)?;
        let warm_share = s.client.warmup() / s.client.duration_s;
        s.client.duration_s = d;
        s.client.warmup_s = Some(warm_share * d);
    }
    s.validate()?;
    Ok(s)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let s = resolve(&a.scenario, None)?;
    let zero_load = zero_load_mean_us(&s)?;
    let report = engine::run(&s, &RunOptions::default())?;
    log::info!("{} events, digest {:016x}", report.events, report.digest);
    let result = SweepResult {
        points: vec![summarize(&report, zero_load)],
    };
    export(&result, a.output.format, a.output.out.as_deref())?;
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), CliError> {
    for &r in &a.rates {
        positive("rates", r)?;
    }
    if a.rates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage("--rates must be strictly increasing".into()));
    }
    let s = resolve(&a.scenario, None)?;
    let result = sweep(&s, &a.rates, None, &RunOptions::default())?;
    export(&result, a.output.format, a.output.out.as_deref())?;
    Ok(())
}

/// One row of the tail-at-scale table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailscaleRow {
    pub n: u32,
    pub requests: usize,
    pub p99_ms: Option<f64>,
    /// Measured share of requests that visited at least one slow leaf.
    pub slow_touch_fraction: f64,
    /// `1 - (1 - slow_frac)^n`.
    pub expected_touch_fraction: f64,
    /// p99 of the same cluster with no slow servers.
    pub clean_p99_oracle_ms: f64,
}

pub fn tailscale_rows(
    n_list: &[u32],
    slow_frac: f64,
    slow_factor: f64,
    mode: SlowMode,
    seed: u64,
    duration_s: f64,
) -> Result<Vec<TailscaleRow>, CliError> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let kind = BuiltinKind::TailAtScale {
            n,
            slow_frac,
            slow_factor,
            mode,
        };
        let mut s = generate_builtin_scenario(&kind, seed)?;
        s.client.duration_s = duration_s;
        s.client.warmup_s = Some(0.1 * duration_s);
        s.validate()?;
        let opts = RunOptions {
            record_tiers: false,
            ..RunOptions::default()
        };
        let report = engine::run(&s, &opts)?;
        let touched = match mode {
            SlowMode::PerRequest => report.touch_fraction("slow").unwrap_or(0.0),
            // Every request visits every leaf, so any slow server is hit.
            SlowMode::FixedServers => {
                if report.exec_path_names.iter().any(|p| p == "slow") && !report.latencies.is_empty() {
                    report.touch_fraction("slow").unwrap_or(0.0)
                } else {
                    0.0
                }
            }
        };
        rows.push(TailscaleRow {
            n,
            requests: report.latencies.len(),
            p99_ms: report.latencies.percentile_ms(99.0).ok(),
            slow_touch_fraction: touched,
            expected_touch_fraction: 1.0 - (1.0 - slow_frac).powi(n as i32),
            clean_p99_oracle_ms: oracle_fanout_max(1.0, n, 0.99)?,
        });
    }
    Ok(rows)
}

fn cmd_tailscale(a: &TailscaleArgs) -> Result<(), CliError> {
    if a.n_list.is_empty() || a.n_list.contains(&0) {
        return Err(CliError::Usage("--n-list needs positive cluster sizes".into()));
    }
    if !(0.0..=1.0).contains(&a.slow_frac) {
        return Err(CliError::Usage(format!("--slow-frac {} outside [0,1]", a.slow_frac)));
    }
    if !(a.slow_factor >= 1.0 && a.slow_factor.is_finite()) {
        return Err(CliError::Usage(format!("--slow-factor {} must be >= 1", a.slow_factor)));
    }
    positive("duration-s", a.duration_s)?;
    let mode = match a.mode {
        SlowModeArg::PerRequest => SlowMode::PerRequest,
        SlowModeArg::Fixed => SlowMode::FixedServers,
    };
    let rows = tailscale_rows(&a.n_list, a.slow_frac, a.slow_factor, mode, a.seed, a.duration_s)?;
    let mut out = open_out(a.output.out.as_deref())?;
    match a.output.format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &rows).map_err(StatsError::from)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_power(a: &PowerArgs) -> Result<(), CliError> {
    let mut s = resolve(&a.scenario, Some("power_two_tier"))?;
    let Some(pm) = s.client.power.as_mut() else {
        return Err(CliError::Usage("scenario has no power block in client.json".into()));
    };
    if let Some(i) = a.interval_s {
        pm.decision_interval_s = positive("interval-s", i)?;
    }
    if let Some(q) = a.qos_ms {
        if !(q > 0.0) {
            return Err(CliError::Usage(format!("--qos-ms must be positive, got {q}")));
        }
        pm.qos_target_ms = q;
    }
    if a.no_pm {
        pm.enabled = false;
    }
    s.validate()?;
    let report = engine::run(&s, &RunOptions::default())?;
    let power = report.power.as_ref().expect("power block present");
    power.write_trace_csv(open_out(a.out.as_deref())?)?;
    let summary = format!(
        "violation_rate={:.4} energy_proxy={:.3} windows={} dvfs_changes={}",
        power.violation_rate(),
        power.energy_proxy(),
        power.windows.len(),
        report.counters.dvfs_changes
    );
    if a.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

struct Check {
    name: String,
    measured: f64,
    expected: f64,
    tolerance: f64,
}

impl Check {
    fn passed(&self) -> bool {
        ((self.measured - self.expected) / self.expected).abs() <= self.tolerance
    }
}

fn oracle_checks(seed: u64) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();

    let mut mm1 = generate_builtin_scenario(&BuiltinKind::Mm1, seed)?;
    mm1.client.duration_s = 200.0;
    mm1.client.warmup_s = Some(20.0);
    let r = engine::run(&mm1, &RunOptions::default())?;
    let (mean_ms, _) = oracle_mm1(0.5, 1.0)?;
    checks.push(Check {
        name: "mm1 mean sojourn (lambda=0.5/ms, mu=1/ms)".into(),
        measured: r.latencies.mean_ms()?,
        expected: mean_ms,
        tolerance: 0.05,
    });

    let mut mmk = generate_builtin_scenario(&BuiltinKind::Mmk(2), seed)?;
    mmk.client.duration_s = 100.0;
    mmk.client.warmup_s = Some(10.0);
    let r = engine::run(&mmk, &RunOptions::default())?;
    checks.push(Check {
        name: "mmk wait probability (k=2, rho=0.5)".into(),
        measured: r.instances[0].wait_fraction().unwrap_or(0.0),
        expected: oracle_erlang_c(1.0, 1.0, 2)?,
        tolerance: 0.05,
    });

    let mut fan = generate_builtin_scenario(&BuiltinKind::Fanout(16), seed)?;
    fan.client.duration_s = 20_000.0;
    fan.client.warmup_s = Some(10.0);
    let r = engine::run(
        &fan,
        &RunOptions {
            record_tiers: false,
            ..RunOptions::default()
        },
    )?;
    checks.push(Check {
        name: "fanout p99 (n=16, exp leaves)".into(),
        measured: r.latencies.percentile_ms(99.0)?,
        expected: oracle_fanout_max(1.0, 16, 0.99)?,
        tolerance: 0.05,
    });
    Ok(checks)
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), CliError> {
    if a.scenario.scenario.is_some() || a.scenario.builtin.is_some() {
        let s = resolve(&a.scenario, None)?;
        println!(
            "PASS config: {} services, {} machines, {} instances, {} paths",
            s.services.len(),
            s.machines.len(),
            s.instances.len(),
            s.paths.len()
        );
    }
    if a.config_only {
        return Ok(());
    }
    let checks = oracle_checks(a.scenario.seed.unwrap_or(1))?;
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed() { "PASS" } else { "FAIL" };
        if !c.passed() {
            failed += 1;
        }
        println!(
            "{tag} {}: measured {:.4}, expected {:.4} (tolerance {:.0}%)",
            c.name,
            c.measured,
            c.expected,
            c.tolerance * 100.0
        );
    }
    if failed > 0 {
        return Err(CliError::OracleFailed(failed));
    }
    Ok(())
}
