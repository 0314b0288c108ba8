//! C ABI over the simulator.
//!
//! Scenarios and reports are opaque heap handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns a
//! [`QsimStatus`]; on failure the message is kept per thread and can be
//! copied out with [`qsim_last_error_message`]. Panics never cross the
//! boundary: they surface as `QSIM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qsim::config::{generate_builtin_scenario, load_scenario, BuiltinKind, ConfigError, Scenario};
use qsim::engine::{self, EngineError, RunOptions, RunReport};
use qsim::stats::{
    export, oracle_mm1, oracle_mm1_quantile, summarize, zero_load_mean_us, OutputFormat, StatsError, SweepPoint,
    SweepResult,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    RuntimeError = 4,
    IoError = 5,
    NoSamples = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsimFormat {
    Csv = 0,
    Json = 1,
}

/// Opaque scenario handle.
pub struct QsimScenario {
    inner: Scenario,
}

/// Opaque result of one run.
pub struct QsimReport {
    report: RunReport,
    summary: SweepPoint,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: QsimStatus, msg: impl Into<String>) -> QsimStatus {
    set_error(msg);
    status
}

fn config_status(e: &ConfigError) -> QsimStatus {
    match e {
        ConfigError::Io { .. } => QsimStatus::IoError,
        _ => QsimStatus::ConfigError,
    }
}

fn engine_status(e: &EngineError) -> QsimStatus {
    match e {
        EngineError::Config(c) => config_status(c),
        _ => QsimStatus::RuntimeError,
    }
}

fn stats_status(e: &StatsError) -> QsimStatus {
    match e {
        StatsError::NoSamples => QsimStatus::NoSamples,
        StatsError::InvalidPercentile(_) | StatsError::InvalidParameter(_) | StatsError::UnstableSystem { .. } => {
            QsimStatus::InvalidArgument
        }
        StatsError::Io(_) | StatsError::Csv(_) | StatsError::Json(_) => QsimStatus::IoError,
        _ => QsimStatus::RuntimeError,
    }
}

/// Runs `f`, converting panics into `QSIM_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> QsimStatus) -> QsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == QsimStatus::Ok {
                set_error("");
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(QsimStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, QsimStatus> {
    if p.is_null() {
        return Err(fail(QsimStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(QsimStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($p:expr, $what:literal) => {
        if $p.is_null() {
            return fail(QsimStatus::NullPointer, concat!($what, " is null"));
        }
    };
}

/// Loads a scenario directory. On success `*out` owns a new handle.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsim_scenario_load(dir: *const c_char, out: *mut *mut QsimScenario) -> QsimStatus {
    guard(|| {
        non_null!(out, "out");
        let dir = try_status!(str_arg(dir, "dir"));
        match load_scenario(dir) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(QsimScenario { inner: s }));
                QsimStatus::Ok
            }
            Err(e) => fail(config_status(&e), e.to_string()),
        }
    })
}

/// Builds a built-in scenario such as `"two_tier"` or `"fanout:16"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsim_scenario_builtin(
    name: *const c_char,
    seed: u64,
    out: *mut *mut QsimScenario,
) -> QsimStatus {
    guard(|| {
        non_null!(out, "out");
        let name = try_status!(str_arg(name, "name"));
        let built = name
            .parse::<BuiltinKind>()
            .and_then(|k| generate_builtin_scenario(&k, seed));
        match built {
            Ok(s) => {
                *out = Box::into_raw(Box::new(QsimScenario { inner: s }));
                QsimStatus::Ok
            }
            Err(e) => fail(config_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qsim_scenario_free(scenario: *mut QsimScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qsim_scenario_set_seed(scenario: *mut QsimScenario, seed: u64) -> QsimStatus {
    guard(|| {
        non_null!(scenario, "scenario");
        (*scenario).inner.client.rng_seed = seed;
        QsimStatus::Ok
    })
}

/// Sets the client duration, keeping the warmup share.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qsim_scenario_set_duration(scenario: *mut QsimScenario, duration_s: f64) -> QsimStatus {
    guard(|| {
        non_null!(scenario, "scenario");
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return fail(
                QsimStatus::InvalidArgument,
                format!("duration {duration_s} must be positive"),
            );
        }
        let c = &mut (*scenario).inner.client;
        let share = c.warmup() / c.duration_s;
        c.duration_s = duration_s;
        c.warmup_s = Some(share * duration_s);
        QsimStatus::Ok
    })
}

/// Replaces the load pattern with a constant rate.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qsim_scenario_set_rate(scenario: *mut QsimScenario, qps: f64) -> QsimStatus {
    guard(|| {
        non_null!(scenario, "scenario");
        if !(qps >= 0.0 && qps.is_finite()) {
            return fail(
                QsimStatus::InvalidArgument,
                format!("rate {qps} must be finite and non-negative"),
            );
        }
        (*scenario).inner.set_constant_rate(qps);
        QsimStatus::Ok
    })
}

/// Simulates the scenario. On success `*out` owns a new report handle.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsim_run(scenario: *const QsimScenario, out: *mut *mut QsimReport) -> QsimStatus {
    guard(|| {
        non_null!(scenario, "scenario");
        non_null!(out, "out");
        let s = &(*scenario).inner;
        let run = s
            .validate()
            .map_err(EngineError::from)
            .and_then(|_| zero_load_mean_us(s))
            .and_then(|z| engine::run(s, &RunOptions::default()).map(|r| (z, r)));
        match run {
            Ok((zero_load, report)) => {
                let summary = summarize(&report, zero_load);
                *out = Box::into_raw(Box::new(QsimReport { report, summary }));
                QsimStatus::Ok
            }
            Err(e) => fail(engine_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `report` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qsim_report_free(report: *mut QsimReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// End-to-end latency percentile in milliseconds, `p` in (0, 100].
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsim_report_percentile_ms(report: *const QsimReport, p: f64, out: *mut f64) -> QsimStatus {
    guard(|| {
        non_null!(report, "report");
        non_null!(out, "out");
        match (*report).report.latencies.percentile_ms(p) {
            Ok(v) => {
                *out = v;
                QsimStatus::Ok
            }
            Err(e) => fail(stats_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsim_report_mean_ms(report: *const QsimReport, out: *mut f64) -> QsimStatus {
    guard(|| {
        non_null!(report, "report");
        non_null!(out, "out");
        match (*report).report.latencies.mean_ms() {
            Ok(v) => {
                *out = v;
                QsimStatus::Ok
            }
            Err(e) => fail(stats_status(&e), e.to_string()),
        }
    })
}

/// Requests measured after warmup.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsim_report_measured(report: *const QsimReport, out: *mut u64) -> QsimStatus {
    guard(|| {
        non_null!(report, "report");
        non_null!(out, "out");
        *out = (*report).report.latencies.len() as u64;
        QsimStatus::Ok
    })
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsim_report_achieved_qps(report: *const QsimReport, out: *mut f64) -> QsimStatus {
    guard(|| {
        non_null!(report, "report");
        non_null!(out, "out");
        *out = (*report).report.achieved_qps;
        QsimStatus::Ok
    })
}

/// Largest number of requests outstanding at once.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsim_report_max_outstanding(report: *const QsimReport, out: *mut u64) -> QsimStatus {
    guard(|| {
        non_null!(report, "report");
        non_null!(out, "out");
        *out = (*report).report.counters.max_outstanding;
        QsimStatus::Ok
    })
}

/// Digest of the processed event sequence; equal digests mean equal runs.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsim_report_digest(report: *const QsimReport, out: *mut u64) -> QsimStatus {
    guard(|| {
        non_null!(report, "report");
        non_null!(out, "out");
        *out = (*report).report.digest;
        QsimStatus::Ok
    })
}

/// Writes the one-row summary to `path` as CSV or JSON.
///
/// # Safety
/// `report` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qsim_report_export(
    report: *const QsimReport,
    format: QsimFormat,
    path: *const c_char,
) -> QsimStatus {
    guard(|| {
        non_null!(report, "report");
        let path = try_status!(str_arg(path, "path"));
        let result = SweepResult {
            points: vec![(*report).summary.clone()],
        };
        let fmt = match format {
            QsimFormat::Csv => OutputFormat::Csv,
            QsimFormat::Json => OutputFormat::Json,
        };
        match export(&result, fmt, Some(Path::new(path))) {
            Ok(()) => QsimStatus::Ok,
            Err(e) => fail(stats_status(&e), e.to_string()),
        }
    })
}

/// Closed-form M/M/1 mean sojourn and p99, both in units of `1 / mu`.
///
/// # Safety
/// `mean` and `p99` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qsim_oracle_mm1(lambda: f64, mu: f64, mean: *mut f64, p99: *mut f64) -> QsimStatus {
    guard(|| {
        non_null!(mean, "mean");
        non_null!(p99, "p99");
        match oracle_mm1(lambda, mu).and_then(|(m, _)| Ok((m, oracle_mm1_quantile(lambda, mu, 0.99)?))) {
            Ok((m, q)) => {
                *mean = m;
                *p99 = q;
                QsimStatus::Ok
            }
            Err(e) => fail(stats_status(&e), e.to_string()),
        }
    })
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// always NUL-terminated when `len > 0`). Returns the full message length
/// excluding the terminator, so a caller can size a retry.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn qsim_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
