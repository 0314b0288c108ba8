use std::ffi::{c_char, CStr, CString};
use std::ptr;

use qsim_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { qsim_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert_eq!(n.min(511), s.len());
    s
}

fn builtin(name: &str, seed: u64) -> *mut QsimScenario {
    let name = CString::new(name).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { qsim_scenario_builtin(name.as_ptr(), seed, &mut s) },
        QsimStatus::Ok
    );
    assert!(!s.is_null());
    s
}

#[test]
fn run_lifecycle_and_accessors() {
    let s = builtin("mm1", 3);
    unsafe {
        assert_eq!(qsim_scenario_set_duration(s, 50.0), QsimStatus::Ok);
        assert_eq!(qsim_scenario_set_rate(s, 500.0), QsimStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(qsim_run(s, &mut r), QsimStatus::Ok, "{}", last_error());
        let (mut mean, mut p99, mut n, mut qps) = (0.0, 0.0, 0u64, 0.0);
        assert_eq!(qsim_report_mean_ms(r, &mut mean), QsimStatus::Ok);
        assert_eq!(qsim_report_percentile_ms(r, 99.0, &mut p99), QsimStatus::Ok);
        assert_eq!(qsim_report_measured(r, &mut n), QsimStatus::Ok);
        assert_eq!(qsim_report_achieved_qps(r, &mut qps), QsimStatus::Ok);
        assert!(n > 20_000, "{n}");
        assert!((mean - 2.0).abs() < 0.2, "{mean}");
        assert!(p99 > mean);
        assert!((qps - 500.0).abs() < 25.0, "{qps}");
        let mut bad = 0.0;
        assert_eq!(qsim_report_percentile_ms(r, 0.0, &mut bad), QsimStatus::InvalidArgument);
        assert!(last_error().contains("percentile"));
        qsim_report_free(r);
        qsim_scenario_free(s);
    }
}

#[test]
fn same_seed_same_digest() {
    let digest = |seed| unsafe {
        let s = builtin("two_tier", seed);
        qsim_scenario_set_duration(s, 0.5);
        let mut r = ptr::null_mut();
        assert_eq!(qsim_run(s, &mut r), QsimStatus::Ok);
        let mut d = 0;
        qsim_report_digest(r, &mut d);
        qsim_report_free(r);
        qsim_scenario_free(s);
        d
    };
    assert_eq!(digest(7), digest(7));
    assert_ne!(digest(7), digest(8));
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut s = ptr::null_mut();
        let bad = CString::new("no_such_thing").unwrap();
        assert_eq!(qsim_scenario_builtin(bad.as_ptr(), 1, &mut s), QsimStatus::ConfigError);
        assert!(last_error().contains("no_such_thing"));
        assert!(s.is_null());

        assert_eq!(qsim_scenario_builtin(ptr::null(), 1, &mut s), QsimStatus::NullPointer);
        assert_eq!(qsim_run(ptr::null(), ptr::null_mut()), QsimStatus::NullPointer);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(qsim_scenario_load(path.as_ptr(), &mut s), QsimStatus::ConfigError);
        assert!(last_error().contains(".json"), "{}", last_error());

        let s = builtin("mm1", 1);
        assert_eq!(qsim_scenario_set_duration(s, -1.0), QsimStatus::InvalidArgument);
        assert_eq!(qsim_scenario_set_rate(s, f64::NAN), QsimStatus::InvalidArgument);
        qsim_scenario_free(s);

        let (mut m, mut q) = (0.0, 0.0);
        assert_eq!(qsim_oracle_mm1(2.0, 1.0, &mut m, &mut q), QsimStatus::InvalidArgument);
        assert_eq!(qsim_oracle_mm1(0.5, 1.0, &mut m, &mut q), QsimStatus::Ok);
        assert!((m - 2.0).abs() < 1e-12);
        assert!((q - 2.0 * 100f64.ln()).abs() < 1e-9);
        assert_eq!(last_error(), "");

        qsim_scenario_free(ptr::null_mut());
        qsim_report_free(ptr::null_mut());
    }
}

#[test]
fn truncated_error_buffer_is_terminated() {
    unsafe {
        let mut s = ptr::null_mut();
        let bad = CString::new("definitely_not_builtin").unwrap();
        qsim_scenario_builtin(bad.as_ptr(), 1, &mut s);
        let mut buf = [0x7f as c_char; 8];
        let full = qsim_last_error_message(buf.as_mut_ptr(), buf.len());
        assert!(full > 7);
        assert_eq!(buf[7], 0);
        assert_eq!(qsim_last_error_message(ptr::null_mut(), 0), full);
    }
}

#[test]
fn export_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let s = builtin("mm1", 5);
        qsim_scenario_set_duration(s, 20.0);
        let mut r = ptr::null_mut();
        assert_eq!(qsim_run(s, &mut r), QsimStatus::Ok);
        for (fmt, name) in [(QsimFormat::Csv, "out.csv"), (QsimFormat::Json, "out.json")] {
            let p = dir.path().join(name);
            let c = CString::new(p.to_str().unwrap()).unwrap();
            assert_eq!(qsim_report_export(r, fmt, c.as_ptr()), QsimStatus::Ok);
            let text = std::fs::read_to_string(&p).unwrap();
            assert!(text.contains("offered_qps"), "{text}");
        }
        let missing = CString::new(dir.path().join("no/such/dir.csv").to_str().unwrap()).unwrap();
        assert_eq!(
            qsim_report_export(r, QsimFormat::Csv, missing.as_ptr()),
            QsimStatus::IoError
        );
        qsim_report_free(r);
        qsim_scenario_free(s);
    }
}

#[test]
fn header_declares_every_symbol() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/qsim.h")).unwrap();
    for sym in [
        "typedef struct QsimScenario QsimScenario;",
        "typedef struct QsimReport QsimReport;",
        "QSIM_STATUS_OK = 0",
        "QSIM_STATUS_PANIC",
        "QSIM_FORMAT_JSON = 1",
        "qsim_scenario_load(const char *dir",
        "qsim_scenario_builtin(",
        "qsim_scenario_free(",
        "qsim_scenario_set_seed(",
        "qsim_scenario_set_duration(",
        "qsim_scenario_set_rate(",
        "qsim_run(const struct QsimScenario *scenario",
        "qsim_report_free(",
        "qsim_report_percentile_ms(",
        "qsim_report_mean_ms(",
        "qsim_report_measured(",
        "qsim_report_achieved_qps(",
        "qsim_report_max_outstanding(",
        "qsim_report_digest(",
        "qsim_report_export(",
        "qsim_oracle_mm1(",
        "size_t qsim_last_error_message(char *buf, size_t len)",
        "const char *qsim_version(void)",
    ] {
        assert!(header.contains(sym), "header lacks `{sym}`");
    }
    assert!(header.starts_with("#ifndef QSIM_H"));
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(qsim_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
