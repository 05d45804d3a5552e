//! Exercises the C surface from Rust: status codes, handle lifecycle,
//! error messages, and agreement with the underlying library.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use exactrng::sim::{run_trials, SimConfig};
use exactrng_ffi::{
    exactrng_analyze, exactrng_generate, exactrng_last_error, exactrng_process_free,
    exactrng_process_from_json, exactrng_rates, exactrng_simulate, exactrng_string_free,
    exactrng_version, ExactrngProcess, ExactrngStatus,
};
use serde_json::Value;

const FAIR: &str = r#"{"kind":"iid","pmf":["1/2","1/2"]}"#;
const TWOTHIRDS: &str = r#"{"kind":"iid","pmf":["2/3","1/3"]}"#;
const ONETHIRD: &str = r#"{"kind":"iid","pmf":["1/3","2/3"]}"#;
const MARKOV_Q: &str =
    r#"{"kind":"markov","transition":[["3/4","1/4"],["1/4","3/4"]],"initial":["1/2","1/2"]}"#;
const HARMONIC: &str = r#"{"kind":"named","family":"harmonic"}"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(exactrng_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn make(json: &str) -> *mut ExactrngProcess {
    let c = CString::new(json).unwrap();
    let mut out: *mut ExactrngProcess = ptr::null_mut();
    let st = unsafe { exactrng_process_from_json(c.as_ptr(), &mut out) };
    assert_eq!(st, ExactrngStatus::Ok, "load failed: {}", last_error());
    assert!(!out.is_null());
    out
}

fn take_string(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { exactrng_string_free(p) };
    s
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(exactrng_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn process_lifecycle_and_null_frees() {
    let p = make(FAIR);
    unsafe {
        exactrng_process_free(p);
        exactrng_process_free(ptr::null_mut());
        exactrng_string_free(ptr::null_mut());
    }
}

#[test]
fn null_json_is_rejected() {
    let mut out: *mut ExactrngProcess = ptr::null_mut();
    let st = unsafe { exactrng_process_from_json(ptr::null(), &mut out) };
    assert_eq!(st, ExactrngStatus::NullPointer);
    assert!(out.is_null());
    assert!(last_error().contains("null"), "got: {}", last_error());
}

#[test]
fn null_out_pointer_is_rejected() {
    let c = CString::new(FAIR).unwrap();
    let st = unsafe { exactrng_process_from_json(c.as_ptr(), ptr::null_mut()) };
    assert_eq!(st, ExactrngStatus::NullPointer);
}

#[test]
fn invalid_utf8_is_rejected() {
    let bytes: &[u8] = b"\xff\xfe\0";
    let mut out: *mut ExactrngProcess = ptr::null_mut();
    let st = unsafe {
        exactrng_process_from_json(bytes.as_ptr() as *const c_char, &mut out)
    };
    assert_eq!(st, ExactrngStatus::InvalidUtf8);
}

#[test]
fn malformed_config_is_rejected_with_field_message() {
    let c = CString::new(r#"{"kind":"iid","pmf":["1/2","1/3"]}"#).unwrap();
    let mut out: *mut ExactrngProcess = ptr::null_mut();
    let st = unsafe { exactrng_process_from_json(c.as_ptr(), &mut out) };
    assert_eq!(st, ExactrngStatus::BadConfig);
    assert!(out.is_null());
    assert!(last_error().contains("pmf"), "got: {}", last_error());
}

#[test]
fn named_coin_generation_is_a_bad_request() {
    let coin = make(HARMONIC);
    let target = make(TWOTHIRDS);
    let mut out: *mut c_char = ptr::null_mut();
    let st = unsafe { exactrng_generate(coin, target, 1, 0, &mut out) };
    assert_eq!(st, ExactrngStatus::BadRequest);
    assert!(last_error().contains("rational"), "got: {}", last_error());
    unsafe {
        exactrng_process_free(coin);
        exactrng_process_free(target);
    }
}

#[test]
fn generate_is_deterministic_and_matches_the_simulator() {
    let coin = make(FAIR);
    let target = make(TWOTHIRDS);
    let mut reports = Vec::new();
    for _ in 0..2 {
        let mut out: *mut c_char = ptr::null_mut();
        let st = unsafe { exactrng_generate(coin, target, 3, 7, &mut out) };
        assert_eq!(st, ExactrngStatus::Ok, "{}", last_error());
        reports.push(take_string(out));
    }
    assert_eq!(reports[0], reports[1]);
    let rep: Value = serde_json::from_str(&reports[0]).unwrap();
    let y: Vec<u64> = rep["y"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(y.len(), 3);
    assert!(y.iter().all(|&s| s == 1 || s == 2));

    // Trial 0 of the simulator uses the same substream, so its stopping
    // time and word must agree with the single generation.
    let coin_spec = exactrng::process::ProcessSpec::from_json(FAIR).unwrap();
    let target_spec = exactrng::process::ProcessSpec::from_json(TWOTHIRDS).unwrap();
    let sim = run_trials(&coin_spec, &target_spec, SimConfig::new(7, 1, 3)).unwrap();
    let (t, count) = sim.t_counts.iter().next().unwrap();
    assert_eq!(*count, 1);
    assert_eq!(rep["t"].as_u64().unwrap(), *t as u64);
    let word: String = y.iter().map(|s| s.to_string()).collect();
    assert!(sim.empirical_law.contains_key(&word));

    unsafe {
        exactrng_process_free(coin);
        exactrng_process_free(target);
    }
}

#[test]
fn analyze_reports_the_geometric_profile() {
    let coin = make(FAIR);
    let target = make(TWOTHIRDS);
    let mut out: *mut c_char = ptr::null_mut();
    let st = unsafe { exactrng_analyze(coin, target, 1, 10, &mut out) };
    assert_eq!(st, ExactrngStatus::Ok, "{}", last_error());
    let rep: Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(rep["max_frontier"].as_u64().unwrap(), 1);
    let rows = rep["overflow"].as_array().unwrap();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[10]["exact"].as_str().unwrap(), "1/1024");
    assert_eq!(rep["expected_t"]["upper"]["exact"].as_str().unwrap(), "2");
    unsafe {
        exactrng_process_free(coin);
        exactrng_process_free(target);
    }
}

#[test]
fn analyze_with_null_handle_is_rejected() {
    let target = make(TWOTHIRDS);
    let mut out: *mut c_char = ptr::null_mut();
    let st = unsafe { exactrng_analyze(ptr::null(), target, 1, 5, &mut out) };
    assert_eq!(st, ExactrngStatus::NullPointer);
    assert!(out.is_null());
    unsafe { exactrng_process_free(target) };
}

#[test]
fn rates_certify_the_entropy_ratio() {
    let coin = make(MARKOV_Q);
    let target = make(ONETHIRD);
    let mut out: *mut c_char = ptr::null_mut();
    let st = unsafe { exactrng_rates(coin, target, &mut out) };
    assert_eq!(st, ExactrngStatus::Ok, "{}", last_error());
    let rep: Value = serde_json::from_str(&take_string(out)).unwrap();
    let value = rep["r_int_upper"]["value"].as_f64().unwrap();
    let err = rep["r_int_upper"]["err"].as_f64().unwrap();
    assert!((value - 1.131_912_480_281_289_2).abs() < 1e-9, "value {value}");
    assert!(err < 1e-9, "err {err}");
    unsafe {
        exactrng_process_free(coin);
        exactrng_process_free(target);
    }
}

#[test]
fn rates_for_a_named_coin_are_a_bad_request() {
    let coin = make(HARMONIC);
    let target = make(TWOTHIRDS);
    let mut out: *mut c_char = ptr::null_mut();
    let st = unsafe { exactrng_rates(coin, target, &mut out) };
    assert_eq!(st, ExactrngStatus::BadRequest);
    unsafe {
        exactrng_process_free(coin);
        exactrng_process_free(target);
    }
}

#[test]
fn simulate_matches_the_library_run() {
    let coin = make(FAIR);
    let target = make(TWOTHIRDS);
    let mut out: *mut c_char = ptr::null_mut();
    let st = unsafe { exactrng_simulate(coin, target, 2, 50, 11, &mut out) };
    assert_eq!(st, ExactrngStatus::Ok, "{}", last_error());
    let rep: Value = serde_json::from_str(&take_string(out)).unwrap();

    let coin_spec = exactrng::process::ProcessSpec::from_json(FAIR).unwrap();
    let target_spec = exactrng::process::ProcessSpec::from_json(TWOTHIRDS).unwrap();
    let sim = run_trials(&coin_spec, &target_spec, SimConfig::new(11, 50, 2)).unwrap();
    assert_eq!(rep["mean_t"].as_f64(), sim.mean_t);
    assert_eq!(rep["truncated_trials"].as_u64().unwrap(), 0);
    let total: u64 = rep["t_counts"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(total, 50);
    unsafe {
        exactrng_process_free(coin);
        exactrng_process_free(target);
    }
}
