//! C interface to exactrng.
//!
//! Process models are opaque handles created from the same JSON configs the
//! CLI reads. Results come back as JSON strings allocated here; free them
//! with [`exactrng_string_free`]. Every call returns an [`ExactrngStatus`];
//! on anything but `Ok` the thread-local message from
//! [`exactrng_last_error`] has the detail. Panics never cross the boundary.
//!
//! Symbols in returned JSON are 1-based, matching the CLI surface.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use exactrng::analysis::{expected_stopping_time, stopping_profile};
use exactrng::bounds::asymptotic_rates;
use exactrng::exactnum::{format_ratio, ratio_f64};
use exactrng::interval_alg::Generator;
use exactrng::process::{process_spectrum, ProcessSpec};
use exactrng::sim::{run_trials, sample_symbol, BitStream, SimConfig};
use exactrng::Error;
use serde_json::json;

/// Call status. Zero is success; everything else leaves a message in
/// `exactrng_last_error`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExactrngStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The model config failed to parse or validate.
    BadConfig = 3,
    /// The models are fine but the request cannot be served for them.
    BadRequest = 4,
    /// The computation exceeded a budget or lost a certificate.
    ComputeError = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

/// Opaque process model handle.
pub struct ExactrngProcess {
    spec: ProcessSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).expect("nul stripped"));
}

fn status_of(e: &Error) -> ExactrngStatus {
    match e {
        Error::Parse(_) | Error::InvalidModel(_) | Error::Json(_) => ExactrngStatus::BadConfig,
        Error::Usage(_)
        | Error::NullConditioning
        | Error::SymbolOutOfRange(_)
        | Error::InvalidCoinRealization
        | Error::CoinStreamExhausted { .. }
        | Error::RationalConditionalsRequired
        | Error::MinEntropyMemory
        | Error::MinEntropyIrrational
        | Error::NotIrreducible
        | Error::TransientClass
        | Error::CoinSpectrumZero
        | Error::SpectrumUnavailable => ExactrngStatus::BadRequest,
        _ => ExactrngStatus::ComputeError,
    }
}

fn fail(e: &Error) -> ExactrngStatus {
    set_error(&e.to_string());
    status_of(e)
}

fn guarded(f: impl FnOnce() -> ExactrngStatus) -> ExactrngStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            ExactrngStatus::Panic
        }
    }
}

/// Checked read of a C string argument.
///
/// # Safety
/// `p` must be null or point to a nul-terminated string.
unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, ExactrngStatus> {
    if p.is_null() {
        set_error("null pointer argument");
        return Err(ExactrngStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        ExactrngStatus::InvalidUtf8
    })
}

unsafe fn read_process<'a>(p: *const ExactrngProcess) -> Result<&'a ProcessSpec, ExactrngStatus> {
    if p.is_null() {
        set_error("null process handle");
        return Err(ExactrngStatus::NullPointer);
    }
    Ok(&(*p).spec)
}

fn give_string(out: *mut *mut c_char, s: String) -> ExactrngStatus {
    let c = CString::new(s.replace('\0', " ")).expect("nul stripped");
    unsafe { *out = c.into_raw() };
    ExactrngStatus::Ok
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn exactrng_version() -> *const c_char {
    const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread; valid until the next
/// failing call on the same thread. Do not free.
#[no_mangle]
pub extern "C" fn exactrng_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Frees a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn exactrng_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a process model from its JSON config. On success
/// writes a handle to `out`; release it with `exactrng_process_free`.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn exactrng_process_from_json(
    json: *const c_char,
    out: *mut *mut ExactrngProcess,
) -> ExactrngStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return ExactrngStatus::NullPointer;
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ProcessSpec::from_json(text) {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(ExactrngProcess { spec }));
                ExactrngStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a process handle. Null is a no-op.
///
/// # Safety
/// `p` must have come from `exactrng_process_from_json` and not been freed
/// before.
#[no_mangle]
pub unsafe extern "C" fn exactrng_process_free(p: *mut ExactrngProcess) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

// The coin budget per generated word mirrors the simulator default.
const GENERATE_M_CAP: usize = 1_000_000;

/// Generates one length-`n` target word from a seeded coin realization.
/// The result JSON carries the 1-based word `y`, the number of coin symbols
/// consumed `t`, and the random bits drawn.
///
/// # Safety
/// `coin` and `target` must be live process handles and `out_json` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn exactrng_generate(
    coin: *const ExactrngProcess,
    target: *const ExactrngProcess,
    n: u32,
    seed: u64,
    out_json: *mut *mut c_char,
) -> ExactrngStatus {
    guarded(|| {
        if out_json.is_null() {
            set_error("null output pointer");
            return ExactrngStatus::NullPointer;
        }
        let (coin, target) = match (read_process(coin), read_process(target)) {
            (Ok(c), Ok(t)) => (c, t),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let mut gen = match Generator::new(coin, target, n as usize) {
            Ok(g) => g,
            Err(e) => return fail(&e),
        };
        let mut bits = BitStream::for_trial(seed, 0);
        let mut coin_prefix: Vec<usize> = Vec::new();
        let cap = (n as usize).saturating_mul(GENERATE_M_CAP).max(1);
        while !gen.is_done() {
            if coin_prefix.len() >= cap {
                set_error("coin budget exhausted before the word completed");
                return ExactrngStatus::ComputeError;
            }
            let x = match sample_symbol(coin, &coin_prefix, &mut bits) {
                Ok(x) => x,
                Err(e) => return fail(&e),
            };
            coin_prefix.push(x);
            if let Err(e) = gen.push_coin(x) {
                return fail(&e);
            }
        }
        let y: Vec<usize> = gen.state().emitted.iter().map(|s| s + 1).collect();
        let report = json!({
            "y": y,
            "t": gen.state().coin_count(),
            "bits_drawn": bits.bits_drawn(),
            "seed": seed,
        });
        give_string(out_json, report.to_string())
    })
}

/// Exact stopping-time analysis: overflow probabilities Pr(T > m) for
/// m = 0..=m_max and a certified enclosure of E[T]. Exact values are
/// rational strings; `expected_t.upper` is null when no geometric tail
/// certificate exists.
///
/// # Safety
/// `coin` and `target` must be live process handles and `out_json` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn exactrng_analyze(
    coin: *const ExactrngProcess,
    target: *const ExactrngProcess,
    n: u32,
    m_max: u32,
    out_json: *mut *mut c_char,
) -> ExactrngStatus {
    guarded(|| {
        if out_json.is_null() {
            set_error("null output pointer");
            return ExactrngStatus::NullPointer;
        }
        let (coin, target) = match (read_process(coin), read_process(target)) {
            (Ok(c), Ok(t)) => (c, t),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let profile = match stopping_profile(coin, target, n as usize, m_max as usize) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        let overflow: Vec<_> = profile
            .overflow
            .iter()
            .enumerate()
            .map(|(m, p)| {
                json!({"m": m, "exact": format_ratio(p), "approx": ratio_f64(p)})
            })
            .collect();
        let expected = match expected_stopping_time(&profile) {
            Ok((lo, hi)) => json!({
                "lower": {"exact": format_ratio(&lo), "approx": ratio_f64(&lo)},
                "upper": {"exact": format_ratio(&hi), "approx": ratio_f64(&hi)},
            }),
            Err(Error::NoTailCertificate) => {
                let lo: exactrng::exactnum::Ratio = profile.overflow.iter().cloned().sum();
                json!({
                    "lower": {"exact": format_ratio(&lo), "approx": ratio_f64(&lo)},
                    "upper": null,
                })
            }
            Err(e) => return fail(&e),
        };
        let report = json!({
            "n": n,
            "m_max": m_max,
            "max_frontier": profile.max_frontier,
            "overflow": overflow,
            "expected_t": expected,
        });
        give_string(out_json, report.to_string())
    })
}

/// Asymptotic per-symbol rate figures for the pair, from the two entropy
/// spectra. Values carry certified error bounds.
///
/// # Safety
/// `coin` and `target` must be live process handles and `out_json` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn exactrng_rates(
    coin: *const ExactrngProcess,
    target: *const ExactrngProcess,
    out_json: *mut *mut c_char,
) -> ExactrngStatus {
    guarded(|| {
        if out_json.is_null() {
            set_error("null output pointer");
            return ExactrngStatus::NullPointer;
        }
        let (coin, target) = match (read_process(coin), read_process(target)) {
            (Ok(c), Ok(t)) => (c, t),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let coin_spec = match process_spectrum(coin) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let target_spec = match process_spectrum(target) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        match asymptotic_rates(&coin_spec, &target_spec) {
            Ok(report) => match serde_json::to_string(&report) {
                Ok(s) => give_string(out_json, s),
                Err(e) => fail(&Error::Json(e)),
            },
            Err(e) => fail(&e),
        }
    })
}

/// Seeded Monte Carlo run: `trials` generations of a length-`n` word, with
/// the stopping-time histogram, mean, and empirical word law in the result.
/// Deterministic for a fixed config.
///
/// # Safety
/// `coin` and `target` must be live process handles and `out_json` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn exactrng_simulate(
    coin: *const ExactrngProcess,
    target: *const ExactrngProcess,
    n: u32,
    trials: u64,
    seed: u64,
    out_json: *mut *mut c_char,
) -> ExactrngStatus {
    guarded(|| {
        if out_json.is_null() {
            set_error("null output pointer");
            return ExactrngStatus::NullPointer;
        }
        let (coin, target) = match (read_process(coin), read_process(target)) {
            (Ok(c), Ok(t)) => (c, t),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match run_trials(coin, target, SimConfig::new(seed, trials, n as usize)) {
            Ok(result) => match serde_json::to_string(&result) {
                Ok(s) => give_string(out_json, s),
                Err(e) => fail(&Error::Json(e)),
            },
            Err(e) => fail(&e),
        }
    })
}
