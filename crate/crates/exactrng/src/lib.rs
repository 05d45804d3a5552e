//! Exact generation of one finite-alphabet stochastic process (the target)
//! from realizations of another (the coin), by nested subdivision of the unit
//! interval, together with exact stopping-time analysis, overflow bounds,
//! asymptotic rate formulas, and a seeded Monte Carlo harness.
//!
//! All probability-valued quantities are arbitrary-precision rationals; only
//! logarithmic summaries (entropy rates, bit annotations) are real-valued, and
//! those carry certified error bounds.

pub mod analysis;
pub mod bounds;
pub mod cli;
pub mod exactnum;
pub mod interval_alg;
pub mod process;
pub mod sim;

/// Crate-wide error type. Variants carry the stable diagnostic wording that
/// the CLI and FFI surfaces expose verbatim.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("conditioning on null event")]
    NullConditioning,
    #[error("symbol out of range: {0}")]
    SymbolOutOfRange(usize),
    #[error("invalid coin realization")]
    InvalidCoinRealization,
    #[error("coin stream exhausted before generation completed (emitted {emitted} of {n} target symbols after {consumed} coin symbols)")]
    CoinStreamExhausted {
        emitted: usize,
        n: usize,
        consumed: usize,
    },
    #[error("exact analysis requires rational conditionals")]
    RationalConditionalsRequired,
    #[error("target length exceeds exact-analysis budget")]
    TargetLengthBudget,
    #[error("frontier cap exceeded")]
    FrontierCapExceeded,
    #[error("spectrum enumeration budget exceeded")]
    SpectrumBudget,
    #[error("no geometric tail certificate")]
    NoTailCertificate,
    #[error("min-entropy additivity unavailable")]
    MinEntropyMemory,
    #[error("min-entropy is irrational for this model")]
    MinEntropyIrrational,
    #[error("not irreducible")]
    NotIrreducible,
    #[error("transient class unsupported")]
    TransientClass,
    #[error("coin spectrum touches zero")]
    CoinSpectrumZero,
    #[error("spectrum not analytically available for this model")]
    SpectrumUnavailable,
    #[error("numeric evaluation out of range: {0}")]
    NumericRange(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
