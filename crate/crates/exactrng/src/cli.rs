//! Command-line surface: flag parsing, config loading, and report rendering.
//!
//! Every report embeds a manifest (tool version, command, input paths,
//! parameters, seed) so a run can be reproduced from its own output. Reports
//! carry no timestamps and render maps in sorted order, so re-running a
//! command yields byte-identical output. With --out the report is rendered
//! completely before an atomic rename into place; a failing run never leaves
//! a partial file.
//!
//! Symbols are 1-based on this surface, matching the tree export. Exit code
//! 0 means the command ran and every checked invariant held, 1 means a check
//! failed or a computation could not be certified, 2 means the request
//! itself was unusable (bad flags, malformed config).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::analysis::{
    expected_stopping_time, fl_truncate, output_law_at, spectrum_mass, stopping_profile_with_cap,
    validity_check, Evidence, StoppingProfile,
};
use crate::bounds::{achievability_bound, asymptotic_rates, converse_bound, BoundQuery};
use crate::exactnum::{format_ratio, parse_ratio, pow2, ratio_f64, CertReal, Ratio};
use crate::interval_alg::{build_tree_with_cap, Generator, DEFAULT_DEPTH_LIMIT, DEFAULT_FRONTIER_CAP};
use crate::process::{format_symbols, process_spectrum, ProcessSpec, SpectrumSummary};
use crate::sim::{empirical_spectrum, run_trials, sample_from_pmf, BitStream, SimConfig};
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "exactrng",
    version,
    about = "Exact generation of one stochastic process from another by interval subdivision"
)]
pub struct Cli {
    /// Write the report to this file (atomically) instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Report format
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Run the generator on an explicit or sampled coin realization
    Generate(GenerateArgs),
    /// Stopping-time profile, expected stopping time, and validity check
    Analyze(AnalyzeArgs),
    /// Converse and achievability bounds over an (m, lambda, tau) grid
    Bounds(BoundsArgs),
    /// Asymptotic rate figures from the two entropy spectra
    Rates(RatesArgs),
    /// Seeded Monte Carlo generation runs
    Simulate(SimulateArgs),
    /// Exact spectrum masses or an empirical rate histogram for one process
    Spectrum(SpectrumArgs),
    /// Fixed-length truncation: approximate law and its distance to the target
    Flrng(FlrngArgs),
    /// Expand the algorithm tree and export it
    Tree(TreeArgs),
}

#[derive(Args)]
struct ModelPair {
    /// Coin model config (JSON)
    #[arg(long, value_name = "PATH")]
    coin: PathBuf,
    /// Target model config (JSON)
    #[arg(long, value_name = "PATH")]
    target: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    models: ModelPair,
    /// Target word length
    #[arg(short, long)]
    n: usize,
    /// Comma-separated coin symbols (1-based) to feed the generator
    #[arg(long, value_name = "SYMS", conflicts_with = "seed")]
    coin_stream: Option<String>,
    /// Sample the coin realization from this seed instead
    #[arg(long)]
    seed: Option<u64>,
    /// Coin budget when sampling (default one million per target symbol)
    #[arg(long, value_name = "M")]
    m_cap: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    models: ModelPair,
    /// Target word length
    #[arg(short, long)]
    n: usize,
    /// Overflow horizon: profile covers Pr(T > m) for m up to this
    #[arg(short = 'm', long = "m-max", value_name = "M")]
    m_max: usize,
    /// Validity tolerance on the deficit at the horizon (exact rational);
    /// without it the deficit is reported but not enforced
    #[arg(long, value_name = "RATIO")]
    eps: Option<String>,
    /// Probability threshold for the min-entropy feasibility check
    /// (required for named-family coins)
    #[arg(long, value_name = "RATIO")]
    threshold: Option<String>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    models: ModelPair,
    /// Target word length
    #[arg(short, long)]
    n: usize,
    /// Comma-separated coin lengths m
    #[arg(short = 'm', long = "m-list", value_name = "LIST")]
    m_list: String,
    /// Comma-separated lambda exponents in bits; t_lambda = 2^-lambda
    #[arg(long, value_name = "LIST")]
    lambda_bits: String,
    /// Comma-separated tau exponents in bits; t_tau = 2^-tau
    #[arg(long, value_name = "LIST")]
    tau_bits: String,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    models: ModelPair,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    models: ModelPair,
    /// Target word length per trial
    #[arg(short, long)]
    n: usize,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    /// Per-trial coin budget (default one million per target symbol)
    #[arg(long, value_name = "M")]
    m_cap: Option<usize>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Model config (JSON); the spectrum concerns a single process, so
    /// supply it under whichever role it plays
    #[arg(long = "coin", visible_alias = "target", value_name = "PATH")]
    model: PathBuf,
    /// Sequence length
    #[arg(short = 'm', long = "length", value_name = "M")]
    m: usize,
    /// Comma-separated lambda exponents in bits; thresholds 2^-lambda
    #[arg(long, value_name = "LIST")]
    lambda_bits: Option<String>,
    /// Comma-separated explicit rational thresholds
    #[arg(long, value_name = "LIST")]
    threshold: Option<String>,
    /// Sample this many paths and report an empirical histogram instead of
    /// the exact masses
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FlrngArgs {
    #[command(flatten)]
    models: ModelPair,
    /// Target word length
    #[arg(short, long)]
    n: usize,
    /// Coin budget of the truncated algorithm
    #[arg(short = 'm', long)]
    m: usize,
    /// Fallback word: comma-separated 1-based target symbols, length n
    #[arg(long, value_name = "SYMS")]
    fallback: String,
}

#[derive(Args)]
struct TreeArgs {
    #[command(flatten)]
    models: ModelPair,
    /// Target word length
    #[arg(short, long)]
    n: usize,
    /// Expansion depth limit
    #[arg(long, default_value_t = DEFAULT_DEPTH_LIMIT)]
    depth: usize,
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_class(&e)
        }
    }
}

fn exit_class(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Parse(_) | Error::InvalidModel(_) | Error::Io(_)
        | Error::Json(_) => 2,
        _ => 1,
    }
}

struct Rendered {
    manifest: Value,
    report: Value,
    text: String,
    csv: Option<String>,
    exit: i32,
}

fn run(cli: &Cli) -> Result<i32> {
    let r = match &cli.command {
        Command::Generate(a) => cmd_generate(a)?,
        Command::Analyze(a) => cmd_analyze(a)?,
        Command::Bounds(a) => cmd_bounds(a)?,
        Command::Rates(a) => cmd_rates(a)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Spectrum(a) => cmd_spectrum(a)?,
        Command::Flrng(a) => cmd_flrng(a)?,
        Command::Tree(a) => cmd_tree(a)?,
    };
    let content = render(cli.format, &r)?;
    emit(cli.out.as_deref(), &content)?;
    Ok(r.exit)
}

fn render(format: Format, r: &Rendered) -> Result<String> {
    match format {
        Format::Json => {
            let doc = json!({ "manifest": r.manifest, "report": r.report });
            Ok(format!("{}\n", serde_json::to_string_pretty(&doc)?))
        }
        Format::Text => {
            let head = format!(
                "# exactrng {}\n# manifest {}\n",
                env!("CARGO_PKG_VERSION"),
                serde_json::to_string(&r.manifest)?
            );
            Ok(head + &r.text)
        }
        Format::Csv => {
            let body = r
                .csv
                .as_deref()
                .ok_or_else(|| Error::Usage("this report has no csv rendering".into()))?;
            Ok(format!("# {}\n{}", serde_json::to_string(&r.manifest)?, body))
        }
    }
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(content.as_bytes())?;
            tmp.persist(path).map_err(|e| Error::Io(e.error))?;
            Ok(())
        }
    }
}

fn manifest(command: &str, inputs: Value, params: Value, seed: Option<u64>) -> Value {
    json!({
        "schema": 1,
        "tool": "exactrng",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "inputs": inputs,
        "params": params,
        "seed": seed,
    })
}

fn load_model(path: &Path) -> Result<ProcessSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    ProcessSpec::from_json(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

fn load_pair(p: &ModelPair) -> Result<(ProcessSpec, ProcessSpec)> {
    Ok((load_model(&p.coin)?, load_model(&p.target)?))
}

fn pair_inputs(p: &ModelPair) -> Value {
    json!({
        "coin": p.coin.display().to_string(),
        "target": p.target.display().to_string(),
    })
}

/// Symbols are 1-based on the CLI surface.
fn parse_symbol_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let v: usize = t
                .parse()
                .map_err(|_| Error::Usage(format!("{what}: bad symbol {t:?}")))?;
            if v == 0 {
                return Err(Error::Usage(format!("{what}: symbols are 1-based")));
            }
            Ok(v - 1)
        })
        .collect()
}

fn parse_int_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    let out: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Usage(format!("{what}: bad entry {t:?}")))
        })
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::Usage(format!("{what}: empty list")));
    }
    Ok(out)
}

fn parse_ratio_arg(s: &str, what: &str) -> Result<Ratio> {
    parse_ratio(s).map_err(|e| Error::Usage(format!("{what}: {e}")))
}

fn frontier_cap() -> Result<usize> {
    match std::env::var("EXACTRNG_FRONTIER_CAP") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|c| *c > 0)
            .ok_or_else(|| Error::Usage(format!("EXACTRNG_FRONTIER_CAP: invalid value {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_FRONTIER_CAP),
        Err(e) => Err(Error::Usage(format!("EXACTRNG_FRONTIER_CAP: {e}"))),
    }
}

fn rat_value(r: &Ratio) -> Value {
    json!({ "exact": format_ratio(r), "approx": ratio_f64(r) })
}

fn cert_value(c: &CertReal) -> Value {
    json!({
        "value": c.value_f64(),
        "err": c.err_f64(),
        "lo": format_ratio(c.lo()),
        "hi": format_ratio(c.hi()),
    })
}

fn summary_value(s: &SpectrumSummary) -> Value {
    json!({
        "sup": cert_value(&s.sup),
        "inf": cert_value(&s.inf),
        "avg": cert_value(&s.avg),
        "one_point": s.is_one_point(),
    })
}

fn evidence_value(e: &Evidence) -> Value {
    match e {
        Evidence::DeficitAtMmax {
            m,
            deficit,
            eps,
            within,
        } => json!({
            "kind": "deficit_at_m_max",
            "m": m,
            "deficit": rat_value(deficit),
            "eps": eps.as_ref().map(format_ratio),
            "within": within,
        }),
        Evidence::MinEntropyThresholdMet { threshold, m_star } => json!({
            "kind": "min_entropy_threshold_met",
            "threshold": format_ratio(threshold),
            "m_star": m_star,
        }),
        Evidence::MinEntropySearchExhausted { threshold, limit } => json!({
            "kind": "min_entropy_search_exhausted",
            "threshold": format_ratio(threshold),
            "limit": limit,
        }),
        Evidence::InfeasibleAtThreshold {
            threshold,
            residual_lower,
        } => json!({
            "kind": "infeasible_at_threshold",
            "threshold": format_ratio(threshold),
            "residual_lower": rat_value(residual_lower),
        }),
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<Rendered> {
    let (coin, target) = load_pair(&a.models)?;
    let mut gen = Generator::new(&coin, &target, a.n)?;
    let mut transcript: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut consumed = 0usize;
    match (&a.coin_stream, a.seed) {
        (Some(s), None) => {
            let stream = parse_symbol_list(s, "--coin-stream")?;
            for &x in &stream {
                if gen.is_done() {
                    break;
                }
                let before = gen.state().emitted.len();
                gen.push_coin(x)?;
                transcript.push((x, gen.state().emitted[before..].to_vec()));
                consumed += 1;
            }
        }
        (None, Some(seed)) => {
            let m_cap = a
                .m_cap
                .unwrap_or_else(|| a.n.saturating_mul(1_000_000).max(1));
            let mut bits = BitStream::for_trial(seed, 0);
            let mut coin_state = coin.start();
            while !gen.is_done() && consumed < m_cap {
                let x = sample_from_pmf(&coin.state_pmf(&coin_state), &mut bits)?;
                coin.advance(&mut coin_state, x)?;
                let before = gen.state().emitted.len();
                gen.push_coin(x)?;
                transcript.push((x, gen.state().emitted[before..].to_vec()));
                consumed += 1;
            }
            if !gen.is_done() {
                return Err(Error::CoinStreamExhausted {
                    emitted: gen.state().emitted.len(),
                    n: a.n,
                    consumed,
                });
            }
        }
        _ => {
            return Err(Error::Usage(
                "generate needs exactly one of --coin-stream or --seed".into(),
            ))
        }
    }
    let st = gen.state();
    let done = st.is_done();
    let t_alpha = target.alphabet_size();
    let report = json!({
        "n": a.n,
        "emitted": format_symbols(&st.emitted, t_alpha),
        "emitted_count": st.emitted.len(),
        "done": done,
        "t": if done { Value::from(st.coin_count()) } else { Value::Null },
        "consumed": consumed,
        "transcript": transcript
            .iter()
            .map(|(x, e)| json!({
                "coin": x + 1,
                "emitted": format_symbols(e, t_alpha),
            }))
            .collect::<Vec<_>>(),
    });
    let mut text = String::new();
    let _ = writeln!(text, "emitted: {}", format_symbols(&st.emitted, t_alpha));
    let _ = writeln!(text, "done: {done}");
    if done {
        let _ = writeln!(text, "T: {}", st.coin_count());
    }
    let _ = writeln!(text, "consumed: {consumed}");
    for (x, e) in &transcript {
        let _ = writeln!(text, "coin {} -> emit {}", x + 1, format_symbols(e, t_alpha));
    }
    let params = json!({
        "n": a.n,
        "coin_stream": a.coin_stream,
        "m_cap": a.m_cap,
    });
    Ok(Rendered {
        manifest: manifest("generate", pair_inputs(&a.models), params, a.seed),
        report,
        text,
        csv: None,
        exit: 0,
    })
}

fn profile_rows(profile: &StoppingProfile) -> Vec<Value> {
    (0..=profile.m_max())
        .map(|m| {
            json!({
                "m": m,
                "overflow": rat_value(&profile.overflow[m]),
                "tail_bound": rat_value(&profile.tail_bound_at(m)),
            })
        })
        .collect()
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<Rendered> {
    let (coin, target) = load_pair(&a.models)?;
    let cap = frontier_cap()?;
    let eps = a
        .eps
        .as_deref()
        .map(|s| parse_ratio_arg(s, "--eps"))
        .transpose()?;
    let threshold = a
        .threshold
        .as_deref()
        .map(|s| parse_ratio_arg(s, "--threshold"))
        .transpose()?;
    let exact = coin.has_rational_conditionals() && target.has_rational_conditionals();
    let mut text = String::new();
    let (profile_json, expected_json, csv) = if exact {
        let profile = stopping_profile_with_cap(&coin, &target, a.n, a.m_max, cap)?;
        let expected = match expected_stopping_time(&profile) {
            Ok((lo, hi)) => {
                let _ = writeln!(
                    text,
                    "E[T] in [{}, {}]  (width {:.3e})",
                    format_ratio(&lo),
                    format_ratio(&hi),
                    ratio_f64(&(hi.clone() - &lo)),
                );
                json!({
                    "lower": rat_value(&lo),
                    "upper": rat_value(&hi),
                    "width": ratio_f64(&(hi - lo)),
                })
            }
            Err(Error::NoTailCertificate) => {
                let lo: Ratio = profile.overflow.iter().cloned().sum();
                let _ = writeln!(
                    text,
                    "E[T] >= {} (no geometric tail certificate)",
                    format_ratio(&lo)
                );
                json!({
                    "lower": rat_value(&lo),
                    "upper": Value::Null,
                    "note": "no geometric tail certificate",
                })
            }
            Err(e) => return Err(e),
        };
        let _ = writeln!(
            text,
            "max frontier {}  tail rate {}",
            profile.max_frontier,
            format_ratio(&profile.tail_rate)
        );
        let _ = writeln!(text, "m\toverflow\ttail_bound");
        let mut csv = String::from("m,overflow,overflow_approx,tail_bound\n");
        for m in 0..=profile.m_max() {
            let o = &profile.overflow[m];
            let tb = profile.tail_bound_at(m);
            let _ = writeln!(text, "{m}\t{}\t{}", format_ratio(o), format_ratio(&tb));
            let _ = writeln!(
                csv,
                "{m},{},{},{}",
                format_ratio(o),
                ratio_f64(o),
                ratio_f64(&tb)
            );
        }
        (
            json!({
                "rows": profile_rows(&profile),
                "max_frontier": profile.max_frontier,
                "tail_rate": rat_value(&profile.tail_rate),
            }),
            expected,
            Some(csv),
        )
    } else {
        let _ = writeln!(text, "coin law is not rational; exact profile skipped");
        (Value::Null, Value::Null, None)
    };
    let validity = validity_check(
        &coin,
        &target,
        a.n,
        a.m_max,
        eps.clone(),
        threshold.clone(),
        cap,
    )?;
    let _ = writeln!(text, "validity: {}", if validity.pass { "pass" } else { "FAIL" });
    for e in &validity.evidence {
        let _ = writeln!(text, "  {}", serde_json::to_string(&evidence_value(e))?);
    }
    let exit = if validity.pass { 0 } else { 1 };
    let report = json!({
        "n": a.n,
        "m_max": a.m_max,
        "profile": profile_json,
        "expected_t": expected_json,
        "validity": {
            "pass": validity.pass,
            "deficit": validity.deficit.as_ref().map(rat_value),
            "evidence": validity.evidence.iter().map(evidence_value).collect::<Vec<_>>(),
        },
    });
    let params = json!({
        "n": a.n,
        "m_max": a.m_max,
        "eps": eps.as_ref().map(format_ratio),
        "threshold": threshold.as_ref().map(format_ratio),
        "frontier_cap": cap,
    });
    Ok(Rendered {
        manifest: manifest("analyze", pair_inputs(&a.models), params, None),
        report,
        text,
        csv,
        exit,
    })
}

fn cmd_bounds(a: &BoundsArgs) -> Result<Rendered> {
    let (coin, target) = load_pair(&a.models)?;
    let cap = frontier_cap()?;
    let m_list: Vec<usize> = parse_int_list(&a.m_list, "--m-list")?;
    let lambdas: Vec<i64> = parse_int_list(&a.lambda_bits, "--lambda-bits")?;
    let taus: Vec<i64> = parse_int_list(&a.tau_bits, "--tau-bits")?;
    for b in lambdas.iter().chain(&taus) {
        if *b < 0 {
            return Err(Error::Usage("threshold exponents must be nonnegative".into()));
        }
    }
    let m_max = *m_list.iter().max().expect("list nonempty");
    let profile = stopping_profile_with_cap(&coin, &target, a.n, m_max, cap)?;
    let mut rows = Vec::new();
    let mut all_ok = true;
    let mut text = String::from("m\tlambda\ttau\tconverse\toverflow\tachievability\tok\n");
    let mut csv = String::from("m,lambda,tau,converse,overflow,achievability,ok\n");
    for &m in &m_list {
        let overflow = &profile.overflow[m];
        for &lb in &lambdas {
            for &tb in &taus {
                let q = BoundQuery::evaluate(&coin, &target, m, a.n, &pow2(-lb), &pow2(-tb))?;
                let (conv, conv2) = converse_bound(&q);
                debug_assert_eq!(conv, conv2);
                let ach = achievability_bound(&q);
                let ok = conv <= *overflow && *overflow <= ach;
                all_ok &= ok;
                let _ = writeln!(
                    text,
                    "{m}\t{lb}\t{tb}\t{}\t{}\t{}\t{}",
                    format_ratio(&conv),
                    format_ratio(overflow),
                    format_ratio(&ach),
                    ok
                );
                let _ = writeln!(
                    csv,
                    "{m},{lb},{tb},{},{},{},{}",
                    ratio_f64(&conv),
                    ratio_f64(overflow),
                    ratio_f64(&ach),
                    ok
                );
                rows.push(json!({
                    "m": m,
                    "lambda_bits": lb,
                    "tau_bits": tb,
                    "p_s": rat_value(&q.p_s),
                    "p_t": rat_value(&q.p_t),
                    "converse": rat_value(&conv),
                    "overflow": rat_value(overflow),
                    "achievability": rat_value(&ach),
                    "ok": ok,
                }));
            }
        }
    }
    let _ = writeln!(text, "overall: {}", if all_ok { "pass" } else { "FAIL" });
    let report = json!({
        "n": a.n,
        "rows": rows,
        "pass": all_ok,
    });
    let params = json!({
        "n": a.n,
        "m_list": m_list,
        "lambda_bits": lambdas,
        "tau_bits": taus,
        "frontier_cap": cap,
    });
    Ok(Rendered {
        manifest: manifest("bounds", pair_inputs(&a.models), params, None),
        report,
        text,
        csv: Some(csv),
        exit: if all_ok { 0 } else { 1 },
    })
}

fn cmd_rates(a: &RatesArgs) -> Result<Rendered> {
    let (coin, target) = load_pair(&a.models)?;
    let cs = process_spectrum(&coin)?;
    let ts = process_spectrum(&target)?;
    let r = asymptotic_rates(&cs, &ts)?;
    let (tight_max, tight_avg) = r.tight();
    let mut text = String::new();
    for (name, v) in [
        ("R*_int upper", &r.r_int_upper),
        ("R* lower", &r.r_lower),
        ("L*_int upper", &r.l_int_upper),
        ("L* lower", &r.l_lower),
    ] {
        let _ = writeln!(text, "{name}: {:.10} (err {:.3e})", v.value_f64(), v.err_f64());
    }
    let _ = writeln!(text, "max-rate pair tight: {tight_max}");
    let _ = writeln!(text, "avg-rate pair tight: {tight_avg}");
    let mut csv = String::from("quantity,value,err,lo,hi\n");
    for (name, v) in [
        ("r_int_upper", &r.r_int_upper),
        ("r_lower", &r.r_lower),
        ("l_int_upper", &r.l_int_upper),
        ("l_lower", &r.l_lower),
    ] {
        let _ = writeln!(
            csv,
            "{name},{},{},{},{}",
            v.value_f64(),
            v.err_f64(),
            format_ratio(v.lo()),
            format_ratio(v.hi())
        );
    }
    let report = json!({
        "coin_spectrum": summary_value(&cs),
        "target_spectrum": summary_value(&ts),
        "rates": {
            "r_int_upper": cert_value(&r.r_int_upper),
            "r_lower": cert_value(&r.r_lower),
            "l_int_upper": cert_value(&r.l_int_upper),
            "l_lower": cert_value(&r.l_lower),
        },
        "tight": { "max_rate": tight_max, "avg_rate": tight_avg },
    });
    Ok(Rendered {
        manifest: manifest("rates", pair_inputs(&a.models), json!({}), None),
        report,
        text,
        csv: Some(csv),
        exit: 0,
    })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Rendered> {
    let (coin, target) = load_pair(&a.models)?;
    let mut cfg = SimConfig::new(a.seed, a.trials, a.n);
    if let Some(c) = a.m_cap {
        cfg = cfg.with_m_cap(c);
    }
    let r = run_trials(&coin, &target, cfg)?;
    let overflow_rows: Vec<Value> = r
        .empirical_overflow()
        .into_iter()
        .map(|(m, c)| {
            json!({
                "m": m,
                "count": c,
                "frequency": c as f64 / cfg.trials as f64,
            })
        })
        .collect();
    let mut text = String::new();
    let _ = writeln!(text, "trials: {}  completed: {}  truncated: {}", cfg.trials, r.completed(), r.truncated_trials);
    match r.mean_t {
        Some(m) => {
            let _ = writeln!(text, "mean T: {m:.6}");
        }
        None => {
            let _ = writeln!(text, "mean T: n/a (all trials truncated)");
        }
    }
    if r.truncation_flagged {
        let _ = writeln!(text, "warning: truncated fraction exceeds 1e-4; mean is biased");
    }
    let _ = writeln!(text, "bits drawn: {}", r.bits_drawn);
    let _ = writeln!(text, "t\tcount");
    for (t, c) in &r.t_counts {
        let _ = writeln!(text, "{t}\t{c}");
    }
    let _ = writeln!(text, "word\tcount");
    for (w, c) in &r.empirical_law {
        let _ = writeln!(text, "{w}\t{c}");
    }
    let mut csv = String::from("m,overflow_count,overflow_frequency\n");
    for (m, c) in r.empirical_overflow() {
        let _ = writeln!(csv, "{m},{c},{}", c as f64 / cfg.trials as f64);
    }
    let report = json!({
        "result": serde_json::to_value(&r)?,
        "empirical_overflow": overflow_rows,
    });
    let params = json!({
        "n": a.n,
        "trials": a.trials,
        "m_cap": cfg.m_cap,
    });
    Ok(Rendered {
        manifest: manifest("simulate", pair_inputs(&a.models), params, Some(a.seed)),
        report,
        text,
        csv: Some(csv),
        exit: 0,
    })
}

fn spectrum_thresholds(a: &SpectrumArgs) -> Result<Vec<(Value, Ratio)>> {
    let mut out: Vec<(Value, Ratio)> = Vec::new();
    if let Some(bits) = &a.lambda_bits {
        for b in parse_int_list::<i64>(bits, "--lambda-bits")? {
            if b < 0 {
                return Err(Error::Usage("--lambda-bits: exponents must be nonnegative".into()));
            }
            out.push((json!({ "lambda_bits": b }), pow2(-b)));
        }
    }
    if let Some(list) = &a.threshold {
        for s in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let t = parse_ratio_arg(s, "--threshold")?;
            out.push((json!({ "threshold": s }), t));
        }
    }
    Ok(out)
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<Rendered> {
    let model = load_model(&a.model)?;
    let thresholds = spectrum_thresholds(a)?;
    let inputs = json!({ "model": a.model.display().to_string() });
    let params = json!({
        "length": a.m,
        "lambda_bits": a.lambda_bits,
        "threshold": a.threshold,
        "trials": a.trials,
    });
    if let Some(trials) = a.trials {
        let ts: Vec<Ratio> = thresholds.iter().map(|(_, t)| t.clone()).collect();
        let s = empirical_spectrum(&model, a.m, trials, a.seed, &ts)?;
        let mut text = format!("empirical spectrum: length {} trials {trials}\n", a.m);
        let _ = writeln!(text, "rate_lo\trate_hi\tcount");
        let mut csv = String::from("rate_lo,rate_hi,count\n");
        let bin_rows: Vec<Value> = s
            .bins
            .iter()
            .map(|(k, c)| {
                let lo = *k as f64 / 32.0;
                let hi = (*k + 1) as f64 / 32.0;
                let _ = writeln!(text, "{lo}\t{hi}\t{c}");
                let _ = writeln!(csv, "{lo},{hi},{c}");
                json!({ "rate_lo": lo, "rate_hi": hi, "count": c })
            })
            .collect();
        let mass_rows: Vec<Value> = s
            .threshold_mass
            .iter()
            .map(|t| {
                let _ = writeln!(
                    text,
                    "mass below {}: {} of {trials}",
                    format_ratio(&t.threshold),
                    t.count
                );
                json!({
                    "threshold": format_ratio(&t.threshold),
                    "count": t.count,
                    "fraction": t.count as f64 / trials as f64,
                })
            })
            .collect();
        let report = json!({
            "mode": "empirical",
            "length": a.m,
            "trials": trials,
            "bins": bin_rows,
            "threshold_mass": mass_rows,
        });
        return Ok(Rendered {
            manifest: manifest("spectrum", inputs, params, Some(a.seed)),
            report,
            text,
            csv: Some(csv),
            exit: 0,
        });
    }
    if thresholds.is_empty() {
        return Err(Error::Usage(
            "spectrum needs --lambda-bits or --threshold (or --trials for the empirical mode)"
                .into(),
        ));
    }
    let mut rows = Vec::new();
    let mut text = String::from("threshold\tlambda_bits\tmass_below\n");
    let mut csv = String::from("threshold,lambda_bits,mass_below\n");
    for (tag, t) in &thresholds {
        let sm = spectrum_mass(&model, a.m, t)?;
        let _ = writeln!(
            text,
            "{}\t{:.4}\t{}",
            format_ratio(&sm.threshold),
            sm.lambda_bits,
            format_ratio(&sm.mass_below)
        );
        let _ = writeln!(
            csv,
            "{},{},{}",
            format_ratio(&sm.threshold),
            sm.lambda_bits,
            ratio_f64(&sm.mass_below)
        );
        rows.push(json!({
            "given": tag,
            "threshold": format_ratio(&sm.threshold),
            "lambda_bits": sm.lambda_bits,
            "mass_below": rat_value(&sm.mass_below),
        }));
    }
    let report = json!({
        "mode": "exact",
        "length": a.m,
        "rows": rows,
    });
    Ok(Rendered {
        manifest: manifest("spectrum", inputs, params, None),
        report,
        text,
        csv: Some(csv),
        exit: 0,
    })
}

fn cmd_flrng(a: &FlrngArgs) -> Result<Rendered> {
    let (coin, target) = load_pair(&a.models)?;
    let fallback = parse_symbol_list(&a.fallback, "--fallback")?;
    let r = fl_truncate(&coin, &target, a.n, a.m, &fallback)?;
    let exact_law = output_law_at(&coin, &target, a.n, a.m)?;
    debug_assert!(r.delta <= r.overflow_at_m);
    let t_alpha = target.alphabet_size();
    let mut text = String::new();
    let _ = writeln!(
        text,
        "fallback {}  delta {}  overflow {}",
        format_symbols(&r.fallback, t_alpha),
        format_ratio(&r.delta),
        format_ratio(&r.overflow_at_m)
    );
    let _ = writeln!(text, "word\tprob");
    let law_rows: Vec<Value> = r
        .approx_law
        .iter()
        .map(|(w, p)| {
            let _ = writeln!(text, "{}\t{}", format_symbols(w, t_alpha), format_ratio(p));
            json!({ "word": format_symbols(w, t_alpha), "prob": rat_value(p) })
        })
        .collect();
    let report = json!({
        "n": a.n,
        "m": r.m,
        "fallback": format_symbols(&r.fallback, t_alpha),
        "delta": rat_value(&r.delta),
        "overflow_at_m": rat_value(&r.overflow_at_m),
        "deficit_before_fallback": rat_value(&exact_law.deficit),
        "approx_law": law_rows,
        "tv_within_overflow": r.delta <= r.overflow_at_m,
    });
    let params = json!({
        "n": a.n,
        "m": a.m,
        "fallback": a.fallback,
    });
    Ok(Rendered {
        manifest: manifest("flrng", pair_inputs(&a.models), params, None),
        report,
        text,
        csv: None,
        exit: 0,
    })
}

fn cmd_tree(a: &TreeArgs) -> Result<Rendered> {
    let (coin, target) = load_pair(&a.models)?;
    let cap = frontier_cap()?;
    let tree = build_tree_with_cap(&coin, &target, a.n, a.depth, cap)?;
    let text = tree.export();
    let mut csv = String::from("depth,path,emitted,status,prob\n");
    for line in text.lines() {
        let _ = writeln!(csv, "{}", line.replace('\t', ","));
    }
    let nodes: Vec<Value> = tree
        .nodes
        .iter()
        .map(|node| {
            json!({
                "depth": node.depth,
                "path": format_symbols(&node.path, tree.coin_alphabet),
                "emitted": format_symbols(&node.emitted, tree.target_alphabet),
                "status": format!("{:?}", node.status).to_lowercase(),
                "prob": rat_value(&node.prob),
            })
        })
        .collect();
    let report = json!({
        "n": a.n,
        "depth_limit": a.depth,
        "unresolved_mass": rat_value(&tree.unresolved_mass()),
        "nodes": nodes,
    });
    let params = json!({
        "n": a.n,
        "depth": a.depth,
        "frontier_cap": cap,
    });
    Ok(Rendered {
        manifest: manifest("tree", pair_inputs(&a.models), params, None),
        report,
        text,
        csv: Some(csv),
        exit: 0,
    })
}
