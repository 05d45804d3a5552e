//! Exact analysis of the interval algorithm: overflow probabilities via a
//! frontier dynamic program, expected stopping time with a certified tail,
//! partial output laws, validity and feasibility checking, spectrum-set
//! masses, and fixed-length truncation.
//!
//! The frontier DP tracks the live coin prefixes: those whose intervals are
//! not yet inside a single cell of the depth-n target partition. A live
//! interval must strictly contain at least one of the N^n - 1 interior
//! boundaries of that partition, and intervals of distinct prefixes at one
//! level are disjoint, so the frontier never exceeds N^n - 1 entries.
//!
//! Tail certificate: fix one interior boundary. The live intervals that
//! contain it at successive levels are nested, and each is a coin cylinder
//! of length at most p_max^m, where p_max is the largest conditional
//! probability the coin model can produce. Summing over boundaries gives
//! Pr(T > m) <= (N^n - 1) p_max^m, which yields computable enclosures for
//! E[T] whenever p_max < 1. This derivation is checked against the exact
//! overflow values in the tests.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::exactnum::{
    as_pow2, cmp_ratio_dyadic, dyadic_leq_ratio, log2_bounds, ratio_f64, ratio_from_f64,
    DyadicExp, Ratio, UnitInterval,
};
use crate::interval_alg::{Generator, DEFAULT_FRONTIER_CAP};
use crate::process::{canonical_state_key, enumerate_law, Family, MinEntropyAcc, ProcState, ProcessSpec};
use crate::{Error, Result};

/// Default cap on distinct (state, probability) classes in the spectrum DP.
pub const DEFAULT_SPECTRUM_BUDGET: usize = 1 << 20;
/// How far the min-entropy threshold search will walk before giving up.
pub const MIN_ENTROPY_SEARCH_CAP: u64 = 2_000_000;

struct DpNode {
    interval: UnitInterval,
    coin_state: ProcState,
    target_interval: UnitInterval,
    target_state: ProcState,
    emitted: Vec<usize>,
}

/// Same greedy emission as the generator, restated on the DP node so the
/// frontier analysis does not share code with the engine it cross-checks.
fn dp_emit(target: &ProcessSpec, node: &mut DpNode, n: usize) -> Result<()> {
    while node.emitted.len() < n {
        let pmf = target.state_pmf_ratios(&node.target_state)?;
        let children = node.target_interval.partition(&pmf);
        match children
            .iter()
            .position(|c| c.contains_interval(&node.interval))
        {
            Some(j) => {
                target.advance(&mut node.target_state, j)?;
                node.target_interval = children[j].clone();
                node.emitted.push(j);
            }
            None => break,
        }
    }
    Ok(())
}

/// Raw result of the frontier DP: exact overflow per level and the outputs
/// that complete at each level.
pub struct FrontierRun {
    pub overflow: Vec<Ratio>,
    pub terminals_by_level: Vec<BTreeMap<Vec<usize>, Ratio>>,
    pub max_frontier: usize,
}

impl FrontierRun {
    /// Partial output law after m coin symbols: all outputs committed at
    /// levels 0..=m.
    pub fn law_at(&self, m: usize) -> BTreeMap<Vec<usize>, Ratio> {
        let mut law: BTreeMap<Vec<usize>, Ratio> = BTreeMap::new();
        for level in self.terminals_by_level.iter().take(m + 1) {
            for (y, p) in level {
                *law.entry(y.clone()).or_insert_with(Ratio::zero) += p;
            }
        }
        law
    }
}

/// Runs the frontier DP for m = 0..=m_max levels.
pub fn frontier_run(
    coin: &ProcessSpec,
    target: &ProcessSpec,
    n: usize,
    m_max: usize,
    cap: usize,
) -> Result<FrontierRun> {
    coin.validate()?;
    target.validate()?;
    if !coin.has_rational_conditionals() || !target.has_rational_conditionals() {
        return Err(Error::RationalConditionalsRequired);
    }
    let boundaries = boundary_count(target.alphabet_size(), n);
    if boundaries > BigUint::from(cap) {
        return Err(Error::TargetLengthBudget);
    }
    let boundaries = boundaries.to_usize().expect("bounded by cap");

    let mut root = DpNode {
        interval: UnitInterval::full(),
        coin_state: coin.start(),
        target_interval: UnitInterval::full(),
        target_state: target.start(),
        emitted: Vec::new(),
    };
    dp_emit(target, &mut root, n)?;
    let mut terminals: Vec<BTreeMap<Vec<usize>, Ratio>> = vec![BTreeMap::new()];
    let mut live: Vec<DpNode> = Vec::new();
    if root.emitted.len() == n {
        terminals[0].insert(root.emitted.clone(), Ratio::one());
    } else {
        live.push(root);
    }
    let mut overflow = vec![live_mass(&live)];
    let mut max_frontier = live.len();

    for _m in 1..=m_max {
        if live.is_empty() {
            overflow.push(Ratio::zero());
            terminals.push(BTreeMap::new());
            continue;
        }
        let mut next: Vec<DpNode> = Vec::new();
        let mut level_terms: BTreeMap<Vec<usize>, Ratio> = BTreeMap::new();
        for node in &live {
            let pmf = coin.state_pmf_ratios(&node.coin_state)?;
            let children = node.interval.partition(&pmf);
            for (x, child_iv) in children.into_iter().enumerate() {
                if pmf[x].is_zero() {
                    continue;
                }
                let mut coin_state = node.coin_state.clone();
                coin.advance(&mut coin_state, x)?;
                let mut child = DpNode {
                    interval: child_iv,
                    coin_state,
                    target_interval: node.target_interval.clone(),
                    target_state: node.target_state.clone(),
                    emitted: node.emitted.clone(),
                };
                dp_emit(target, &mut child, n)?;
                if child.emitted.len() == n {
                    *level_terms
                        .entry(child.emitted)
                        .or_insert_with(Ratio::zero) += child.interval.length();
                } else {
                    next.push(child);
                }
            }
        }
        live = next;
        if live.len() > cap {
            return Err(Error::FrontierCapExceeded);
        }
        debug_assert!(live.len() <= boundaries, "frontier exceeds N^n - 1");
        max_frontier = max_frontier.max(live.len());
        let mass = live_mass(&live);
        debug_assert!(mass <= *overflow.last().unwrap(), "overflow must decay");
        overflow.push(mass);
        terminals.push(level_terms);
    }
    Ok(FrontierRun {
        overflow,
        terminals_by_level: terminals,
        max_frontier,
    })
}

fn live_mass(live: &[DpNode]) -> Ratio {
    live.iter().map(|n| n.interval.length()).sum()
}

fn boundary_count(alphabet: usize, n: usize) -> BigUint {
    BigUint::from(alphabet).pow(n as u32) - 1u32
}

/// Exact overflow probabilities Pr(T > m) for m = 0..=m_max, with the data
/// backing the geometric tail certificate.
pub struct StoppingProfile {
    pub overflow: Vec<Ratio>,
    pub n: usize,
    pub target_alphabet: usize,
    /// Largest conditional coin probability p_max.
    pub tail_rate: Ratio,
    pub max_frontier: usize,
}

impl StoppingProfile {
    pub fn m_max(&self) -> usize {
        self.overflow.len() - 1
    }

    /// N^n - 1, the number of interior boundaries of the target partition.
    pub fn boundary_count(&self) -> BigUint {
        boundary_count(self.target_alphabet, self.n)
    }

    /// Certified envelope (N^n - 1) p_max^m.
    pub fn tail_bound_at(&self, m: usize) -> Ratio {
        Ratio::from(BigInt::from(self.boundary_count())) * pow_ratio(&self.tail_rate, m)
    }
}

fn pow_ratio(r: &Ratio, e: usize) -> Ratio {
    let mut out = Ratio::one();
    let mut base = r.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            out *= &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    out
}

pub fn stopping_profile_with_cap(
    coin: &ProcessSpec,
    target: &ProcessSpec,
    n: usize,
    m_max: usize,
    cap: usize,
) -> Result<StoppingProfile> {
    let run = frontier_run(coin, target, n, m_max, cap)?;
    let profile = StoppingProfile {
        overflow: run.overflow,
        n,
        target_alphabet: target.alphabet_size(),
        tail_rate: coin.max_cond_prob(),
        max_frontier: run.max_frontier,
    };
    if cfg!(debug_assertions) {
        for (m, v) in profile.overflow.iter().enumerate() {
            assert!(
                *v <= profile.tail_bound_at(m),
                "tail envelope violated at m={m}"
            );
        }
    }
    Ok(profile)
}

pub fn stopping_profile(
    coin: &ProcessSpec,
    target: &ProcessSpec,
    n: usize,
    m_max: usize,
) -> Result<StoppingProfile> {
    stopping_profile_with_cap(coin, target, n, m_max, DEFAULT_FRONTIER_CAP)
}

/// Exact enclosure of E[T] = sum over m of Pr(T > m): the lower end sums the
/// computed overflow column; the upper end adds the certified geometric
/// tail. When the frontier has died out the tail is exactly zero.
pub fn expected_stopping_time(profile: &StoppingProfile) -> Result<(Ratio, Ratio)> {
    let lower: Ratio = profile.overflow.iter().cloned().sum();
    if profile.overflow.last().map_or(false, |v| v.is_zero()) {
        return Ok((lower.clone(), lower));
    }
    if profile.tail_rate >= Ratio::one() {
        return Err(Error::NoTailCertificate);
    }
    let p = &profile.tail_rate;
    let tail = Ratio::from(BigInt::from(profile.boundary_count()))
        * pow_ratio(p, profile.m_max() + 1)
        / (Ratio::one() - p);
    Ok((lower.clone(), lower + tail))
}

/// Exact law of the committed outputs after m coin symbols, plus the
/// deficit Pr(T > m) still in flight.
pub struct OutputLaw {
    pub m: usize,
    pub law: BTreeMap<Vec<usize>, Ratio>,
    pub deficit: Ratio,
}

pub fn output_law_at(
    coin: &ProcessSpec,
    target: &ProcessSpec,
    n: usize,
    m: usize,
) -> Result<OutputLaw> {
    let run = frontier_run(coin, target, n, m, DEFAULT_FRONTIER_CAP)?;
    let law = run.law_at(m);
    let deficit = run.overflow[m].clone();
    debug_assert!((law.values().sum::<Ratio>() + &deficit).is_one());
    Ok(OutputLaw { m, law, deficit })
}

/// Evidence items attached to a validity report.
#[derive(Clone, Debug)]
pub enum Evidence {
    /// Exact deficit after m_max coin symbols, compared against eps if one
    /// was supplied.
    DeficitAtMmax {
        m: usize,
        deficit: Ratio,
        eps: Option<Ratio>,
        within: Option<bool>,
    },
    /// First m at which every length-m coin sequence has probability at
    /// most the threshold, so the residual spectrum set is empty from there
    /// on.
    MinEntropyThresholdMet { threshold: Ratio, m_star: u64 },
    /// The search for such an m gave up at the stated limit.
    MinEntropySearchExhausted { threshold: Ratio, limit: u64 },
    /// Certified obstruction: the all-ones prefix keeps probability above
    /// the threshold at every length, so validity cannot be reached.
    InfeasibleAtThreshold {
        threshold: Ratio,
        residual_lower: Ratio,
    },
}

#[derive(Clone, Debug)]
pub struct ValidityReport {
    pub pass: bool,
    /// Present when the exact frontier analysis ran.
    pub deficit: Option<Ratio>,
    pub evidence: Vec<Evidence>,
}

/// Certified rational lower bound on 2^(-e) for exponents whose
/// denominators are far too large for root extraction: a float guess is
/// nudged down until the certified logarithm proves v <= 2^(-e).
fn exp2_neg_lower(e: &Ratio) -> Ratio {
    let nudge = Ratio::new(BigInt::from((1u64 << 42) - 1), BigInt::from(1u64 << 42));
    let mut v = ratio_from_f64((-ratio_f64(e)).exp2() * (1.0 - 1e-12));
    for _ in 0..64 {
        if v.is_positive() {
            let (lo, _) = log2_bounds(&v.recip(), 60);
            if lo >= *e {
                return v;
            }
        } else {
            break;
        }
        v *= &nudge;
    }
    Ratio::zero()
}

/// Upper bound, as an exact rational, on -log2(threshold). Used to drive
/// min-entropy searches with cheap comparisons; hits are re-verified
/// exactly.
fn lambda_upper(threshold: &Ratio) -> Ratio {
    if let Some(j) = as_pow2(threshold) {
        return Ratio::from(BigInt::from(-j));
    }
    log2_bounds(&threshold.recip(), 64).1
}

/// Checks validity of the pair: for rational coins, whether the deficit
/// after m_max symbols is within eps; for every coin with an additive
/// min-entropy (i.i.d. and the named families), optional threshold evidence
/// about when the high-information residual set empties out. A quadratic
/// coin below its limiting all-ones mass is reported infeasible.
pub fn validity_check(
    coin: &ProcessSpec,
    target: &ProcessSpec,
    n: usize,
    m_max: usize,
    eps: Option<Ratio>,
    lambda_threshold: Option<Ratio>,
    cap: usize,
) -> Result<ValidityReport> {
    let mut evidence = Vec::new();
    let mut pass = true;
    let mut deficit = None;

    if coin.has_rational_conditionals() {
        let run = frontier_run(coin, target, n, m_max, cap)?;
        let d = run.overflow[m_max].clone();
        let within = eps.as_ref().map(|e| d <= *e);
        if within == Some(false) {
            pass = false;
        }
        evidence.push(Evidence::DeficitAtMmax {
            m: m_max,
            deficit: d.clone(),
            eps: eps.clone(),
            within,
        });
        deficit = Some(d);
        if let (Some(t), ProcessSpec::Iid { pmf }) = (&lambda_threshold, coin) {
            require_threshold(t)?;
            let p_max = pmf.iter().max().expect("nonempty").clone();
            let mut p = Ratio::one();
            let mut found = None;
            for m in 0..=MIN_ENTROPY_SEARCH_CAP {
                if p <= *t {
                    found = Some(m);
                    break;
                }
                if p_max.is_one() {
                    break;
                }
                p *= &p_max;
            }
            evidence.push(match found {
                Some(m_star) => Evidence::MinEntropyThresholdMet {
                    threshold: t.clone(),
                    m_star,
                },
                None => Evidence::MinEntropySearchExhausted {
                    threshold: t.clone(),
                    limit: MIN_ENTROPY_SEARCH_CAP,
                },
            });
        }
    } else {
        let family = match coin {
            ProcessSpec::Named { family } => *family,
            _ => unreachable!(),
        };
        let t = lambda_threshold
            .ok_or_else(|| Error::Usage("named coin validity needs a threshold".into()))?;
        require_threshold(&t)?;
        let (ev, ok) = named_threshold_evidence(family, &t)?;
        pass = ok;
        evidence.push(ev);
    }
    Ok(ValidityReport {
        pass,
        deficit,
        evidence,
    })
}

pub(crate) fn require_threshold(t: &Ratio) -> Result<()> {
    if !t.is_positive() || *t > Ratio::one() {
        return Err(Error::NumericRange(format!(
            "threshold must be in (0, 1], got {}",
            crate::exactnum::format_ratio(t)
        )));
    }
    Ok(())
}

/// Threshold evidence for a named coin. The per-step min-entropies are
/// exactly 1/i (harmonic) or 1/i^2 (quadratic); the all-ones prefix is the
/// most probable sequence, so the residual set is empty at length m exactly
/// when 2^(-H_m) <= t.
fn named_threshold_evidence(family: Family, t: &Ratio) -> Result<(Evidence, bool)> {
    let lam_hi = lambda_upper(t);
    let mut acc = MinEntropyAcc::new(family);
    let checkpoints: &[u64] = match family {
        Family::Harmonic => &[MIN_ENTROPY_SEARCH_CAP],
        Family::Quadratic => &[1_000, 10_000, 100_000],
    };
    for &stop in checkpoints {
        while acc.m() < stop {
            acc.push();
            if acc.ge(&lam_hi) {
                let m_star = acc.m();
                let h = DyadicExp::new(acc.value())?;
                assert!(dyadic_leq_ratio(&h, t), "search bound was not conservative");
                return Ok((
                    Evidence::MinEntropyThresholdMet {
                        threshold: t.clone(),
                        m_star,
                    },
                    true,
                ));
            }
        }
        if family == Family::Quadratic {
            // Upper bound on the full series: the tail beyond stop is below
            // 1/stop, so H_infinity < value + 1/stop. If t is below
            // 2^-(that), the all-ones mass exceeds t at every length.
            let h_ub = acc.value() + Ratio::new(BigInt::one(), BigInt::from(stop));
            let dy = DyadicExp::new(h_ub.clone())?;
            if cmp_ratio_dyadic(t, &dy) == std::cmp::Ordering::Less {
                return Ok((
                    Evidence::InfeasibleAtThreshold {
                        threshold: t.clone(),
                        residual_lower: exp2_neg_lower(&h_ub),
                    },
                    false,
                ));
            }
        }
    }
    Ok((
        Evidence::MinEntropySearchExhausted {
            threshold: t.clone(),
            limit: acc.m(),
        },
        false,
    ))
}

/// Exact masses of {P(seq) < t}, {P(seq) = t}, {P(seq) > t} for length-m
/// sequences of the model.
pub struct SpectrumMasses {
    pub lt: Ratio,
    pub eq: Ratio,
    pub gt: Ratio,
}

impl SpectrumMasses {
    /// P(S) for a coin threshold: mass with P(seq) <= t.
    pub fn mass_leq(&self) -> Ratio {
        &self.lt + &self.eq
    }

    /// P(T) for a target threshold: mass with P(seq) >= t.
    pub fn mass_geq(&self) -> Ratio {
        &self.eq + &self.gt
    }
}

/// Aggregated spectrum DP: sequences are merged by (memory state, running
/// probability), so the state count grows with the number of distinct
/// probability values rather than the number of sequences.
pub fn spectrum_masses(
    model: &ProcessSpec,
    length: usize,
    threshold: &Ratio,
    budget: usize,
) -> Result<SpectrumMasses> {
    model.validate()?;
    if !model.has_rational_conditionals() {
        return Err(Error::RationalConditionalsRequired);
    }
    require_threshold(threshold)?;
    let mut classes: BTreeMap<(ProcState, Ratio), Ratio> = BTreeMap::new();
    classes.insert(
        (canonical_state_key(&model.start()), Ratio::one()),
        Ratio::one(),
    );
    for _ in 0..length {
        let mut next: BTreeMap<(ProcState, Ratio), Ratio> = BTreeMap::new();
        for ((st, p), mass) in &classes {
            let pmf = model.state_pmf_ratios(st)?;
            for (s, q) in pmf.iter().enumerate() {
                if q.is_zero() {
                    continue;
                }
                let mut st2 = st.clone();
                model.advance(&mut st2, s)?;
                let key = (canonical_state_key(&st2), p * q);
                *next.entry(key).or_insert_with(Ratio::zero) += mass * q;
            }
        }
        if next.len() > budget {
            return Err(Error::SpectrumBudget);
        }
        classes = next;
    }
    let mut out = SpectrumMasses {
        lt: Ratio::zero(),
        eq: Ratio::zero(),
        gt: Ratio::zero(),
    };
    for ((_, p), mass) in &classes {
        match p.cmp(threshold) {
            std::cmp::Ordering::Less => out.lt += mass,
            std::cmp::Ordering::Equal => out.eq += mass,
            std::cmp::Ordering::Greater => out.gt += mass,
        }
    }
    Ok(out)
}

/// One spectrum-set mass at a threshold, with the threshold's bit value as
/// a float annotation.
pub struct SpectrumMass {
    pub m: usize,
    pub threshold: Ratio,
    pub mass_below: Ratio,
    pub lambda_bits: f64,
}

pub fn spectrum_mass(model: &ProcessSpec, length: usize, threshold: &Ratio) -> Result<SpectrumMass> {
    let masses = spectrum_masses(model, length, threshold, DEFAULT_SPECTRUM_BUDGET)?;
    Ok(SpectrumMass {
        m: length,
        threshold: threshold.clone(),
        mass_below: masses.mass_leq(),
        lambda_bits: threshold_bits(threshold),
    })
}

/// -log2(threshold) as a float annotation.
pub fn threshold_bits(threshold: &Ratio) -> f64 {
    let (lo, hi) = log2_bounds(threshold, 30);
    -ratio_f64(&((lo + hi) / Ratio::from(BigInt::from(2))))
}

/// Fixed-length truncation of the algorithm at m coin symbols, with the
/// undecided mass mapped to a fallback sequence.
pub struct FLReport {
    pub m: usize,
    pub fallback: Vec<usize>,
    pub approx_law: BTreeMap<Vec<usize>, Ratio>,
    pub delta: Ratio,
    pub overflow_at_m: Ratio,
}

pub fn fl_truncate(
    coin: &ProcessSpec,
    target: &ProcessSpec,
    n: usize,
    m: usize,
    fallback: &[usize],
) -> Result<FLReport> {
    if fallback.len() != n {
        return Err(Error::InvalidModel(format!(
            "fallback: {} symbols, expected {}",
            fallback.len(),
            n
        )));
    }
    for &b in fallback {
        if b >= target.alphabet_size() {
            return Err(Error::SymbolOutOfRange(b));
        }
    }
    let out = output_law_at(coin, target, n, m)?;
    let mut approx = out.law;
    *approx
        .entry(fallback.to_vec())
        .or_insert_with(Ratio::zero) += &out.deficit;
    let law = enumerate_law(target, n)?;
    let mut delta = Ratio::zero();
    let mut keys: Vec<&Vec<usize>> = approx.keys().chain(law.keys()).collect();
    keys.sort();
    keys.dedup();
    for key in keys {
        let a = approx.get(key).cloned().unwrap_or_else(Ratio::zero);
        let b = law.get(key).cloned().unwrap_or_else(Ratio::zero);
        delta += (a - b).abs();
    }
    delta /= Ratio::from(BigInt::from(2));
    debug_assert!(delta <= out.deficit, "truncation error exceeds overflow");
    Ok(FLReport {
        m,
        fallback: fallback.to_vec(),
        approx_law: approx,
        delta,
        overflow_at_m: out.deficit,
    })
}

/// Brute-force oracle: runs every positive-probability coin sequence of
/// length m through the generator and tallies overflow mass and the law of
/// outputs completed within m symbols. Used to cross-check the frontier DP.
pub fn brute_force_overflow(
    coin: &ProcessSpec,
    target: &ProcessSpec,
    n: usize,
    m: usize,
) -> Result<(Ratio, BTreeMap<Vec<usize>, Ratio>)> {
    let gen = Generator::new(coin, target, n)?;
    let mut overflow = Ratio::zero();
    let mut law: BTreeMap<Vec<usize>, Ratio> = BTreeMap::new();
    let mut stack = vec![(gen, m, Ratio::one())];
    while let Some((gen, left, prob)) = stack.pop() {
        if gen.is_done() {
            *law.entry(gen.state().emitted.clone())
                .or_insert_with(Ratio::zero) += &prob;
            continue;
        }
        if left == 0 {
            overflow += &prob;
            continue;
        }
        let pmf = coin.cond_pmf(&gen.state().coin_prefix)?;
        for (x, p) in pmf.iter().enumerate() {
            let p = p.as_ratio().expect("rational coin");
            if p.is_zero() {
                continue;
            }
            let mut child = gen.clone();
            child.push_coin(x)?;
            stack.push((child, left - 1, &prob * &p));
        }
    }
    Ok((overflow, law))
}
