//! Seeded Monte Carlo harness: exact sampling of coin realizations, repeated
//! generator runs, and empirical spectrum statistics.
//!
//! Randomness discipline. Each trial draws from its own substream derived
//! from (seed, trial index) by a counter rule, so results do not depend on
//! execution order and a rerun with the same config is bit for bit equal.
//! The substream generator is splitmix64: the trial key is
//! mix(seed xor mix((trial + 1) * GAMMA)), successive words are obtained by
//! stepping the state by GAMMA and applying mix, where mix is the splitmix64
//! finalizer and GAMMA is 0x9E3779B97F4A7C15. Bits are taken from each word
//! least significant first. This rule is part of the output contract and
//! stays fixed across releases.
//!
//! Sampling is exact. A uniform variate is refined bit by bit as a dyadic
//! interval and resolved against the cumulative conditional law by exact
//! comparison, so sampled symbols carry exactly their model probabilities,
//! including the symbolic 2^(-e) entries of the named Bernoulli families.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::analysis::require_threshold;
use crate::exactnum::{log2_bounds, pow2, Ratio};
use crate::interval_alg::{Generator, Step};
use crate::process::{format_symbols, Prob, ProcessSpec};
use crate::{Error, Result};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based splitmix64 word stream.
#[derive(Clone, Debug)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    pub fn from_key(key: u64) -> Self {
        CounterRng { state: key }
    }

    /// Independent substream for one trial of a seeded run.
    pub fn for_trial(seed: u64, trial: u64) -> Self {
        CounterRng::from_key(mix(seed ^ mix(trial.wrapping_add(1).wrapping_mul(GAMMA))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }
}

/// Bit source over a word stream; bits leave each word least significant
/// first. Tracks how many bits have been handed out.
#[derive(Clone, Debug)]
pub struct BitStream {
    rng: CounterRng,
    word: u64,
    avail: u32,
    drawn: u64,
}

impl BitStream {
    pub fn new(rng: CounterRng) -> Self {
        BitStream {
            rng,
            word: 0,
            avail: 0,
            drawn: 0,
        }
    }

    pub fn for_trial(seed: u64, trial: u64) -> Self {
        BitStream::new(CounterRng::for_trial(seed, trial))
    }

    pub fn next_bit(&mut self) -> u8 {
        if self.avail == 0 {
            self.word = self.rng.next_u64();
            self.avail = 64;
        }
        let b = (self.word & 1) as u8;
        self.word >>= 1;
        self.avail -= 1;
        self.drawn += 1;
        b
    }

    pub fn bits_drawn(&self) -> u64 {
        self.drawn
    }
}

// A sampler that has not resolved after this many bits is stuck on a stream
// that traces a cell boundary exactly; real substreams never do this.
const SAMPLE_BIT_GUARD: u32 = 100_000;

/// Draws one symbol with exactly the probabilities in `pmf`.
///
/// The uniform variate u is kept as the dyadic interval [a/2^k, (a+1)/2^k)
/// and narrowed one bit at a time until it fits inside a single cell of the
/// cumulative law; the cell index is the sample. Comparisons against the
/// cumulative boundaries are exact, whether the entries are rationals or
/// symbolic powers of two. Expected bits consumed is at most the step
/// entropy plus two.
pub fn sample_from_pmf(pmf: &[Prob], bits: &mut BitStream) -> Result<usize> {
    // A certain symbol costs no randomness.
    for (i, p) in pmf.iter().enumerate() {
        if p.cmp_ratio(&Ratio::one()) == std::cmp::Ordering::Equal {
            return Ok(i);
        }
    }
    let boundaries = cumulative_boundaries(pmf)?;
    let mut a = Ratio::zero();
    let mut k: i64 = 0;
    let mut guard = 0u32;
    loop {
        let lo = a.clone();
        let hi = a.clone() + pow2(-k);
        for i in 0..pmf.len() {
            let below = boundaries[i].cmp_ratio(&lo) != std::cmp::Ordering::Greater;
            let above = boundaries[i + 1].cmp_ratio(&hi) != std::cmp::Ordering::Less;
            if below && above {
                return Ok(i);
            }
        }
        if bits.next_bit() == 1 {
            a += pow2(-k - 1);
        }
        k += 1;
        guard += 1;
        if guard > SAMPLE_BIT_GUARD {
            return Err(Error::NumericRange(
                "sampler failed to resolve; bit stream traces a cell boundary".into(),
            ));
        }
    }
}

/// Cumulative cell boundaries b_0 = 0 <= b_1 <= ... <= b_K = 1 as exactly
/// comparable values. Rational laws sum exactly; the named Bernoulli step
/// (2^(-e), 1 - 2^(-e)) has the single interior boundary 2^(-e).
fn cumulative_boundaries(pmf: &[Prob]) -> Result<Vec<Prob>> {
    let mut out = Vec::with_capacity(pmf.len() + 1);
    out.push(Prob::Rat(Ratio::zero()));
    if pmf.iter().all(|p| matches!(p, Prob::Rat(_))) {
        let mut acc = Ratio::zero();
        for p in pmf {
            if let Prob::Rat(r) = p {
                acc += r;
            }
            out.push(Prob::Rat(acc.clone()));
        }
        if acc != Ratio::one() {
            return Err(Error::InvalidModel("conditional law does not sum to one".into()));
        }
        return Ok(out);
    }
    match pmf {
        [Prob::PowTwo(e), Prob::OneMinusPowTwo(f)] if e == f => {
            out.push(Prob::PowTwo(e.clone()));
            out.push(Prob::Rat(Ratio::one()));
            Ok(out)
        }
        _ => Err(Error::InvalidModel(
            "unsupported symbolic conditional law".into(),
        )),
    }
}

/// Samples one symbol of `model` after the given prefix.
pub fn sample_symbol(model: &ProcessSpec, prefix: &[usize], bits: &mut BitStream) -> Result<usize> {
    sample_from_pmf(&model.cond_pmf(prefix)?, bits)
}

/// Samples a whole path of the given length, carrying the model state along
/// instead of re-deriving it from the prefix at every step.
pub fn sample_path(model: &ProcessSpec, len: usize, bits: &mut BitStream) -> Result<Vec<usize>> {
    let mut state = model.start();
    let mut path = Vec::with_capacity(len);
    for _ in 0..len {
        let x = sample_from_pmf(&model.state_pmf(&state), bits)?;
        model.advance(&mut state, x)?;
        path.push(x);
    }
    Ok(path)
}

/// Monte Carlo run parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    pub seed: u64,
    pub trials: u64,
    /// Target word length per trial.
    pub n: usize,
    /// Coin budget per trial; a trial still open after this many coin symbols
    /// is recorded as truncated.
    pub m_cap: usize,
}

impl SimConfig {
    /// Default coin budget of one million coin symbols per target symbol.
    pub fn new(seed: u64, trials: u64, n: usize) -> Self {
        SimConfig {
            seed,
            trials,
            n,
            m_cap: n.saturating_mul(1_000_000).max(1),
        }
    }

    pub fn with_m_cap(mut self, m_cap: usize) -> Self {
        self.m_cap = m_cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Usage("trials must be at least 1".into()));
        }
        if self.m_cap == 0 {
            return Err(Error::Usage("m_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Aggregated outcome of a seeded run. Deterministic given the config.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimResult {
    pub config: SimConfig,
    /// Completed trials grouped by exact stopping time.
    pub t_counts: BTreeMap<usize, u64>,
    pub truncated_trials: u64,
    /// Mean stopping time over completed trials; absent when every trial
    /// truncated. Truncation biases this low by at most the truncated
    /// fraction times the cap.
    pub mean_t: Option<f64>,
    /// Sparse histogram of emitted target words, completed trials only.
    pub empirical_law: BTreeMap<String, u64>,
    /// Total random bits consumed across all trials.
    pub bits_drawn: u64,
    /// Set when the truncated fraction exceeds 1e-4, the level at which the
    /// mean bias stops being negligible.
    pub truncation_flagged: bool,
}

impl SimResult {
    pub fn completed(&self) -> u64 {
        self.config.trials - self.truncated_trials
    }

    /// Number of trials with T > m. A truncated trial was still open at
    /// m_cap, so it counts for every m up to the cap; queries beyond the cap
    /// are not meaningful.
    pub fn overflow_count(&self, m: usize) -> u64 {
        let open: u64 = self
            .t_counts
            .range(m.saturating_add(1)..)
            .map(|(_, c)| *c)
            .sum();
        open + self.truncated_trials
    }

    pub fn overflow_frequency(&self, m: usize) -> f64 {
        self.overflow_count(m) as f64 / self.config.trials as f64
    }

    /// Overflow counts for every m from 0 to the largest observed stopping
    /// time, the empirical counterpart of the exact overflow profile.
    pub fn empirical_overflow(&self) -> Vec<(usize, u64)> {
        let max_t = self.t_counts.keys().next_back().copied().unwrap_or(0);
        (0..=max_t).map(|m| (m, self.overflow_count(m))).collect()
    }
}

/// Runs `cfg.trials` independent generation trials, sampling the coin
/// realization exactly and feeding it to the interval generator until the
/// target word completes or the coin budget runs out.
pub fn run_trials(coin: &ProcessSpec, target: &ProcessSpec, cfg: SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    // Also validates both models and rejects named families, whose
    // irrational interval endpoints the generator cannot refine.
    let proto = Generator::new(coin, target, cfg.n)?;
    let alphabet = target.alphabet_size();
    let mut t_counts: BTreeMap<usize, u64> = BTreeMap::new();
    let mut empirical_law: BTreeMap<String, u64> = BTreeMap::new();
    let mut truncated = 0u64;
    let mut sum_t = 0u128;
    let mut bits_total = 0u64;
    for trial in 0..cfg.trials {
        let mut bits = BitStream::for_trial(cfg.seed, trial);
        let mut gen = proto.clone();
        let mut coin_state = coin.start();
        let mut outcome = if gen.is_done() {
            Some((gen.state().emitted.clone(), 0usize))
        } else {
            None
        };
        while outcome.is_none() && gen.state().coin_count() < cfg.m_cap {
            let x = sample_from_pmf(&coin.state_pmf(&coin_state), &mut bits)?;
            coin.advance(&mut coin_state, x)?;
            if let Step::Done { y, t } = gen.push_coin(x)? {
                outcome = Some((y, t));
            }
        }
        match outcome {
            Some((y, t)) => {
                sum_t += t as u128;
                *t_counts.entry(t).or_insert(0) += 1;
                *empirical_law
                    .entry(format_symbols(&y, alphabet))
                    .or_insert(0) += 1;
            }
            None => truncated += 1,
        }
        bits_total += bits.bits_drawn();
    }
    let completed = cfg.trials - truncated;
    let mean_t = if completed > 0 {
        Some(sum_t as f64 / completed as f64)
    } else {
        None
    };
    Ok(SimResult {
        config: cfg,
        t_counts,
        truncated_trials: truncated,
        mean_t,
        empirical_law,
        bits_drawn: bits_total,
        truncation_flagged: truncated as f64 > 1e-4 * cfg.trials as f64,
    })
}

/// Histogram bin width for empirical rates, in bits per symbol.
pub const SPECTRUM_BIN_DENOM: i64 = 32;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdMass {
    #[serde(with = "crate::exactnum::serde_ratio")]
    pub threshold: Ratio,
    /// Trials whose exact sequence probability is at most the threshold.
    pub count: u64,
}

/// Histogram of the empirical rate -log2(P(path))/length over sampled paths.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalSpectrum {
    pub length: usize,
    pub trials: u64,
    pub seed: u64,
    /// Bin k covers rates [k/32, (k+1)/32).
    pub bins: BTreeMap<i64, u64>,
    pub threshold_mass: Vec<ThresholdMass>,
}

fn rate_bin(p: &Ratio, length: usize) -> i64 {
    // The enclosure of log2 p is far narrower than a bin, so using its
    // midpoint perturbs the rate by well under the bin width.
    let (lo, hi) = log2_bounds(p, 20);
    let rate = -(lo + hi) / Ratio::from_integer(2.into()) / Ratio::from_integer(length.into());
    (rate * Ratio::from_integer(SPECTRUM_BIN_DENOM.into()))
        .floor()
        .to_integer()
        .try_into()
        .expect("rate bin fits i64")
}

/// Samples `trials` paths and bins their per-symbol information rates;
/// also counts, for each threshold, the paths with probability at most the
/// threshold (the empirical spectrum mass).
pub fn empirical_spectrum(
    model: &ProcessSpec,
    length: usize,
    trials: u64,
    seed: u64,
    thresholds: &[Ratio],
) -> Result<EmpiricalSpectrum> {
    model.validate()?;
    if !model.has_rational_conditionals() {
        return Err(Error::RationalConditionalsRequired);
    }
    if length == 0 || trials == 0 {
        return Err(Error::Usage(
            "empirical spectrum needs positive length and trials".into(),
        ));
    }
    for t in thresholds {
        require_threshold(t)?;
    }
    let mut bins: BTreeMap<i64, u64> = BTreeMap::new();
    let mut counts = vec![0u64; thresholds.len()];
    for trial in 0..trials {
        let mut bits = BitStream::for_trial(seed, trial);
        let path = sample_path(model, length, &mut bits)?;
        let p = model.seq_prob(&path)?;
        debug_assert!(p.is_positive(), "sampled path has positive probability");
        for (i, t) in thresholds.iter().enumerate() {
            if p <= *t {
                counts[i] += 1;
            }
        }
        *bins.entry(rate_bin(&p, length)).or_insert(0) += 1;
    }
    Ok(EmpiricalSpectrum {
        length,
        trials,
        seed,
        bins,
        threshold_mass: thresholds
            .iter()
            .zip(counts)
            .map(|(t, count)| ThresholdMass {
                threshold: t.clone(),
                count,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{ratio, DyadicExp};

    fn iid(pmf: &[(i64, i64)]) -> ProcessSpec {
        let pmf: Vec<String> = pmf.iter().map(|&(n, d)| format!("\"{n}/{d}\"")).collect();
        ProcessSpec::from_json(&format!("{{\"kind\":\"iid\",\"pmf\":[{}]}}", pmf.join(",")))
            .unwrap()
    }

    fn fair() -> ProcessSpec {
        iid(&[(1, 2), (1, 2)])
    }

    #[test]
    fn splitmix_known_answer() {
        // First outputs of splitmix64 from state zero, the published test
        // vector; pins the PRNG across releases.
        let mut rng = CounterRng::from_key(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn substreams_differ() {
        let a = CounterRng::for_trial(7, 0).next_u64();
        let b = CounterRng::for_trial(7, 1).next_u64();
        let c = CounterRng::for_trial(8, 0).next_u64();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_pmf_costs_no_bits() {
        let mut bits = BitStream::for_trial(1, 0);
        let pmf = vec![Prob::Rat(Ratio::one()), Prob::Rat(Ratio::zero())];
        for _ in 0..10 {
            assert_eq!(sample_from_pmf(&pmf, &mut bits).unwrap(), 0);
        }
        assert_eq!(bits.bits_drawn(), 0);
        let pmf = vec![Prob::Rat(Ratio::zero()), Prob::Rat(Ratio::one())];
        assert_eq!(sample_from_pmf(&pmf, &mut bits).unwrap(), 1);
        assert_eq!(bits.bits_drawn(), 0);
    }

    #[test]
    fn fair_pmf_is_one_bit() {
        let mut bits = BitStream::for_trial(3, 5);
        let pmf = vec![Prob::Rat(ratio(1, 2)), Prob::Rat(ratio(1, 2))];
        let mut reference = BitStream::for_trial(3, 5);
        for _ in 0..200 {
            let sym = sample_from_pmf(&pmf, &mut bits).unwrap();
            assert_eq!(sym, reference.next_bit() as usize);
        }
        assert_eq!(bits.bits_drawn(), 200);
    }

    #[test]
    fn two_thirds_frequency() {
        // 1e5 draws from (2/3, 1/3): frequency of symbol 0 within three
        // binomial sigmas of 2/3.
        let pmf = vec![Prob::Rat(ratio(2, 3)), Prob::Rat(ratio(1, 3))];
        let trials = 100_000u64;
        let mut zeros = 0u64;
        let mut total_bits = 0u64;
        for trial in 0..trials {
            let mut bits = BitStream::for_trial(0xC0FFEE, trial);
            if sample_from_pmf(&pmf, &mut bits).unwrap() == 0 {
                zeros += 1;
            }
            total_bits += bits.bits_drawn();
        }
        let freq = zeros as f64 / trials as f64;
        let sigma = (2.0 / 9.0 / trials as f64).sqrt();
        assert!((freq - 2.0 / 3.0).abs() < 3.0 * sigma, "freq {freq}");
        // Entropy of the step is ~0.918 bits; the sampler promises at most
        // entropy + 2 expected bits.
        assert!((total_bits as f64 / trials as f64) < 2.92);
    }

    #[test]
    fn chi_square_tripwire() {
        // Goodness of fit over (1/2, 1/3, 1/6), 1e5 draws: chi-square with
        // two degrees of freedom stays under the 1e-3 critical value 13.816.
        let pmf = vec![
            Prob::Rat(ratio(1, 2)),
            Prob::Rat(ratio(1, 3)),
            Prob::Rat(ratio(1, 6)),
        ];
        let trials = 100_000u64;
        let mut counts = [0u64; 3];
        for trial in 0..trials {
            let mut bits = BitStream::for_trial(0xDEADBEA7, trial);
            counts[sample_from_pmf(&pmf, &mut bits).unwrap()] += 1;
        }
        let expected = [trials as f64 / 2.0, trials as f64 / 3.0, trials as f64 / 6.0];
        let chi2: f64 = counts
            .iter()
            .zip(expected)
            .map(|(&c, e)| (c as f64 - e) * (c as f64 - e) / e)
            .sum();
        assert!(chi2 < 13.816, "chi2 {chi2}");
    }

    #[test]
    fn dyadic_boundary_sampling() {
        // Named Bernoulli step with exponent 1/2: symbol 0 has the
        // irrational probability 2^(-1/2) = 0.7071..., resolved by exact
        // dyadic comparison. Frequency within three sigmas.
        let e = DyadicExp::new(ratio(1, 2)).unwrap();
        let pmf = vec![Prob::PowTwo(e.clone()), Prob::OneMinusPowTwo(e)];
        let trials = 50_000u64;
        let mut zeros = 0u64;
        for trial in 0..trials {
            let mut bits = BitStream::for_trial(0x5EED, trial);
            if sample_from_pmf(&pmf, &mut bits).unwrap() == 0 {
                zeros += 1;
            }
        }
        let p = 0.5f64.sqrt();
        let freq = zeros as f64 / trials as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((freq - p).abs() < 3.0 * sigma, "freq {freq}");
    }

    #[test]
    fn named_model_paths_sample() {
        let model = ProcessSpec::from_json("{\"kind\":\"named\",\"family\":\"harmonic\"}").unwrap();
        let mut bits = BitStream::for_trial(11, 0);
        let path = sample_path(&model, 6, &mut bits).unwrap();
        assert_eq!(path.len(), 6);
        assert!(path.iter().all(|&x| x < 2));
        // First step has probability 2^(-1) = 1/2 for symbol 0, so exactly
        // one bit decides it.
        let mut b2 = BitStream::for_trial(11, 0);
        let first = sample_symbol(&model, &[], &mut b2).unwrap();
        assert_eq!(first, path[0]);
    }

    #[test]
    fn run_trials_deterministic() {
        let coin = fair();
        let target = iid(&[(2, 3), (1, 3)]);
        let cfg = SimConfig::new(42, 500, 3);
        let a = run_trials(&coin, &target, cfg).unwrap();
        let b = run_trials(&coin, &target, cfg).unwrap();
        assert_eq!(a, b);
        let c = run_trials(&coin, &target, SimConfig::new(43, 500, 3)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn run_trials_counts_consistent() {
        let coin = fair();
        let target = iid(&[(2, 3), (1, 3)]);
        let cfg = SimConfig::new(7, 2_000, 2).with_m_cap(30);
        let r = run_trials(&coin, &target, cfg).unwrap();
        let law_total: u64 = r.empirical_law.values().sum();
        assert_eq!(law_total, r.config.trials - r.truncated_trials);
        let t_total: u64 = r.t_counts.values().sum();
        assert_eq!(t_total, r.completed());
        assert_eq!(r.overflow_count(0), r.config.trials);
        for key in r.empirical_law.keys() {
            assert_eq!(key.len(), 2);
        }
    }

    #[test]
    fn run_trials_mean_t_matches_exact() {
        // Fair coin to (2/3, 1/3), one symbol: T is geometric with
        // Pr(T > m) = 2^-m, so E[T] = 2 and Var[T] = 2. The sample mean over
        // 1e5 trials stays within three sigmas of 2.
        let coin = fair();
        let target = iid(&[(2, 3), (1, 3)]);
        let trials = 100_000u64;
        let r = run_trials(&coin, &target, SimConfig::new(20260823, trials, 1)).unwrap();
        assert_eq!(r.truncated_trials, 0);
        let mean = r.mean_t.unwrap();
        let sigma = (2.0 / trials as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * sigma, "mean {mean}");
        assert!(!r.truncation_flagged);
    }

    #[test]
    fn run_trials_overflow_tracks_exact_profile() {
        // Empirical overflow frequencies stay inside four-sigma binomial
        // bands around the exact Pr(T > m).
        let coin = fair();
        let target = iid(&[(2, 3), (1, 3)]);
        let n = 2;
        let trials = 10_000u64;
        let profile = crate::analysis::stopping_profile(&coin, &target, n, 24).unwrap();
        let r = run_trials(&coin, &target, SimConfig::new(99, trials, n)).unwrap();
        assert_eq!(r.truncated_trials, 0);
        for m in 0..=12usize {
            let exact = crate::exactnum::ratio_f64(&profile.overflow[m]);
            let freq = r.overflow_frequency(m);
            let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
            assert!(
                (freq - exact).abs() <= 4.0 * sigma + 1e-9,
                "m={m} freq={freq} exact={exact}"
            );
        }
    }

    #[test]
    fn run_trials_truncation_bookkeeping() {
        // Cap of one coin symbol: the run completes only when the first flip
        // resolves the target symbol, which happens with probability 1/2.
        let coin = fair();
        let target = iid(&[(2, 3), (1, 3)]);
        let trials = 4_000u64;
        let cfg = SimConfig::new(5, trials, 1).with_m_cap(1);
        let r = run_trials(&coin, &target, cfg).unwrap();
        assert!(r.truncated_trials > 0);
        assert_eq!(r.completed() + r.truncated_trials, trials);
        assert_eq!(r.t_counts.keys().max(), Some(&1));
        assert_eq!(r.mean_t, Some(1.0));
        assert_eq!(r.overflow_count(1), r.truncated_trials);
        assert!(r.truncation_flagged);
        let frac = r.truncated_trials as f64 / trials as f64;
        assert!((frac - 0.5).abs() < 0.05);
    }

    #[test]
    fn run_trials_rejects_named_models() {
        let named = ProcessSpec::from_json("{\"kind\":\"named\",\"family\":\"harmonic\"}").unwrap();
        let err = run_trials(&named, &fair(), SimConfig::new(1, 10, 1)).unwrap_err();
        assert!(matches!(err, Error::RationalConditionalsRequired));
    }

    #[test]
    fn empirical_spectrum_fair_point_mass() {
        let model = fair();
        let thresholds = [pow2(-8), pow2(-9)];
        let s = empirical_spectrum(&model, 8, 300, 17, &thresholds).unwrap();
        // Every path has probability 2^-8: rate exactly one bit per symbol,
        // all mass in bin 32.
        assert_eq!(s.bins.len(), 1);
        assert_eq!(s.bins[&32], 300);
        assert_eq!(s.threshold_mass[0].count, 300);
        assert_eq!(s.threshold_mass[1].count, 0);
    }

    #[test]
    fn empirical_spectrum_reducible_modes() {
        // Reducible chain: classes of entropy rate 1 and 0 entered with
        // probability 1/2 each. Rates cluster at about one bit (class one)
        // and near zero (the absorbing state), weights within three sigmas
        // of 1/2.
        let model = ProcessSpec::from_json(
            "{\"kind\":\"markov\",\"transition\":[[\"1/2\",\"1/2\",\"0\"],[\"1/2\",\"1/2\",\"0\"],[\"0\",\"0\",\"1\"]],\"initial\":[\"1/4\",\"1/4\",\"1/2\"]}",
        )
        .unwrap();
        let length = 64;
        let trials = 2_000u64;
        let s = empirical_spectrum(&model, length, trials, 23, &[pow2(-32)]).unwrap();
        let low: u64 = s.bins.range(..16).map(|(_, c)| *c).sum();
        let high: u64 = s.bins.range(16..).map(|(_, c)| *c).sum();
        assert_eq!(low + high, trials);
        let sigma = (0.25 / trials as f64).sqrt();
        let w = high as f64 / trials as f64;
        assert!((w - 0.5).abs() < 3.0 * sigma, "w {w}");
        // Class-one paths have probability (1/4) 2^-(length-1), far below
        // 2^-32; absorbing paths have probability 1/2, far above.
        assert_eq!(s.threshold_mass[0].count, high);
    }

    #[test]
    fn empirical_spectrum_rejects_named_and_bad_args() {
        let named = ProcessSpec::from_json("{\"kind\":\"named\",\"family\":\"quadratic\"}").unwrap();
        assert!(matches!(
            empirical_spectrum(&named, 4, 10, 0, &[]),
            Err(Error::RationalConditionalsRequired)
        ));
        assert!(empirical_spectrum(&fair(), 0, 10, 0, &[]).is_err());
        assert!(empirical_spectrum(&fair(), 4, 10, 0, &[ratio(3, 2)]).is_err());
    }

    #[test]
    fn sim_result_serializes() {
        let coin = fair();
        let target = iid(&[(2, 3), (1, 3)]);
        let r = run_trials(&coin, &target, SimConfig::new(1, 50, 2)).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"t_counts\""));
        assert!(json.contains("\"empirical_law\""));
        assert!(json.contains("\"truncated_trials\":0"));
    }
}
