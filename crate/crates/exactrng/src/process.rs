//! Finite-alphabet process models with exact conditional laws, plus
//! structural analysis of rational Markov chains: stationary distributions,
//! entropy rates, closed-class decompositions and spectrum summaries.
//!
//! Symbols are 0-based indices internally. User-facing surfaces (CLI, JSON
//! reports, tree exports) convert to 1-based labels.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exactnum::{
    as_pow2, check_pmf, neg_log2_cert, pow2, ratio_f64, serde_ratio_mat, serde_ratio_vec,
    CertReal, DyadicExp, Ratio,
};
use crate::{Error, Result};

/// Certification precision for entropy enclosures, in fractional bits per
/// logarithm. Summing a few dozen terms still leaves widths far below any
/// tolerance used downstream.
const ENTROPY_BITS: u32 = 96;

use num_bigint::{BigInt, BigUint};

/// An exact step probability. Rational for ordinary models; the named
/// Bernoulli families produce 2^(-e) and 1 - 2^(-e) entries, which are kept
/// symbolic so comparisons stay exact.
#[derive(Clone, Debug, PartialEq)]
pub enum Prob {
    Rat(Ratio),
    PowTwo(DyadicExp),
    OneMinusPowTwo(DyadicExp),
}

impl Prob {
    pub fn is_zero(&self) -> bool {
        match self {
            Prob::Rat(r) => r.is_zero(),
            Prob::PowTwo(_) => false,
            Prob::OneMinusPowTwo(e) => e.is_one(),
        }
    }

    /// Exact rational form, when one exists.
    pub fn as_ratio(&self) -> Option<Ratio> {
        match self {
            Prob::Rat(r) => Some(r.clone()),
            Prob::PowTwo(e) if e.exponent().denom().is_one() => {
                e.exponent().numer().to_i64().map(|p| pow2(-p))
            }
            Prob::OneMinusPowTwo(e) if e.exponent().denom().is_one() => e
                .exponent()
                .numer()
                .to_i64()
                .map(|p| Ratio::one() - pow2(-p)),
            _ => None,
        }
    }

    /// Exact three-way comparison of the represented value against q.
    pub fn cmp_ratio(&self, q: &Ratio) -> Ordering {
        match self {
            Prob::Rat(r) => r.cmp(q),
            Prob::PowTwo(e) => crate::exactnum::cmp_ratio_dyadic(q, e).reverse(),
            Prob::OneMinusPowTwo(e) => {
                // 1 - 2^(-e) vs q has the same order as (1 - q) vs 2^(-e).
                crate::exactnum::cmp_ratio_dyadic(&(Ratio::one() - q), e)
            }
        }
    }

    pub fn value_f64(&self) -> f64 {
        match self {
            Prob::Rat(r) => ratio_f64(r),
            Prob::PowTwo(e) => e.value_f64(),
            Prob::OneMinusPowTwo(e) => 1.0 - e.value_f64(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Harmonic,
    Quadratic,
}

impl Family {
    /// Exponent of the step-i "1" probability: 2^(-1/i) or 2^(-1/i^2),
    /// with i counted from 1.
    pub fn step_exponent(&self, i: u64) -> Ratio {
        let i = BigInt::from(i);
        match self {
            Family::Harmonic => Ratio::new(BigInt::one(), i),
            Family::Quadratic => Ratio::new(BigInt::one(), &i * &i),
        }
    }
}

/// A finite-alphabet process given by its exact conditional laws.
///
/// The JSON form is tagged by "kind", with rationals as "num/den" strings:
/// `{"kind":"iid","pmf":["2/3","1/3"]}`,
/// `{"kind":"markov","transition":[["3/4","1/4"],["1/4","3/4"]],"initial":["1/2","1/2"]}`,
/// `{"kind":"mixture","weights":[...],"components":[...]}`,
/// `{"kind":"named","family":"harmonic"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProcessSpec {
    Iid {
        #[serde(with = "serde_ratio_vec")]
        pmf: Vec<Ratio>,
    },
    Markov {
        #[serde(with = "serde_ratio_mat")]
        transition: Vec<Vec<Ratio>>,
        #[serde(with = "serde_ratio_vec")]
        initial: Vec<Ratio>,
    },
    Mixture {
        #[serde(with = "serde_ratio_vec")]
        weights: Vec<Ratio>,
        components: Vec<ProcessSpec>,
    },
    Named {
        family: Family,
    },
}

/// Memory of a consistent prefix, enough to produce the next conditional
/// law. Mixture states carry unnormalized posterior weights per component;
/// components whose posterior hits zero are frozen and skipped.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProcState {
    Iid,
    Markov(Option<usize>),
    Mixture(Vec<(Ratio, ProcState)>),
    Named(u64),
}

impl ProcessSpec {
    pub fn from_json(s: &str) -> Result<ProcessSpec> {
        let spec: ProcessSpec =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("process config: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn alphabet_size(&self) -> usize {
        match self {
            ProcessSpec::Iid { pmf } => pmf.len(),
            ProcessSpec::Markov { transition, .. } => transition.len(),
            ProcessSpec::Mixture { components, .. } => {
                components.first().map_or(0, |c| c.alphabet_size())
            }
            ProcessSpec::Named { .. } => 2,
        }
    }

    /// True when every conditional law is rational, i.e. the model is not a
    /// named Bernoulli family.
    pub fn has_rational_conditionals(&self) -> bool {
        !matches!(self, ProcessSpec::Named { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::Iid { pmf } => check_pmf(pmf, "pmf"),
            ProcessSpec::Markov {
                transition,
                initial,
            } => {
                let k = transition.len();
                if k == 0 {
                    return Err(Error::InvalidModel("transition: empty".into()));
                }
                for (i, row) in transition.iter().enumerate() {
                    if row.len() != k {
                        return Err(Error::InvalidModel(format!(
                            "transition: row {} has {} entries, expected {}",
                            i + 1,
                            row.len(),
                            k
                        )));
                    }
                    check_pmf(row, &format!("transition row {}", i + 1))?;
                }
                if initial.len() != k {
                    return Err(Error::InvalidModel(format!(
                        "initial: {} entries, expected {}",
                        initial.len(),
                        k
                    )));
                }
                check_pmf(initial, "initial")
            }
            ProcessSpec::Mixture {
                weights,
                components,
            } => {
                if components.is_empty() {
                    return Err(Error::InvalidModel("components: empty".into()));
                }
                if weights.len() != components.len() {
                    return Err(Error::InvalidModel(format!(
                        "weights: {} entries for {} components",
                        weights.len(),
                        components.len()
                    )));
                }
                check_pmf(weights, "weights")?;
                let k = components[0].alphabet_size();
                for (i, c) in components.iter().enumerate() {
                    c.validate()?;
                    if c.alphabet_size() != k {
                        return Err(Error::InvalidModel(format!(
                            "components: component {} has alphabet size {}, expected {}",
                            i + 1,
                            c.alphabet_size(),
                            k
                        )));
                    }
                    if !c.has_rational_conditionals() {
                        return Err(Error::InvalidModel(
                            "components: mixture components must have rational conditionals"
                                .into(),
                        ));
                    }
                }
                Ok(())
            }
            ProcessSpec::Named { .. } => Ok(()),
        }
    }

    /// State for the empty prefix.
    pub fn start(&self) -> ProcState {
        match self {
            ProcessSpec::Iid { .. } => ProcState::Iid,
            ProcessSpec::Markov { .. } => ProcState::Markov(None),
            ProcessSpec::Mixture {
                weights,
                components,
            } => ProcState::Mixture(
                weights
                    .iter()
                    .zip(components)
                    .map(|(w, c)| (w.clone(), c.start()))
                    .collect(),
            ),
            ProcessSpec::Named { .. } => ProcState::Named(0),
        }
    }

    /// Conditional law of the next symbol at the given state.
    pub fn state_pmf(&self, state: &ProcState) -> Vec<Prob> {
        match (self, state) {
            (ProcessSpec::Iid { pmf }, ProcState::Iid) => {
                pmf.iter().cloned().map(Prob::Rat).collect()
            }
            (
                ProcessSpec::Markov {
                    transition,
                    initial,
                },
                ProcState::Markov(last),
            ) => {
                let row = match last {
                    None => initial,
                    Some(i) => &transition[*i],
                };
                row.iter().cloned().map(Prob::Rat).collect()
            }
            (ProcessSpec::Mixture { components, .. }, ProcState::Mixture(posts)) => {
                let total: Ratio = posts.iter().map(|(w, _)| w.clone()).sum();
                assert!(total.is_positive(), "mixture state lost all mass");
                let k = self.alphabet_size();
                let mut out = vec![Ratio::zero(); k];
                for ((w, st), comp) in posts.iter().zip(components) {
                    if w.is_zero() {
                        continue;
                    }
                    for (j, p) in comp.state_pmf_ratios_at(st).iter().enumerate() {
                        out[j] += w * p;
                    }
                }
                out.into_iter().map(|p| Prob::Rat(p / &total)).collect()
            }
            (ProcessSpec::Named { family }, ProcState::Named(count)) => {
                let e = DyadicExp::new(family.step_exponent(count + 1))
                    .expect("step exponent is positive");
                vec![Prob::PowTwo(e.clone()), Prob::OneMinusPowTwo(e)]
            }
            _ => panic!("state does not match model"),
        }
    }

    /// Rational conditional law at the state; fails for named families.
    pub fn state_pmf_ratios(&self, state: &ProcState) -> Result<Vec<Ratio>> {
        if !self.has_rational_conditionals() {
            return Err(Error::RationalConditionalsRequired);
        }
        Ok(self.state_pmf_ratios_at(state))
    }

    fn state_pmf_ratios_at(&self, state: &ProcState) -> Vec<Ratio> {
        self.state_pmf(state)
            .into_iter()
            .map(|p| match p {
                Prob::Rat(r) => r,
                _ => unreachable!("rational model produced a symbolic probability"),
            })
            .collect()
    }

    /// Advances the state by one observed symbol. Fails when the symbol has
    /// conditional probability exactly zero.
    pub fn advance(&self, state: &mut ProcState, sym: usize) -> Result<()> {
        if sym >= self.alphabet_size() {
            return Err(Error::SymbolOutOfRange(sym));
        }
        match (self, &mut *state) {
            (ProcessSpec::Iid { pmf }, ProcState::Iid) => {
                if pmf[sym].is_zero() {
                    return Err(Error::NullConditioning);
                }
            }
            (
                ProcessSpec::Markov {
                    transition,
                    initial,
                },
                ProcState::Markov(last),
            ) => {
                let row = match last {
                    None => initial,
                    Some(i) => &transition[*i],
                };
                if row[sym].is_zero() {
                    return Err(Error::NullConditioning);
                }
                *last = Some(sym);
            }
            (ProcessSpec::Mixture { components, .. }, ProcState::Mixture(posts)) => {
                let mut next = posts.clone();
                let mut total = Ratio::zero();
                for ((w, st), comp) in next.iter_mut().zip(components) {
                    if w.is_zero() {
                        continue;
                    }
                    let p = comp.state_pmf_ratios_at(st)[sym].clone();
                    if p.is_zero() {
                        *w = Ratio::zero();
                        continue;
                    }
                    *w *= &p;
                    comp.advance(st, sym)?;
                    total += &*w;
                }
                if total.is_zero() {
                    return Err(Error::NullConditioning);
                }
                *posts = next;
            }
            (ProcessSpec::Named { .. }, ProcState::Named(count)) => {
                *count += 1;
            }
            _ => panic!("state does not match model"),
        }
        Ok(())
    }

    /// Conditional law of the next symbol after an explicit prefix.
    pub fn cond_pmf(&self, prefix: &[usize]) -> Result<Vec<Prob>> {
        let mut st = self.start();
        for &s in prefix {
            if s >= self.alphabet_size() {
                return Err(Error::SymbolOutOfRange(s));
            }
            if self.state_pmf(&st)[s].is_zero() {
                return Err(Error::NullConditioning);
            }
            self.advance(&mut st, s)?;
        }
        Ok(self.state_pmf(&st))
    }

    /// Exact probability of a symbol sequence. Zero is a valid return; the
    /// named families are rejected because their sequence probabilities are
    /// irrational.
    pub fn seq_prob(&self, seq: &[usize]) -> Result<Ratio> {
        if !self.has_rational_conditionals() {
            return Err(Error::RationalConditionalsRequired);
        }
        let mut st = self.start();
        let mut p = Ratio::one();
        for &s in seq {
            if s >= self.alphabet_size() {
                return Err(Error::SymbolOutOfRange(s));
            }
            let step = &self.state_pmf_ratios_at(&st)[s];
            if step.is_zero() {
                return Ok(Ratio::zero());
            }
            p *= step;
            self.advance(&mut st, s)?;
        }
        Ok(p)
    }

    /// Exact min-entropy of the first m symbols, in bits, for models that
    /// are independent across time. The value is rational exactly when every
    /// step's largest mass is a power of two, which holds for the named
    /// families by construction.
    pub fn min_entropy(&self, m: u64) -> Result<Ratio> {
        match self {
            ProcessSpec::Iid { pmf } => {
                let maxp = pmf.iter().max().expect("nonempty pmf");
                if maxp.is_one() {
                    return Ok(Ratio::zero());
                }
                match as_pow2(maxp) {
                    Some(s) if s < 0 => Ok(Ratio::from(BigInt::from(-s)) * BigInt::from(m)),
                    _ => Err(Error::MinEntropyIrrational),
                }
            }
            ProcessSpec::Named { family } => {
                let mut acc = MinEntropyAcc::new(*family);
                for _ in 0..m {
                    acc.push();
                }
                Ok(acc.value())
            }
            _ => Err(Error::MinEntropyMemory),
        }
    }

    /// Largest conditional probability the model can ever produce (for the
    /// named families this supremum is 1).
    pub fn max_cond_prob(&self) -> Ratio {
        match self {
            ProcessSpec::Iid { pmf } => pmf.iter().max().expect("nonempty").clone(),
            ProcessSpec::Markov {
                transition,
                initial,
            } => transition
                .iter()
                .flatten()
                .chain(initial)
                .max()
                .expect("nonempty")
                .clone(),
            ProcessSpec::Mixture { components, .. } => components
                .iter()
                .map(|c| c.max_cond_prob())
                .max()
                .expect("nonempty"),
            ProcessSpec::Named { .. } => Ratio::one(),
        }
    }
}

/// Canonical form of a state for use as a dynamic-programming key: mixture
/// posteriors are normalized and zero-weight components dropped, so states
/// reached along different prefixes but defining the same conditional future
/// compare equal.
pub fn canonical_state_key(state: &ProcState) -> ProcState {
    match state {
        ProcState::Mixture(posts) => {
            let total: Ratio = posts.iter().map(|(w, _)| w.clone()).sum();
            let live: Vec<(Ratio, ProcState)> = posts
                .iter()
                .filter(|(w, _)| !w.is_zero())
                .map(|(w, st)| (w / &total, canonical_state_key(st)))
                .collect();
            ProcState::Mixture(live)
        }
        other => other.clone(),
    }
}

/// Incremental exact prefix sums of per-step min-entropies for a named
/// family. The denominator is maintained as an lcm so each step costs a few
/// big-integer multiplications by small factors instead of a full gcd on
/// operands that grow to thousands of bits.
pub struct MinEntropyAcc {
    family: Family,
    i: u64,
    num: BigUint,
    lcm: BigUint,
}

impl MinEntropyAcc {
    pub fn new(family: Family) -> Self {
        MinEntropyAcc {
            family,
            i: 0,
            num: BigUint::zero(),
            lcm: BigUint::one(),
        }
    }

    /// Number of terms accumulated so far.
    pub fn m(&self) -> u64 {
        self.i
    }

    fn den(&self) -> BigUint {
        match self.family {
            Family::Harmonic => self.lcm.clone(),
            Family::Quadratic => &self.lcm * &self.lcm,
        }
    }

    /// Adds the next term (1/i or 1/i^2).
    pub fn push(&mut self) {
        self.i += 1;
        let i = BigUint::from(self.i);
        let g = num_integer::Integer::gcd(&self.lcm, &i);
        let grow = &i / &g;
        match self.family {
            Family::Harmonic => {
                // den goes from lcm to lcm*grow; term is den'/i
                self.lcm *= &grow;
                self.num = &self.num * &grow + &self.lcm / &i;
            }
            Family::Quadratic => {
                // den is lcm^2; term is (lcm'/i)^2
                self.lcm *= &grow;
                let t = &self.lcm / &i;
                self.num = &self.num * (&grow * &grow) + &t * &t;
            }
        }
    }

    /// Current sum as a reduced rational (one gcd).
    pub fn value(&self) -> Ratio {
        Ratio::new(BigInt::from(self.num.clone()), BigInt::from(self.den()))
    }

    /// Exact comparison sum >= r without reducing the accumulator.
    pub fn ge(&self, r: &Ratio) -> bool {
        if r.is_negative() {
            return true;
        }
        let lhs = BigInt::from(self.num.clone()) * r.denom();
        let rhs = r.numer() * BigInt::from(self.den());
        lhs >= rhs
    }
}

/// Closed communicating classes of a transition matrix together with their
/// initial-mass weights and entropy rates.
#[derive(Clone, Debug)]
pub struct ClassDecomposition {
    pub classes: Vec<Vec<usize>>,
    pub weights: Vec<Ratio>,
    pub entropies: Vec<CertReal>,
}

/// Certified spectrum summary: largest, smallest and initial-mass-averaged
/// per-symbol entropy over the classes the process can start in.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSummary {
    pub sup: CertReal,
    pub inf: CertReal,
    pub avg: CertReal,
}

impl SpectrumSummary {
    pub fn point(h: CertReal) -> Self {
        SpectrumSummary {
            sup: h.clone(),
            inf: h.clone(),
            avg: h,
        }
    }

    /// True when sup and inf cannot be distinguished within certification
    /// error.
    pub fn is_one_point(&self) -> bool {
        self.sup.overlaps(&self.inf)
    }
}

fn validate_transition(transition: &[Vec<Ratio>]) -> Result<()> {
    if transition.is_empty() {
        return Err(Error::InvalidModel("transition: empty".into()));
    }
    for (i, row) in transition.iter().enumerate() {
        if row.len() != transition.len() {
            return Err(Error::InvalidModel(format!(
                "transition: row {} has {} entries, expected {}",
                i + 1,
                row.len(),
                transition.len()
            )));
        }
        check_pmf(row, &format!("transition row {}", i + 1))?;
    }
    Ok(())
}

/// Strongly connected components of the positive-transition digraph, by
/// Kosaraju's two passes. Returned in an arbitrary order.
fn strongly_connected_components(transition: &[Vec<Ratio>]) -> Vec<Vec<usize>> {
    let k = transition.len();
    let mut order = Vec::with_capacity(k);
    let mut seen = vec![false; k];
    for s in 0..k {
        if seen[s] {
            continue;
        }
        // Iterative DFS recording finish order.
        let mut stack = vec![(s, 0usize)];
        seen[s] = true;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            let mut advanced = false;
            while *next < k {
                let w = *next;
                *next += 1;
                if transition[v][w].is_positive() && !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                    advanced = true;
                    break;
                }
            }
            if !advanced && stack.last().map(|&(v2, n)| (v2, n)) == Some((v, k)) {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut comp = vec![usize::MAX; k];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = classes.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for u in 0..k {
                if transition[u][v].is_positive() && comp[u] == usize::MAX {
                    comp[u] = id;
                    members.push(u);
                    stack.push(u);
                }
            }
        }
        members.sort_unstable();
        classes.push(members);
    }
    classes
}

/// Solves pi W = pi, sum(pi) = 1 exactly, assuming W irreducible.
fn solve_stationary(transition: &[Vec<Ratio>]) -> Vec<Ratio> {
    let k = transition.len();
    // Rows: the k balance equations (W^T - I) pi = 0 plus normalization.
    let mut rows: Vec<Vec<Ratio>> = Vec::with_capacity(k + 1);
    for i in 0..k {
        let mut row: Vec<Ratio> = (0..k).map(|j| transition[j][i].clone()).collect();
        row[i] -= Ratio::one();
        row.push(Ratio::zero());
        rows.push(row);
    }
    rows.push(vec![Ratio::one(); k + 1]);
    // Gaussian elimination with exact pivots.
    let mut rank = 0;
    for col in 0..k {
        let pivot = (rank..rows.len())
            .find(|&r| !rows[r][col].is_zero())
            .expect("irreducible chain yields a solvable system");
        rows.swap(rank, pivot);
        let inv = rows[rank][col].recip();
        for x in rows[rank].iter_mut() {
            *x *= &inv;
        }
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                for c in 0..=k {
                    let delta = &factor * &rows[rank][c];
                    rows[r][c] -= delta;
                }
            }
        }
        rank += 1;
    }
    (0..k).map(|i| rows[i][k].clone()).collect()
}

/// Exact stationary distribution of an irreducible transition matrix.
pub fn stationary_distribution(transition: &[Vec<Ratio>]) -> Result<Vec<Ratio>> {
    validate_transition(transition)?;
    if strongly_connected_components(transition).len() != 1 {
        return Err(Error::NotIrreducible);
    }
    Ok(solve_stationary(transition))
}

/// Entropy in bits of a rational pmf, as a certified enclosure.
pub fn entropy_pmf(pmf: &[Ratio]) -> CertReal {
    let mut h = CertReal::zero();
    for p in pmf {
        if p.is_zero() {
            continue;
        }
        h = h.add(&neg_log2_cert(p, ENTROPY_BITS).mul_nonneg(p));
    }
    h
}

/// Entropy rate of a Markov chain in bits per symbol: the stationary
/// expectation of the per-row entropies. Zero-probability transitions
/// contribute nothing.
pub fn entropy_rate_markov(transition: &[Vec<Ratio>], stationary: &[Ratio]) -> CertReal {
    let mut h = CertReal::zero();
    for (pi, row) in stationary.iter().zip(transition) {
        if pi.is_zero() {
            continue;
        }
        for w in row {
            if w.is_zero() {
                continue;
            }
            h = h.add(&neg_log2_cert(w, ENTROPY_BITS).mul_nonneg(&(pi * w)));
        }
    }
    h
}

/// Decomposes a transition matrix into closed irreducible classes. Every
/// state must belong to a closed class: a state that can leak into another
/// class would be transient, which this analysis does not support.
pub fn decompose_classes(
    transition: &[Vec<Ratio>],
    initial: &[Ratio],
) -> Result<ClassDecomposition> {
    validate_transition(transition)?;
    if initial.len() != transition.len() {
        return Err(Error::InvalidModel(format!(
            "initial: {} entries, expected {}",
            initial.len(),
            transition.len()
        )));
    }
    check_pmf(initial, "initial")?;
    let mut classes = strongly_connected_components(transition);
    classes.sort_by_key(|c| c[0]);
    for class in &classes {
        for &i in class {
            for (j, p) in transition[i].iter().enumerate() {
                if p.is_positive() && !class.contains(&j) {
                    return Err(Error::TransientClass);
                }
            }
        }
    }
    let mut weights = Vec::with_capacity(classes.len());
    let mut entropies = Vec::with_capacity(classes.len());
    for class in &classes {
        weights.push(class.iter().map(|&i| initial[i].clone()).sum());
        let block: Vec<Vec<Ratio>> = class
            .iter()
            .map(|&i| class.iter().map(|&j| transition[i][j].clone()).collect())
            .collect();
        let pi = solve_stationary(&block);
        entropies.push(entropy_rate_markov(&block, &pi));
    }
    Ok(ClassDecomposition {
        classes,
        weights,
        entropies,
    })
}

/// Spectrum summary from a class decomposition: max, min and weighted
/// average of the class entropy rates, ignoring classes of weight zero.
pub fn spectrum_summary(decomp: &ClassDecomposition) -> SpectrumSummary {
    let mut sup: Option<CertReal> = None;
    let mut inf: Option<CertReal> = None;
    let mut avg = CertReal::zero();
    for (w, h) in decomp.weights.iter().zip(&decomp.entropies) {
        if w.is_zero() {
            continue;
        }
        sup = Some(match sup {
            None => h.clone(),
            Some(s) => s.max_with(h),
        });
        inf = Some(match inf {
            None => h.clone(),
            Some(s) => s.min_with(h),
        });
        avg = avg.add(&h.mul_nonneg(w));
    }
    SpectrumSummary {
        sup: sup.expect("weights sum to 1, some class has positive weight"),
        inf: inf.expect("weights sum to 1"),
        avg,
    }
}

/// Analytic spectrum summary of a process, where one exists: a single point
/// for i.i.d. models, the class decomposition for Markov models, the
/// weighted merge for finite mixtures. Named families are refused.
pub fn process_spectrum(spec: &ProcessSpec) -> Result<SpectrumSummary> {
    match spec {
        ProcessSpec::Iid { pmf } => Ok(SpectrumSummary::point(entropy_pmf(pmf))),
        ProcessSpec::Markov {
            transition,
            initial,
        } => Ok(spectrum_summary(&decompose_classes(transition, initial)?)),
        ProcessSpec::Mixture {
            weights,
            components,
        } => {
            let mut sup: Option<CertReal> = None;
            let mut inf: Option<CertReal> = None;
            let mut avg = CertReal::zero();
            for (w, c) in weights.iter().zip(components) {
                if w.is_zero() {
                    continue;
                }
                let s = process_spectrum(c)?;
                sup = Some(match sup {
                    None => s.sup.clone(),
                    Some(x) => x.max_with(&s.sup),
                });
                inf = Some(match inf {
                    None => s.inf.clone(),
                    Some(x) => x.min_with(&s.inf),
                });
                avg = avg.add(&s.avg.mul_nonneg(w));
            }
            Ok(SpectrumSummary {
                sup: sup.expect("nonzero weight exists"),
                inf: inf.expect("nonzero weight exists"),
                avg,
            })
        }
        ProcessSpec::Named { .. } => Err(Error::SpectrumUnavailable),
    }
}

/// Exact law of the first `len` symbols, over sequences of positive
/// probability. The alphabet_size^len blowup is guarded.
pub fn enumerate_law(spec: &ProcessSpec, len: usize) -> Result<BTreeMap<Vec<usize>, Ratio>> {
    if !spec.has_rational_conditionals() {
        return Err(Error::RationalConditionalsRequired);
    }
    let k = spec.alphabet_size();
    if BigUint::from(k).pow(len as u32) > BigUint::from(1u64 << 22) {
        return Err(Error::TargetLengthBudget);
    }
    let mut out = BTreeMap::new();
    let mut stack = vec![(Vec::new(), spec.start(), Ratio::one())];
    while let Some((prefix, st, p)) = stack.pop() {
        if prefix.len() == len {
            out.insert(prefix, p);
            continue;
        }
        let pmf = spec.state_pmf_ratios_at(&st);
        for (s, q) in pmf.iter().enumerate() {
            if q.is_zero() {
                continue;
            }
            let mut st2 = st.clone();
            spec.advance(&mut st2, s)?;
            let mut pre2 = prefix.clone();
            pre2.push(s);
            stack.push((pre2, st2, &p * q));
        }
    }
    Ok(out)
}

/// Helper for display: formats a symbol sequence as 1-based labels.
pub fn format_symbols(seq: &[usize], alphabet: usize) -> String {
    if seq.is_empty() {
        return "-".into();
    }
    if alphabet <= 9 {
        seq.iter()
            .map(|s| (s + 1).to_string())
            .collect::<Vec<_>>()
            .join("")
    } else {
        seq.iter()
            .map(|s| (s + 1).to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::ratio;
    use proptest::prelude::*;

    pub(crate) fn iid(pmf: &[(i64, i64)]) -> ProcessSpec {
        ProcessSpec::Iid {
            pmf: pmf.iter().map(|&(n, d)| ratio(n, d)).collect(),
        }
    }

    pub(crate) fn markov(rows: &[&[(i64, i64)]], init: &[(i64, i64)]) -> ProcessSpec {
        ProcessSpec::Markov {
            transition: rows
                .iter()
                .map(|r| r.iter().map(|&(n, d)| ratio(n, d)).collect())
                .collect(),
            initial: init.iter().map(|&(n, d)| ratio(n, d)).collect(),
        }
    }

    fn ex_markov() -> ProcessSpec {
        markov(
            &[&[(3, 4), (1, 4)], &[(1, 4), (3, 4)]],
            &[(1, 2), (1, 2)],
        )
    }

    #[test]
    fn cond_pmf_examples() {
        let m = iid(&[(2, 3), (1, 3)]);
        let pmf = m.cond_pmf(&[]).unwrap();
        assert_eq!(pmf[0], Prob::Rat(ratio(2, 3)));
        assert_eq!(pmf[1], Prob::Rat(ratio(1, 3)));

        let pmf = ex_markov().cond_pmf(&[1]).unwrap();
        assert_eq!(pmf[0], Prob::Rat(ratio(1, 4)));
        assert_eq!(pmf[1], Prob::Rat(ratio(3, 4)));

        let mix = ProcessSpec::Mixture {
            weights: vec![ratio(1, 2), ratio(1, 2)],
            components: vec![iid(&[(1, 1), (0, 1)]), iid(&[(0, 1), (1, 1)])],
        };
        let pmf = mix.cond_pmf(&[0]).unwrap();
        assert_eq!(pmf[0], Prob::Rat(ratio(1, 1)));
        assert_eq!(pmf[1], Prob::Rat(ratio(0, 1)));
    }

    #[test]
    fn cond_pmf_null_event() {
        let m = iid(&[(1, 1), (0, 1)]);
        assert!(matches!(
            m.cond_pmf(&[1]),
            Err(Error::NullConditioning)
        ));
    }

    #[test]
    fn seq_prob_examples() {
        let fair = iid(&[(1, 2), (1, 2)]);
        assert_eq!(fair.seq_prob(&[0, 1, 0]).unwrap(), ratio(1, 8));
        assert_eq!(ex_markov().seq_prob(&[0, 0]).unwrap(), ratio(3, 8));
        assert_eq!(fair.seq_prob(&[]).unwrap(), ratio(1, 1));
        let named = ProcessSpec::Named {
            family: Family::Harmonic,
        };
        assert!(named.seq_prob(&[0]).is_err());
    }

    #[test]
    fn min_entropy_examples() {
        let h = ProcessSpec::Named {
            family: Family::Harmonic,
        };
        assert_eq!(h.min_entropy(2).unwrap(), ratio(3, 2));
        assert_eq!(h.min_entropy(4).unwrap(), ratio(25, 12));
        let fair = iid(&[(1, 2), (1, 2)]);
        assert_eq!(fair.min_entropy(7).unwrap(), ratio(7, 1));
        assert!(matches!(
            ex_markov().min_entropy(3),
            Err(Error::MinEntropyMemory)
        ));
        assert!(matches!(
            iid(&[(2, 3), (1, 3)]).min_entropy(3),
            Err(Error::MinEntropyIrrational)
        ));
    }

    #[test]
    fn min_entropy_acc_matches_direct_sum() {
        let mut acc = MinEntropyAcc::new(Family::Harmonic);
        let mut direct = Ratio::zero();
        for i in 1..=50i64 {
            acc.push();
            direct += ratio(1, i);
            assert_eq!(acc.value(), direct);
            assert!(acc.ge(&direct));
            assert!(!acc.ge(&(&direct + ratio(1, 1000000))));
        }
        let mut acc = MinEntropyAcc::new(Family::Quadratic);
        let mut direct = Ratio::zero();
        for i in 1..=30i64 {
            acc.push();
            direct += ratio(1, i * i);
            assert_eq!(acc.value(), direct);
        }
    }

    #[test]
    fn stationary_examples() {
        let w = vec![
            vec![ratio(3, 4), ratio(1, 4)],
            vec![ratio(1, 4), ratio(3, 4)],
        ];
        assert_eq!(
            stationary_distribution(&w).unwrap(),
            vec![ratio(1, 2), ratio(1, 2)]
        );
        let w = vec![vec![ratio(0, 1), ratio(1, 1)], vec![ratio(1, 1), ratio(0, 1)]];
        assert_eq!(
            stationary_distribution(&w).unwrap(),
            vec![ratio(1, 2), ratio(1, 2)]
        );
        let w = vec![
            vec![ratio(1, 2), ratio(1, 2)],
            vec![ratio(1, 4), ratio(3, 4)],
        ];
        assert_eq!(
            stationary_distribution(&w).unwrap(),
            vec![ratio(1, 3), ratio(2, 3)]
        );
        let reducible = vec![
            vec![ratio(1, 1), ratio(0, 1)],
            vec![ratio(1, 2), ratio(1, 2)],
        ];
        assert!(matches!(
            stationary_distribution(&reducible),
            Err(Error::NotIrreducible)
        ));
    }

    #[test]
    fn stationary_is_exact_fixed_point() {
        let w = vec![
            vec![ratio(1, 7), ratio(2, 7), ratio(4, 7)],
            vec![ratio(1, 3), ratio(1, 3), ratio(1, 3)],
            vec![ratio(5, 8), ratio(1, 4), ratio(1, 8)],
        ];
        let pi = stationary_distribution(&w).unwrap();
        assert!(pi.iter().sum::<Ratio>().is_one());
        for j in 0..3 {
            let out: Ratio = (0..3).map(|i| &pi[i] * &w[i][j]).sum();
            assert_eq!(out, pi[j]);
        }
    }

    #[test]
    fn entropy_rate_examples() {
        let w = vec![
            vec![ratio(3, 4), ratio(1, 4)],
            vec![ratio(1, 4), ratio(3, 4)],
        ];
        let pi = stationary_distribution(&w).unwrap();
        let h = entropy_rate_markov(&w, &pi);
        let expect = 0.811278124459133;
        assert!((h.value_f64() - expect).abs() < 1e-12);
        assert!(h.width() < pow2(-80));

        let w = vec![vec![ratio(0, 1), ratio(1, 1)], vec![ratio(1, 1), ratio(0, 1)]];
        let h = entropy_rate_markov(&w, &stationary_distribution(&w).unwrap());
        assert_eq!(*h.lo(), Ratio::zero());
        assert_eq!(*h.hi(), Ratio::zero());

        let w = vec![
            vec![ratio(1, 2), ratio(1, 2)],
            vec![ratio(1, 2), ratio(1, 2)],
        ];
        let h = entropy_rate_markov(&w, &stationary_distribution(&w).unwrap());
        assert_eq!(*h.lo(), Ratio::one());
        assert_eq!(*h.hi(), Ratio::one());
    }

    fn reducible_target_matrix() -> (Vec<Vec<Ratio>>, Vec<Ratio>) {
        let z = || ratio(0, 1);
        (
            vec![
                vec![ratio(1, 2), ratio(1, 2), z()],
                vec![ratio(1, 2), ratio(1, 2), z()],
                vec![z(), z(), ratio(1, 1)],
            ],
            vec![ratio(1, 4), ratio(1, 4), ratio(1, 2)],
        )
    }

    #[test]
    fn decompose_examples() {
        let (w, init) = reducible_target_matrix();
        let d = decompose_classes(&w, &init).unwrap();
        assert_eq!(d.classes, vec![vec![0, 1], vec![2]]);
        assert_eq!(d.weights, vec![ratio(1, 2), ratio(1, 2)]);
        assert_eq!(*d.entropies[0].lo(), Ratio::one());
        assert_eq!(*d.entropies[1].lo(), Ratio::zero());

        let w = vec![
            vec![ratio(3, 4), ratio(1, 4)],
            vec![ratio(1, 4), ratio(3, 4)],
        ];
        let d = decompose_classes(&w, &[ratio(1, 3), ratio(2, 3)]).unwrap();
        assert_eq!(d.classes.len(), 1);
        assert_eq!(d.weights, vec![ratio(1, 1)]);

        let leaking = vec![
            vec![ratio(1, 2), ratio(1, 2), ratio(0, 1)],
            vec![ratio(1, 2), ratio(1, 2), ratio(0, 1)],
            vec![ratio(1, 2), ratio(0, 1), ratio(1, 2)],
        ];
        assert!(matches!(
            decompose_classes(&leaking, &[ratio(1, 3), ratio(1, 3), ratio(1, 3)]),
            Err(Error::TransientClass)
        ));
    }

    #[test]
    fn spectrum_summary_examples() {
        let (w, init) = reducible_target_matrix();
        let s = spectrum_summary(&decompose_classes(&w, &init).unwrap());
        assert_eq!(*s.sup.lo(), Ratio::one());
        assert_eq!(*s.inf.lo(), Ratio::zero());
        assert_eq!(*s.avg.lo(), ratio(1, 2));
        assert!(!s.is_one_point());

        let single = decompose_classes(
            &[
                vec![ratio(3, 4), ratio(1, 4)],
                vec![ratio(1, 4), ratio(3, 4)],
            ],
            &[ratio(1, 2), ratio(1, 2)],
        )
        .unwrap();
        let s = spectrum_summary(&single);
        assert_eq!(s.sup, s.inf);
        assert!(s.is_one_point());

        // Zero-weight class excluded from sup and inf.
        let d = ClassDecomposition {
            classes: vec![vec![0], vec![1]],
            weights: vec![ratio(1, 1), ratio(0, 1)],
            entropies: vec![CertReal::exact(Ratio::one()), CertReal::zero()],
        };
        let s = spectrum_summary(&d);
        assert_eq!(*s.sup.lo(), Ratio::one());
        assert_eq!(*s.inf.lo(), Ratio::one());
        assert_eq!(*s.avg.lo(), Ratio::one());
    }

    #[test]
    fn process_spectrum_named_refused() {
        assert!(matches!(
            process_spectrum(&ProcessSpec::Named {
                family: Family::Quadratic
            }),
            Err(Error::SpectrumUnavailable)
        ));
    }

    #[test]
    fn enumerate_law_sums_to_one() {
        for spec in [
            iid(&[(2, 3), (1, 3)]),
            ex_markov(),
            ProcessSpec::Mixture {
                weights: vec![ratio(1, 3), ratio(2, 3)],
                components: vec![iid(&[(1, 2), (1, 2)]), iid(&[(1, 4), (3, 4)])],
            },
        ] {
            for len in 0..=5 {
                let law = enumerate_law(&spec, len).unwrap();
                assert!(law.values().sum::<Ratio>().is_one());
            }
        }
    }

    #[test]
    fn mixture_law_is_weighted_component_law() {
        let c1 = iid(&[(1, 2), (1, 2)]);
        let c2 = markov(&[&[(1, 3), (2, 3)], &[(2, 3), (1, 3)]], &[(1, 1), (0, 1)]);
        let mix = ProcessSpec::Mixture {
            weights: vec![ratio(1, 4), ratio(3, 4)],
            components: vec![c1.clone(), c2.clone()],
        };
        for seq in [vec![], vec![0], vec![1, 0], vec![0, 1, 1], vec![1, 1, 1, 0]] {
            let got = mix.seq_prob(&seq).unwrap();
            let want = ratio(1, 4) * c1.seq_prob(&seq).unwrap()
                + ratio(3, 4) * c2.seq_prob(&seq).unwrap();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn named_pmf_shape() {
        let h = ProcessSpec::Named {
            family: Family::Harmonic,
        };
        let pmf = h.cond_pmf(&[0, 1]).unwrap();
        match &pmf[0] {
            Prob::PowTwo(e) => assert_eq!(*e.exponent(), ratio(1, 3)),
            other => panic!("unexpected {other:?}"),
        }
        let q = ProcessSpec::Named {
            family: Family::Quadratic,
        };
        let pmf = q.cond_pmf(&[0]).unwrap();
        match &pmf[0] {
            Prob::PowTwo(e) => assert_eq!(*e.exponent(), ratio(1, 4)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let m = ProcessSpec::from_json(
            r#"{"kind":"markov","transition":[["3/4","1/4"],["1/4","3/4"]],"initial":["1/2","1/2"]}"#,
        )
        .unwrap();
        assert_eq!(m, ex_markov());
        let j = serde_json::to_string(&m).unwrap();
        assert_eq!(ProcessSpec::from_json(&j).unwrap(), m);

        let bad = ProcessSpec::from_json(r#"{"kind":"iid","pmf":["1/2","1/3"]}"#);
        let msg = format!("{}", bad.unwrap_err());
        assert!(msg.contains("pmf"), "diagnostic should name the field: {msg}");

        let named = ProcessSpec::from_json(r#"{"kind":"named","family":"harmonic"}"#).unwrap();
        assert_eq!(
            named,
            ProcessSpec::Named {
                family: Family::Harmonic
            }
        );

        let mix_named = ProcessSpec::from_json(
            r#"{"kind":"mixture","weights":["1"],"components":[{"kind":"named","family":"harmonic"}]}"#,
        );
        assert!(mix_named.is_err());
    }

    proptest! {
        #[test]
        fn cond_pmf_sums_to_one(
            rows in proptest::collection::vec(
                proptest::collection::vec(1u32..20, 3), 3),
            init in proptest::collection::vec(1u32..20, 3),
            prefix in proptest::collection::vec(0usize..3, 0..6),
        ) {
            let norm = |v: &[u32]| -> Vec<Ratio> {
                let t: u32 = v.iter().sum();
                v.iter().map(|&x| ratio(x as i64, t as i64)).collect()
            };
            let spec = ProcessSpec::Markov {
                transition: rows.iter().map(|r| norm(r)).collect(),
                initial: norm(&init),
            };
            spec.validate().unwrap();
            let pmf = spec.cond_pmf(&prefix).unwrap();
            let total: Ratio = pmf.iter().map(|p| p.as_ratio().unwrap()).sum();
            prop_assert!(total.is_one());
        }

        #[test]
        fn mixture_posterior_pmf_sums_to_one(
            w in proptest::collection::vec(1u32..10, 2),
            p1 in proptest::collection::vec(1u32..10, 2),
            p2 in proptest::collection::vec(1u32..10, 2),
            prefix in proptest::collection::vec(0usize..2, 0..8),
        ) {
            let norm = |v: &[u32]| -> Vec<Ratio> {
                let t: u32 = v.iter().sum();
                v.iter().map(|&x| ratio(x as i64, t as i64)).collect()
            };
            let spec = ProcessSpec::Mixture {
                weights: norm(&w),
                components: vec![
                    ProcessSpec::Iid { pmf: norm(&p1) },
                    ProcessSpec::Iid { pmf: norm(&p2) },
                ],
            };
            let pmf = spec.cond_pmf(&prefix).unwrap();
            let total: Ratio = pmf.iter().map(|p| p.as_ratio().unwrap()).sum();
            prop_assert!(total.is_one());
        }
    }
}
