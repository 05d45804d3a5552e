//! Finite-length bounds on the overflow probability, and asymptotic rates.
//!
//! The converse and achievability evaluators take spectrum masses of the coin
//! and target at dyadic thresholds t_lambda = 2^(-lambda) and t_tau = 2^(-tau)
//! and combine them with the cross terms 2^(lambda - tau) and 2^(-lambda + tau + 1).
//! Both cross terms are ratios of the two thresholds, so every bound value is
//! an exact rational; no floating point enters.
//!
//! The asymptotic evaluator forms ratios of entropy-spectrum endpoints. Those
//! endpoints are certified enclosures ([`CertReal`]), so the rate figures carry
//! their accumulated error bounds with them.

use num_traits::{One, Zero};

use crate::analysis::{require_threshold, spectrum_masses, DEFAULT_SPECTRUM_BUDGET};
use crate::exactnum::{CertReal, Ratio};
use crate::process::{ProcessSpec, SpectrumSummary};
use crate::{Error, Result};

/// Inputs to the finite-length bounds, with the spectrum masses already
/// resolved.
///
/// `p_s` is the coin mass with sequence probability at most `t_lambda` (the
/// event S); `p_t` is the target mass with sequence probability at least
/// `t_tau` (the event T). The complements are stored explicitly so both forms
/// of the converse can be evaluated without recomputation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundQuery {
    pub m: usize,
    pub n: usize,
    pub t_lambda: Ratio,
    pub t_tau: Ratio,
    pub p_s: Ratio,
    pub p_s_c: Ratio,
    pub p_t: Ratio,
    pub p_t_c: Ratio,
}

impl BoundQuery {
    /// Resolve the spectrum masses of `coin` at length `m` and `target` at
    /// length `n` against the given thresholds.
    pub fn evaluate(
        coin: &ProcessSpec,
        target: &ProcessSpec,
        m: usize,
        n: usize,
        t_lambda: &Ratio,
        t_tau: &Ratio,
    ) -> Result<BoundQuery> {
        require_threshold(t_lambda)?;
        require_threshold(t_tau)?;
        let s = spectrum_masses(coin, m, t_lambda, DEFAULT_SPECTRUM_BUDGET)?;
        let t = spectrum_masses(target, n, t_tau, DEFAULT_SPECTRUM_BUDGET)?;
        let q = BoundQuery {
            m,
            n,
            t_lambda: t_lambda.clone(),
            t_tau: t_tau.clone(),
            p_s: s.mass_leq(),
            p_s_c: s.gt.clone(),
            p_t: t.mass_geq(),
            p_t_c: t.lt.clone(),
        };
        debug_assert!(q.p_s.clone() + &q.p_s_c == Ratio::one());
        debug_assert!(q.p_t.clone() + &q.p_t_c == Ratio::one());
        Ok(q)
    }

    /// Build a query from externally supplied masses. The two complements
    /// must pair up to one; this is the entry point for callers that already
    /// know the masses (or want hypothetical ones).
    pub fn from_masses(
        m: usize,
        n: usize,
        t_lambda: Ratio,
        t_tau: Ratio,
        p_s: Ratio,
        p_t: Ratio,
    ) -> Result<BoundQuery> {
        require_threshold(&t_lambda)?;
        require_threshold(&t_tau)?;
        for (v, what) in [(&p_s, "coin mass"), (&p_t, "target mass")] {
            if *v < Ratio::zero() || *v > Ratio::one() {
                return Err(Error::NumericRange(format!("{what} must lie in [0, 1]")));
            }
        }
        Ok(BoundQuery {
            m,
            n,
            t_lambda,
            t_tau,
            p_s_c: Ratio::one() - &p_s,
            p_t_c: Ratio::one() - &p_t,
            p_s,
            p_t,
        })
    }

    /// Cross term of the converse, 2^(lambda - tau) = t_tau / t_lambda.
    pub fn cross_converse(&self) -> Ratio {
        self.t_tau.clone() / &self.t_lambda
    }

    /// Cross term of the achievability bound, 2^(-lambda + tau + 1)
    /// = 2 t_lambda / t_tau.
    pub fn cross_achievability(&self) -> Ratio {
        Ratio::from_integer(2.into()) * &self.t_lambda / &self.t_tau
    }
}

/// Both forms of the converse lower bound on Pr(T > m).
///
/// Form one is P(T^c) - P(S) - 2^(lambda - tau); form two is
/// P(S^c) - P(T) - 2^(lambda - tau). Since P(S) + P(S^c) = 1 = P(T) + P(T^c)
/// the two forms agree identically; both are returned so callers can check
/// the arithmetic either way. Values may be negative (a vacuous bound).
pub fn converse_bound(q: &BoundQuery) -> (Ratio, Ratio) {
    let cross = q.cross_converse();
    let form_one = q.p_t_c.clone() - &q.p_s - &cross;
    let form_two = q.p_s_c.clone() - &q.p_t - &cross;
    debug_assert_eq!(form_one, form_two);
    (form_one, form_two)
}

/// Achievability upper bound on Pr(T > m):
/// P(S^c) + P(T^c) + 2^(-lambda + tau + 1).
pub fn achievability_bound(q: &BoundQuery) -> Ratio {
    q.p_s_c.clone() + &q.p_t_c + q.cross_achievability()
}

/// Asymptotic rate figures formed from the two entropy spectra.
///
/// `r_int_upper` bounds the interval-algorithm rate from above and `r_lower`
/// bounds the optimal rate from below; `l_int_upper` and `l_lower` play the
/// same roles for the expected (average) rate. All four are certified
/// enclosures. The one-point flags record whether each spectrum collapses to
/// a single value, which is when the paired bounds meet.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RatesReport {
    pub r_int_upper: CertReal,
    pub r_lower: CertReal,
    pub l_int_upper: CertReal,
    pub l_lower: CertReal,
    pub coin_one_point: bool,
    pub target_one_point: bool,
}

impl RatesReport {
    /// Whether the max-rate pair (`r_lower`, `r_int_upper`) provably meets,
    /// and likewise the average-rate pair. With exact spectrum endpoints this
    /// is decided exactly; with inexact ones overlap of enclosures is
    /// required but not sufficient, so this returns true only when both
    /// enclosures coincide as intervals.
    pub fn tight(&self) -> (bool, bool) {
        let same = |a: &CertReal, b: &CertReal| a.lo() == b.lo() && a.hi() == b.hi();
        (
            same(&self.r_lower, &self.r_int_upper),
            same(&self.l_lower, &self.l_int_upper),
        )
    }
}

/// Form the four rate ratios from coin and target spectrum summaries.
///
/// The coin spectrum must be bounded away from zero: a coin class of zero
/// entropy rate can never drive the target and the ratios would be undefined.
pub fn asymptotic_rates(
    coin: &SpectrumSummary,
    target: &SpectrumSummary,
) -> Result<RatesReport> {
    if *coin.inf.lo() <= Ratio::zero() {
        return Err(Error::CoinSpectrumZero);
    }
    let r_int_upper = target.sup.div(&coin.inf)?;
    let r_lower = target
        .sup
        .div(&coin.sup)?
        .max_with(&target.inf.div(&coin.inf)?);
    let l_int_upper = target.avg.div(&coin.inf)?;
    let l_lower = target.avg.div(&coin.sup)?;
    Ok(RatesReport {
        r_int_upper,
        r_lower,
        l_int_upper,
        l_lower,
        coin_one_point: coin.is_one_point(),
        target_one_point: target.is_one_point(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{pow2, ratio};
    use crate::process::process_spectrum;

    fn iid(pmf: &[(i64, i64)]) -> ProcessSpec {
        let pmf: Vec<String> = pmf.iter().map(|&(n, d)| format!("\"{n}/{d}\"")).collect();
        ProcessSpec::from_json(&format!(
            "{{\"kind\":\"iid\",\"pmf\":[{}]}}",
            pmf.join(",")
        ))
        .unwrap()
    }

    fn markov(rows: &[&[(i64, i64)]], init: &[(i64, i64)]) -> ProcessSpec {
        let row = |r: &[(i64, i64)]| {
            let cells: Vec<String> = r.iter().map(|&(n, d)| format!("\"{n}/{d}\"")).collect();
            format!("[{}]", cells.join(","))
        };
        let rows: Vec<String> = rows.iter().map(|r| row(r)).collect();
        ProcessSpec::from_json(&format!(
            "{{\"kind\":\"markov\",\"transition\":[{}],\"initial\":{}}}",
            rows.join(","),
            row(init)
        ))
        .unwrap()
    }

    #[test]
    fn converse_arithmetic() {
        // P(T^c) = 3/10, P(S) = 1/10, cross = (1/40)/(1/2) = 1/20.
        let q = BoundQuery::from_masses(
            3,
            2,
            ratio(1, 2),
            ratio(1, 40),
            ratio(1, 10),
            ratio(7, 10),
        )
        .unwrap();
        assert_eq!(q.cross_converse(), ratio(1, 20));
        let (a, b) = converse_bound(&q);
        assert_eq!(a, ratio(3, 20));
        assert_eq!(b, ratio(3, 20));
    }

    #[test]
    fn converse_forms_agree_identically() {
        // P(T^c) - P(S) equals P(S^c) - P(T) whenever the masses are
        // complementary, for any thresholds.
        for (ps_n, pt_n) in [(0i64, 0i64), (1, 7), (9, 3), (10, 10)] {
            let q = BoundQuery::from_masses(
                5,
                5,
                ratio(1, 4),
                ratio(1, 8),
                ratio(ps_n, 10),
                ratio(pt_n, 10),
            )
            .unwrap();
            assert_eq!(q.p_t_c.clone() - &q.p_s, q.p_s_c.clone() - &q.p_t);
        }
    }

    #[test]
    fn equal_exponents_give_vacuous_converse() {
        let q = BoundQuery::from_masses(
            4,
            4,
            ratio(1, 16),
            ratio(1, 16),
            Ratio::zero(),
            Ratio::one(),
        )
        .unwrap();
        assert_eq!(q.cross_converse(), Ratio::one());
        let (a, _) = converse_bound(&q);
        assert!(a <= Ratio::zero());
    }

    #[test]
    fn converse_fair_to_biased_holds() {
        // Fair coin, target (2/3, 1/3), one symbol each way. The true
        // overflow Pr(T > 1) is 1/2 and the bound must sit below it.
        let coin = iid(&[(1, 2), (1, 2)]);
        let target = iid(&[(2, 3), (1, 3)]);
        let q =
            BoundQuery::evaluate(&coin, &target, 1, 1, &ratio(1, 2), &ratio(1, 4)).unwrap();
        assert_eq!(q.p_s, Ratio::one());
        assert_eq!(q.p_t, Ratio::one());
        let (a, b) = converse_bound(&q);
        assert_eq!(a, ratio(-3, 2));
        assert_eq!(b, ratio(-3, 2));
        assert!(a <= ratio(1, 2));
    }

    #[test]
    fn achievability_arithmetic() {
        // Both deficiency masses zero: the bound is the bare cross term
        // 2 * 2^-8 / 2^-4 = 1/8.
        let q = BoundQuery::from_masses(
            6,
            3,
            pow2(-8),
            pow2(-4),
            Ratio::one(),
            Ratio::one(),
        )
        .unwrap();
        assert_eq!(achievability_bound(&q), ratio(1, 8));
    }

    #[test]
    fn achievability_dominates_true_overflow() {
        // Fair coin, ten flips: every sequence has probability 2^-10, so
        // the coin event is saturated at t_lambda = 2^-10. Target (2/3, 1/3)
        // of length one is saturated at t_tau = 1/16. The bound 2^-5 must
        // dominate the true overflow Pr(T > 10) = 2^-10.
        let coin = iid(&[(1, 2), (1, 2)]);
        let target = iid(&[(2, 3), (1, 3)]);
        let q =
            BoundQuery::evaluate(&coin, &target, 10, 1, &pow2(-10), &pow2(-4)).unwrap();
        assert_eq!(q.p_s_c, Ratio::zero());
        assert_eq!(q.p_t_c, Ratio::zero());
        let bound = achievability_bound(&q);
        assert_eq!(bound, pow2(-5));
        assert!(bound >= pow2(-10));
    }

    #[test]
    fn achievability_equal_exponents_vacuous() {
        let q = BoundQuery::from_masses(
            2,
            2,
            pow2(-4),
            pow2(-4),
            ratio(1, 2),
            ratio(1, 2),
        )
        .unwrap();
        assert!(achievability_bound(&q) >= Ratio::from_integer(2.into()));
    }

    #[test]
    fn threshold_validation() {
        assert!(BoundQuery::from_masses(
            1,
            1,
            ratio(3, 2),
            ratio(1, 2),
            Ratio::zero(),
            Ratio::zero()
        )
        .is_err());
        assert!(BoundQuery::from_masses(
            1,
            1,
            ratio(1, 2),
            Ratio::zero(),
            Ratio::zero(),
            Ratio::zero()
        )
        .is_err());
        assert!(BoundQuery::from_masses(
            1,
            1,
            ratio(1, 2),
            ratio(1, 2),
            ratio(11, 10),
            Ratio::zero()
        )
        .is_err());
    }

    #[test]
    fn rates_one_point_pair() {
        // Two-state symmetric chain with flip probability 1/4 against an
        // iid(1/3, 2/3) target. Both spectra are single points, so all four
        // figures coincide at h(1/3)/h(1/4) = 1.1319124835...
        let coin = markov(&[&[(3, 4), (1, 4)], &[(1, 4), (3, 4)]], &[(1, 2), (1, 2)]);
        let target = iid(&[(1, 3), (2, 3)]);
        let cs = process_spectrum(&coin).unwrap();
        let ts = process_spectrum(&target).unwrap();
        let r = asymptotic_rates(&cs, &ts).unwrap();
        assert!(r.coin_one_point && r.target_one_point);
        let (rt, lt) = r.tight();
        assert!(rt && lt);
        let expected = 1.131_912_480_281_289_2_f64;
        for v in [&r.r_int_upper, &r.r_lower, &r.l_int_upper, &r.l_lower] {
            assert!((v.value_f64() - expected).abs() < 1e-9, "{}", v.value_f64());
            assert!(v.err_f64() < 1e-12);
        }
    }

    #[test]
    fn rates_reducible_target() {
        // Fair coin against a target whose classes have entropy rates 1 and
        // 0 with weights 1/2 each: spectrum sup 1, inf 0, avg 1/2. All the
        // entropies involved are exact, so the figures are exact too.
        let coin = iid(&[(1, 2), (1, 2)]);
        let target = markov(
            &[
                &[(1, 2), (1, 2), (0, 1)],
                &[(1, 2), (1, 2), (0, 1)],
                &[(0, 1), (0, 1), (1, 1)],
            ],
            &[(1, 4), (1, 4), (1, 2)],
        );
        let cs = process_spectrum(&coin).unwrap();
        let ts = process_spectrum(&target).unwrap();
        let r = asymptotic_rates(&cs, &ts).unwrap();
        assert!(r.coin_one_point);
        assert!(!r.target_one_point);
        assert_eq!(*r.r_int_upper.lo(), Ratio::one());
        assert_eq!(*r.r_int_upper.hi(), Ratio::one());
        assert_eq!(*r.r_lower.lo(), Ratio::one());
        assert_eq!(*r.l_int_upper.lo(), ratio(1, 2));
        assert_eq!(*r.l_lower.lo(), ratio(1, 2));
        assert_eq!(*r.l_lower.hi(), ratio(1, 2));
    }

    #[test]
    fn rates_identity() {
        let p = iid(&[(1, 2), (1, 2)]);
        let s = process_spectrum(&p).unwrap();
        let r = asymptotic_rates(&s, &s).unwrap();
        for v in [&r.r_int_upper, &r.r_lower, &r.l_int_upper, &r.l_lower] {
            assert_eq!(*v.lo(), Ratio::one());
            assert_eq!(*v.hi(), Ratio::one());
        }
    }

    #[test]
    fn rates_reject_zero_entropy_coin_class() {
        // Swap the reducible chain to the coin side: its spectrum reaches
        // down to zero, which the ratios cannot absorb.
        let coin = markov(
            &[
                &[(1, 2), (1, 2), (0, 1)],
                &[(1, 2), (1, 2), (0, 1)],
                &[(0, 1), (0, 1), (1, 1)],
            ],
            &[(1, 4), (1, 4), (1, 2)],
        );
        let target = iid(&[(1, 2), (1, 2)]);
        let cs = process_spectrum(&coin).unwrap();
        let ts = process_spectrum(&target).unwrap();
        assert!(matches!(
            asymptotic_rates(&cs, &ts),
            Err(Error::CoinSpectrumZero)
        ));
    }

    #[test]
    fn rates_ordering_invariants() {
        // r_lower <= r_int_upper and l_lower <= l_int_upper hold for any
        // pair of spectra, one-point or not.
        let chains = [
            markov(&[&[(3, 4), (1, 4)], &[(1, 4), (3, 4)]], &[(1, 2), (1, 2)]),
            markov(
                &[
                    &[(1, 2), (1, 2), (0, 1)],
                    &[(1, 2), (1, 2), (0, 1)],
                    &[(0, 1), (0, 1), (1, 1)],
                ],
                &[(1, 3), (1, 3), (1, 3)],
            ),
            iid(&[(1, 6), (1, 3), (1, 2)]),
            iid(&[(9, 10), (1, 10)]),
        ];
        for coin in &chains {
            for target in &chains {
                let cs = process_spectrum(coin).unwrap();
                if *cs.inf.lo() <= Ratio::zero() {
                    continue;
                }
                let ts = process_spectrum(target).unwrap();
                let r = asymptotic_rates(&cs, &ts).unwrap();
                assert!(r.r_lower.lo() <= r.r_int_upper.hi());
                assert!(r.l_lower.lo() <= r.l_int_upper.hi());
            }
        }
    }
}
