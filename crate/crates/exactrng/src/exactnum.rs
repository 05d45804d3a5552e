//! Exact arithmetic primitives: arbitrary-precision rationals, half-open
//! subintervals of [0, 1), and values of the form 2^(-e) with rational
//! exponent e.
//!
//! Probabilities stay rational end to end. Logarithms are irrational in
//! general, so log-valued quantities are returned as certified enclosures:
//! a pair of rationals guaranteed to bracket the true value. Comparisons
//! between 2^(-e) and a rational are decided exactly, either through the
//! power-of-two structure of the operands or by tightening a certified
//! log2 enclosure until the order is resolved. log2 of a rational is an
//! integer or irrational, never a non-integer rational, which is what makes
//! the escalation terminate.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Exact rational number. Signed values are permitted; probability-valued
/// uses are range-checked where they are constructed.
pub type Ratio = BigRational;

/// Convenience constructor for small rationals. Panics on zero denominator.
pub fn ratio(num: i64, den: i64) -> Ratio {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses "num/den" or a bare integer, in decimal. The denominator must be
/// positive.
pub fn parse_ratio(s: &str) -> Result<Ratio> {
    let trimmed = s.trim();
    let (nstr, dstr) = match trimmed.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (trimmed, "1"),
    };
    let num: BigInt = nstr
        .parse()
        .map_err(|_| Error::Parse(format!("invalid rational {trimmed:?}")))?;
    let den: BigInt = dstr
        .parse()
        .map_err(|_| Error::Parse(format!("invalid rational {trimmed:?}")))?;
    if den <= BigInt::zero() {
        return Err(Error::Parse(format!(
            "denominator must be positive in {trimmed:?}"
        )));
    }
    Ok(BigRational::new(num, den))
}

/// Renders a rational as "num/den", omitting the denominator when it is 1.
pub fn format_ratio(r: &Ratio) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Rounds a rational to f64. Works for operands far outside the f64 range by
/// normalizing both sides before dividing; extreme magnitudes saturate to
/// 0 or infinity rather than producing NaN.
pub fn ratio_f64(r: &Ratio) -> f64 {
    if r.numer().is_zero() {
        return 0.0;
    }
    let a = r.numer().magnitude();
    let b = r.denom().magnitude();
    let la = a.bits() as i64;
    let lb = b.bits() as i64;
    let sa = (la - 63).max(0) as u64;
    let sb = (lb - 63).max(0) as u64;
    let at = (a >> sa).to_f64().unwrap_or(f64::INFINITY);
    let bt = (b >> sb).to_f64().unwrap_or(f64::INFINITY);
    let shift = sa as i64 - sb as i64;
    let v = if shift.abs() > 2000 {
        if shift > 0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        at / bt * 2f64.powi(shift as i32)
    };
    if r.numer().is_negative() {
        -v
    } else {
        v
    }
}

/// 2^k as an exact rational, for any sign of k.
pub fn pow2(k: i64) -> Ratio {
    if k >= 0 {
        Ratio::from(BigInt::one() << k as u64)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-k) as u64)
    }
}

/// Converts an f64 to the exact rational it denotes. Non-finite input is a
/// caller bug.
pub fn ratio_from_f64(x: f64) -> Ratio {
    BigRational::from_f64(x).expect("finite float expected")
}

fn in_unit_range(r: &Ratio) -> bool {
    !r.is_negative() && *r <= Ratio::one()
}

/// Half-open subinterval [lo, hi) of the unit interval. Empty iff lo = hi.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitInterval {
    lo: Ratio,
    hi: Ratio,
}

impl UnitInterval {
    pub fn new(lo: Ratio, hi: Ratio) -> Result<Self> {
        if lo.is_negative() || lo > hi || hi > Ratio::one() {
            return Err(Error::InvalidModel(format!(
                "invalid interval [{}, {})",
                format_ratio(&lo),
                format_ratio(&hi)
            )));
        }
        Ok(UnitInterval { lo, hi })
    }

    pub fn full() -> Self {
        UnitInterval {
            lo: Ratio::zero(),
            hi: Ratio::one(),
        }
    }

    pub fn lo(&self) -> &Ratio {
        &self.lo
    }

    pub fn hi(&self) -> &Ratio {
        &self.hi
    }

    pub fn length(&self) -> Ratio {
        &self.hi - &self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }

    /// Half-open containment: every point of `inner` lies in `self`. An empty
    /// inner interval [p, p) counts as contained whenever lo <= p <= hi.
    pub fn contains_interval(&self, inner: &UnitInterval) -> bool {
        self.lo <= inner.lo && inner.hi <= self.hi
    }

    pub fn intersects(&self, other: &UnitInterval) -> bool {
        let lo = (&self.lo).max(&other.lo);
        let hi = (&self.hi).min(&other.hi);
        lo < hi
    }

    /// Splits the interval into one child per pmf entry, each child's length
    /// being the parent length times the entry. Children are contiguous and
    /// sum exactly to the parent; zero entries give empty children.
    pub fn partition(&self, pmf: &[Ratio]) -> Vec<UnitInterval> {
        debug_assert!(pmf.iter().all(|p| !p.is_negative()));
        debug_assert!(pmf.iter().sum::<Ratio>().is_one());
        let len = self.length();
        let mut children = Vec::with_capacity(pmf.len());
        let mut cum = Ratio::zero();
        let mut lo = self.lo.clone();
        for (k, p) in pmf.iter().enumerate() {
            cum += p;
            let hi = if k + 1 == pmf.len() {
                self.hi.clone()
            } else {
                &self.lo + &len * &cum
            };
            children.push(UnitInterval {
                lo: std::mem::replace(&mut lo, hi.clone()),
                hi,
            });
        }
        children
    }
}

impl fmt::Display for UnitInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", format_ratio(&self.lo), format_ratio(&self.hi))
    }
}

/// Value 2^(-exponent) for a rational exponent >= 0, so the value is in
/// (0, 1]. Used for step probabilities of the named Bernoulli families and
/// for threshold bookkeeping that must stay exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicExp {
    exponent: Ratio,
}

impl DyadicExp {
    pub fn new(exponent: Ratio) -> Result<Self> {
        if exponent.is_negative() {
            return Err(Error::InvalidModel(
                "dyadic exponent must be nonnegative".into(),
            ));
        }
        Ok(DyadicExp { exponent })
    }

    pub fn exponent(&self) -> &Ratio {
        &self.exponent
    }

    pub fn is_one(&self) -> bool {
        self.exponent.is_zero()
    }

    /// Product of the two represented values (exponents add).
    pub fn mul(&self, other: &DyadicExp) -> DyadicExp {
        DyadicExp {
            exponent: &self.exponent + &other.exponent,
        }
    }

    /// Certified rational enclosure of the value, width <= 2^(-bits).
    pub fn value_bounds(&self, bits: u32) -> Result<(Ratio, Ratio)> {
        exp2_neg_bounds(&self.exponent, bits)
    }

    pub fn value_f64(&self) -> f64 {
        2f64.powf(-ratio_f64(&self.exponent))
    }
}

impl fmt::Display for DyadicExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "2^-({})", format_ratio(&self.exponent))
    }
}

/// Compares a/b against 2^j without constructing 2^j as a rational.
fn cmp_vs_pow2(a: &BigUint, b: &BigUint, j: i64) -> Ordering {
    if j >= 0 {
        a.cmp(&(b << j as u64))
    } else {
        (a << (-j) as u64).cmp(b)
    }
}

/// If x = 2^j for an integer j, returns j.
pub fn as_pow2(x: &Ratio) -> Option<i64> {
    if x.numer().is_one() {
        let d = x.denom().magnitude();
        if d.count_ones() == 1 {
            return Some(-((d.bits() - 1) as i64));
        }
    } else if x.denom().is_one() && !x.numer().is_negative() {
        let n = x.numer().magnitude();
        if n.count_ones() == 1 {
            return Some((n.bits() - 1) as i64);
        }
    }
    None
}

/// Certified log2 enclosure for a positive rational: returns (lo, hi) with
/// lo <= log2(x) <= hi and hi - lo <= 2^(-bits). Exact when x is a power of
/// two.
///
/// The fractional bits come from the classic squaring recurrence, run in
/// fixed-point integer arithmetic so operand sizes stay linear in the
/// precision. When rounding blurs a bit decision the whole extraction
/// restarts with twice the fixed-point precision; since log2 of a rational
/// that is not a power of two is irrational, every restart makes progress
/// and the loop terminates.
pub fn log2_bounds(x: &Ratio, bits: u32) -> (Ratio, Ratio) {
    assert!(x.is_positive(), "log2 requires a positive argument");
    let a = x.numer().magnitude().clone();
    let b = x.denom().magnitude().clone();
    let mut j = a.bits() as i64 - b.bits() as i64;
    while cmp_vs_pow2(&a, &b, j) == Ordering::Less {
        j -= 1;
    }
    while cmp_vs_pow2(&a, &b, j + 1) != Ordering::Less {
        j += 1;
    }
    if cmp_vs_pow2(&a, &b, j) == Ordering::Equal {
        let exact = Ratio::from(BigInt::from(j));
        return (exact.clone(), exact);
    }
    let mut f = 2 * bits as u64 + 32;
    loop {
        if let Some(res) = log2_frac_fixed(&a, &b, j, bits, f) {
            return res;
        }
        f *= 2;
        assert!(f <= 1 << 26, "log2 enclosure failed to converge");
    }
}

/// One fixed-point attempt at `bits` fractional bits of log2(a/(b 2^j)) with
/// y = a/(b 2^j) in (1, 2). Returns None when a bit decision straddles.
fn log2_frac_fixed(a: &BigUint, b: &BigUint, j: i64, bits: u32, f: u64) -> Option<(Ratio, Ratio)> {
    let (num, den) = if j >= 0 {
        (a << f, b << j as u64)
    } else {
        (a << (f + (-j) as u64), b.clone())
    };
    let mut ylo = &num / &den;
    let mut yhi = &ylo + 1u32;
    let two = BigUint::one() << (f + 1);
    let mut frac = BigUint::zero();
    for _ in 0..bits {
        ylo = (&ylo * &ylo) >> f;
        yhi = ((&yhi * &yhi) >> f) + 1u32;
        frac <<= 1;
        if yhi < two {
            // bit 0, interval already back in [1, 2)
        } else if ylo >= two {
            frac |= BigUint::one();
            ylo >>= 1;
            yhi = (yhi + 1u32) >> 1;
        } else {
            return None;
        }
    }
    let scale = BigInt::one() << bits;
    let lo_num = BigInt::from(j) * &scale + BigInt::from(frac);
    let lo = BigRational::new(lo_num, scale.clone());
    let hi = &lo + BigRational::new(BigInt::one(), scale);
    Some((lo, hi))
}

/// Certified enclosure of 2^(-e) for rational e >= 0, width <= 2^(-bits).
/// Exact for integer e. The fractional part uses an integer nth root, so the
/// exponent's denominator must stay moderate.
pub fn exp2_neg_bounds(e: &Ratio, bits: u32) -> Result<(Ratio, Ratio)> {
    assert!(!e.is_negative(), "exponent must be nonnegative");
    if e.is_zero() {
        return Ok((Ratio::one(), Ratio::one()));
    }
    let j_big = e.numer() / e.denom();
    let j = j_big
        .to_u64()
        .filter(|&j| j <= 1 << 22)
        .ok_or_else(|| Error::NumericRange("dyadic exponent too large".into()))?;
    let frac = e - Ratio::from(j_big);
    if frac.is_zero() {
        let v = pow2(-(j as i64));
        return Ok((v.clone(), v));
    }
    let d = frac
        .denom()
        .to_u64()
        .filter(|&d| d <= 1 << 16)
        .ok_or_else(|| Error::NumericRange("dyadic exponent denominator too large".into()))?;
    let p = frac.numer().to_u64().expect("reduced fraction fits");
    // 2^(-frac) = 2^((d-p)/d) / 2, with the root taken in fixed point.
    let q = d - p;
    let f = bits as u64 + 2;
    let root = (BigUint::one() << (q + f * d)).nth_root(d as u32);
    let shift = f + 1 + j;
    let lo = BigRational::new(BigInt::from(root.clone()), BigInt::one() << shift);
    let hi = BigRational::new(BigInt::from(root + 1u32), BigInt::one() << shift);
    Ok((lo, hi))
}

/// Exact three-way comparison of a rational against 2^(-e).
pub fn cmp_ratio_dyadic(q: &Ratio, v: &DyadicExp) -> Ordering {
    let e = &v.exponent;
    if !q.is_positive() {
        return Ordering::Less;
    }
    if e.is_zero() {
        return q.cmp(&Ratio::one());
    }
    if *q >= Ratio::one() {
        // value is 2^(-e) < 1 here
        return Ordering::Greater;
    }
    if let Some(s) = as_pow2(q) {
        // q = 2^s with s < 0; compare -s against e exactly.
        return Ratio::from(BigInt::from(-s)).cmp(e).reverse();
    }
    if e.denom().is_one() {
        // Integer exponent: q vs 2^(-p) is an integer comparison.
        let a = q.numer().magnitude();
        let b = q.denom().magnitude();
        return match e.numer().magnitude().to_u64() {
            Some(p) if p <= b.bits() + 1 => cmp_vs_pow2(a, b, -(p as i64)),
            // 2^(-p) is far below every representable q > 0
            _ => Ordering::Greater,
        };
    }
    // General case: compare e against c = log2(1/q), which is irrational
    // because 1/q is not a power of two, so the enclosure eventually
    // separates them. q < 2^(-e) iff e < c.
    let inv = q.recip();
    let mut bits = 64u32;
    loop {
        let (lo, hi) = log2_bounds(&inv, bits);
        if *e < lo {
            return Ordering::Less;
        }
        if *e > hi {
            return Ordering::Greater;
        }
        bits *= 2;
        assert!(bits <= 1 << 24, "comparison failed to converge");
    }
}

/// Exact truth value of 2^(-v.exponent) <= q.
pub fn dyadic_leq_ratio(v: &DyadicExp, q: &Ratio) -> bool {
    cmp_ratio_dyadic(q, v) != Ordering::Less
}

/// A real number known only through a rational enclosure lo <= x <= hi.
/// Arithmetic is outward-safe: results always enclose the true value.
#[derive(Clone, Debug, PartialEq)]
pub struct CertReal {
    lo: Ratio,
    hi: Ratio,
}

impl CertReal {
    pub fn exact(r: Ratio) -> Self {
        CertReal {
            lo: r.clone(),
            hi: r,
        }
    }

    pub fn from_bounds(lo: Ratio, hi: Ratio) -> Self {
        assert!(lo <= hi);
        CertReal { lo, hi }
    }

    pub fn zero() -> Self {
        CertReal::exact(Ratio::zero())
    }

    pub fn lo(&self) -> &Ratio {
        &self.lo
    }

    pub fn hi(&self) -> &Ratio {
        &self.hi
    }

    pub fn add(&self, other: &CertReal) -> CertReal {
        CertReal {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn sub(&self, other: &CertReal) -> CertReal {
        CertReal {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
        }
    }

    /// Scales by an exact nonnegative rational.
    pub fn mul_nonneg(&self, c: &Ratio) -> CertReal {
        assert!(!c.is_negative());
        CertReal {
            lo: &self.lo * c,
            hi: &self.hi * c,
        }
    }

    /// Interval division for nonnegative numerators and strictly positive
    /// denominators.
    pub fn div(&self, other: &CertReal) -> Result<CertReal> {
        if !other.lo.is_positive() {
            return Err(Error::NumericRange(
                "division by an enclosure touching zero".into(),
            ));
        }
        assert!(!self.lo.is_negative());
        Ok(CertReal {
            lo: &self.lo / &other.hi,
            hi: &self.hi / &other.lo,
        })
    }

    /// Enclosure of max(self, other).
    pub fn max_with(&self, other: &CertReal) -> CertReal {
        CertReal {
            lo: (&self.lo).max(&other.lo).clone(),
            hi: (&self.hi).max(&other.hi).clone(),
        }
    }

    /// Enclosure of min(self, other).
    pub fn min_with(&self, other: &CertReal) -> CertReal {
        CertReal {
            lo: (&self.lo).min(&other.lo).clone(),
            hi: (&self.hi).min(&other.hi).clone(),
        }
    }

    pub fn overlaps(&self, other: &CertReal) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn width(&self) -> Ratio {
        &self.hi - &self.lo
    }

    pub fn value_f64(&self) -> f64 {
        ratio_f64(&(&(&self.lo + &self.hi) / ratio(2, 1)))
    }

    /// Conservative f64 error radius: enclosure half-width plus conversion
    /// slack.
    pub fn err_f64(&self) -> f64 {
        ratio_f64(&self.width()) * 0.500001 + self.value_f64().abs() * 1e-15 + 1e-300
    }
}

impl serde::Serialize for CertReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("CertReal", 2)?;
        st.serialize_field("value", &self.value_f64())?;
        st.serialize_field("err", &self.err_f64())?;
        st.end()
    }
}

/// Certified enclosure of log2(x), x > 0.
pub fn log2_cert(x: &Ratio, bits: u32) -> CertReal {
    let (lo, hi) = log2_bounds(x, bits);
    CertReal { lo, hi }
}

/// Certified enclosure of log2(1/x) for x in (0, 1]; always nonnegative.
pub fn neg_log2_cert(x: &Ratio, bits: u32) -> CertReal {
    assert!(x.is_positive() && *x <= Ratio::one());
    log2_cert(&x.recip(), bits)
}

/// Validates that a slice of rationals is a probability vector: entries in
/// [0, 1] summing exactly to 1.
pub fn check_pmf(pmf: &[Ratio], what: &str) -> Result<()> {
    if pmf.is_empty() {
        return Err(Error::InvalidModel(format!("{what}: empty")));
    }
    for p in pmf {
        if !in_unit_range(p) {
            return Err(Error::InvalidModel(format!(
                "{what}: entry {} outside [0, 1]",
                format_ratio(p)
            )));
        }
    }
    let total: Ratio = pmf.iter().sum();
    if !total.is_one() {
        return Err(Error::InvalidModel(format!(
            "{what}: entries sum to {}, expected 1",
            format_ratio(&total)
        )));
    }
    Ok(())
}

pub mod serde_ratio {
    use super::{format_ratio, parse_ratio, Ratio};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Ratio, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_ratio(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio, D::Error> {
        let s = String::deserialize(d)?;
        parse_ratio(&s).map_err(serde::de::Error::custom)
    }
}

pub mod serde_ratio_opt {
    use super::{format_ratio, parse_ratio, Ratio};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Ratio>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&format_ratio(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Ratio>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| parse_ratio(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub mod serde_ratio_vec {
    use super::{format_ratio, parse_ratio, Ratio};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Ratio], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_ratio))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Ratio>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| parse_ratio(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

pub mod serde_ratio_mat {
    use super::{format_ratio, parse_ratio, Ratio};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<Ratio>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(
            m.iter()
                .map(|row| row.iter().map(format_ratio).collect::<Vec<_>>()),
        )
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Ratio>>, D::Error> {
        let raw = Vec::<Vec<String>>::deserialize(d)?;
        raw.iter()
            .map(|row| {
                row.iter()
                    .map(|s| parse_ratio(s).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}
