//! Signed fixed-point reals with a configurable number of fractional bits.
//!
//! A [`BigFixed`] stores `raw / 2^F` with `raw` an arbitrary-precision integer.
//! Construction from non-dyadic values rounds toward negative infinity and
//! records that it did so. Addition, subtraction and integer multiplication
//! are exact.
//!
//! [`FracCursor`] is the hot-path companion used by the counting sweeps: it
//! walks `q * s` for consecutive integers `q` with fixed-width limb addition,
//! and [`Threshold`] compares the fractional part against `psi(q)` with an
//! explicit guard band.

use std::cmp::Ordering;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub const DEFAULT_FRAC_BITS: u32 = 192;
pub const MAX_FRAC_BITS: u32 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BigFixed {
    raw: BigInt,
    frac_bits: u32,
    truncated: bool,
}

/// `m * 2^e` without intermediate overflow or underflow.
pub(crate) fn ldexp(m: f64, e: i64) -> f64 {
    let mut x = m;
    let mut e = e;
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// Decomposes a finite float into `mantissa * 2^exp` with an integer mantissa.
fn f64_parts(x: f64) -> (i64, i32) {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 0 { 1 } else { -1 };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 {
        (sign * frac as i64, -1074)
    } else {
        (sign * (frac | (1u64 << 52)) as i64, exp_bits - 1075)
    }
}

fn check_bits(frac_bits: u32) -> Result<()> {
    if frac_bits == 0 || frac_bits > MAX_FRAC_BITS {
        return Err(Error::Config(format!(
            "fractional precision must be in 1..={MAX_FRAC_BITS} bits, got {frac_bits}"
        )));
    }
    Ok(())
}

impl BigFixed {
    pub fn zero(frac_bits: u32) -> Self {
        Self { raw: BigInt::zero(), frac_bits, truncated: false }
    }

    pub fn from_int(value: impl Into<BigInt>, frac_bits: u32) -> Self {
        Self { raw: value.into() << frac_bits as usize, frac_bits, truncated: false }
    }

    /// Builds a value directly from its scaled integer representation.
    pub fn from_raw(raw: BigInt, frac_bits: u32) -> Self {
        Self { raw, frac_bits, truncated: false }
    }

    /// Exact when the float's binary expansion fits in `frac_bits`, floored otherwise.
    pub fn from_f64(x: f64, frac_bits: u32) -> Result<Self> {
        check_bits(frac_bits)?;
        if !x.is_finite() {
            return Err(Error::Numeric(format!("cannot represent {x} as a fixed-point value")));
        }
        let (m, e) = f64_parts(x);
        let shift = e as i64 + frac_bits as i64;
        let m = BigInt::from(m);
        if shift >= 0 {
            Ok(Self { raw: m << shift as usize, frac_bits, truncated: false })
        } else {
            let (q, r) = m.div_mod_floor(&(BigInt::one() << (-shift) as usize));
            Ok(Self { raw: q, frac_bits, truncated: !r.is_zero() })
        }
    }

    /// `floor(num / den * 2^F) / 2^F`.
    pub fn from_ratio(num: &BigInt, den: &BigInt, frac_bits: u32) -> Result<Self> {
        check_bits(frac_bits)?;
        if den.is_zero() {
            return Err(Error::Numeric("zero denominator".into()));
        }
        let (q, r) = (num << frac_bits as usize).div_mod_floor(den);
        Ok(Self { raw: q, frac_bits, truncated: !r.is_zero() })
    }

    /// The base-`base` expansion `0.d1 d2 d3 ...` truncated to `frac_bits`.
    pub fn from_digits(base: u32, digits: &[u32], frac_bits: u32) -> Result<Self> {
        if base < 2 {
            return Err(Error::Config(format!("digit base must be at least 2, got {base}")));
        }
        let b = BigInt::from(base);
        let mut num = BigInt::zero();
        for &d in digits {
            if d >= base {
                return Err(Error::Config(format!("digit {d} out of range for base {base}")));
            }
            num = num * &b + d;
        }
        let den = num_traits::pow(b, digits.len());
        Self::from_ratio(&num, &den, frac_bits)
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn raw(&self) -> &BigInt {
        &self.raw
    }

    /// True when some construction step discarded low-order bits.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn is_zero(&self) -> bool {
        self.raw.is_zero()
    }

    /// Re-expresses the value at another precision, flooring when bits are dropped.
    pub fn with_frac_bits(&self, frac_bits: u32) -> Result<Self> {
        check_bits(frac_bits)?;
        if frac_bits >= self.frac_bits {
            let raw = &self.raw << (frac_bits - self.frac_bits) as usize;
            return Ok(Self { raw, frac_bits, truncated: self.truncated });
        }
        let drop = (self.frac_bits - frac_bits) as usize;
        let (q, r) = self.raw.div_mod_floor(&(BigInt::one() << drop));
        Ok(Self { raw: q, frac_bits, truncated: self.truncated || !r.is_zero() })
    }

    fn aligned<'a>(&'a self, other: &'a Self) -> (std::borrow::Cow<'a, BigInt>, std::borrow::Cow<'a, BigInt>, u32) {
        use std::borrow::Cow;
        match self.frac_bits.cmp(&other.frac_bits) {
            Ordering::Equal => (Cow::Borrowed(&self.raw), Cow::Borrowed(&other.raw), self.frac_bits),
            Ordering::Less => (
                Cow::Owned(&self.raw << (other.frac_bits - self.frac_bits) as usize),
                Cow::Borrowed(&other.raw),
                other.frac_bits,
            ),
            Ordering::Greater => (
                Cow::Borrowed(&self.raw),
                Cow::Owned(&other.raw << (self.frac_bits - other.frac_bits) as usize),
                self.frac_bits,
            ),
        }
    }

    /// Exact sum at the finer of the two precisions.
    pub fn add(&self, other: &Self) -> Self {
        let (a, b, f) = self.aligned(other);
        Self { raw: a.as_ref() + b.as_ref(), frac_bits: f, truncated: self.truncated || other.truncated }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let (a, b, f) = self.aligned(other);
        Self { raw: a.as_ref() - b.as_ref(), frac_bits: f, truncated: self.truncated || other.truncated }
    }

    pub fn neg(&self) -> Self {
        Self { raw: -&self.raw, frac_bits: self.frac_bits, truncated: self.truncated }
    }

    pub fn mul_int(&self, k: &BigInt) -> Self {
        Self { raw: &self.raw * k, frac_bits: self.frac_bits, truncated: self.truncated }
    }

    /// Product floored to `self`'s precision.
    pub fn mul(&self, other: &Self) -> Self {
        let prod = &self.raw * &other.raw;
        let (q, r) = prod.div_mod_floor(&(BigInt::one() << other.frac_bits as usize));
        Self {
            raw: q,
            frac_bits: self.frac_bits,
            truncated: self.truncated || other.truncated || !r.is_zero(),
        }
    }

    /// Product with a float, floored to `self`'s precision.
    pub fn mul_f64(&self, x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::Numeric(format!("cannot multiply by {x}")));
        }
        let (m, e) = f64_parts(x);
        let prod = &self.raw * BigInt::from(m);
        if e >= 0 {
            Ok(Self { raw: prod << e as usize, frac_bits: self.frac_bits, truncated: self.truncated })
        } else {
            let (q, r) = prod.div_mod_floor(&(BigInt::one() << (-e) as usize));
            Ok(Self { raw: q, frac_bits: self.frac_bits, truncated: self.truncated || !r.is_zero() })
        }
    }

    pub fn floor(&self) -> BigInt {
        self.raw.div_floor(&(BigInt::one() << self.frac_bits as usize))
    }

    /// The fractional part in `[0, 1)`.
    pub fn fract(&self) -> Self {
        let (_, r) = self.raw.div_mod_floor(&(BigInt::one() << self.frac_bits as usize));
        Self { raw: r, frac_bits: self.frac_bits, truncated: self.truncated }
    }

    pub fn to_f64(&self) -> f64 {
        let bits = self.raw.bits();
        if bits <= 63 {
            let m = self.raw.to_i64().unwrap_or(0) as f64;
            return ldexp(m, -(self.frac_bits as i64));
        }
        let shift = bits - 63;
        let m = (&self.raw >> shift as usize).to_i64().unwrap_or(0) as f64;
        ldexp(m, shift as i64 - self.frac_bits as i64)
    }

    /// Top `limbs * 64` bits of the fractional part, most significant limb first.
    pub fn frac_limbs(&self, limbs: usize) -> Vec<u64> {
        let width = 64 * limbs as u32;
        let frac = self.fract().raw;
        let scaled = if width >= self.frac_bits {
            frac << (width - self.frac_bits) as usize
        } else {
            frac >> (self.frac_bits - width) as usize
        };
        let digits = scaled.to_u64_digits().1;
        let mut out = vec![0u64; limbs];
        for (i, d) in digits.iter().enumerate().take(limbs) {
            out[limbs - 1 - i] = *d;
        }
        out
    }

    /// Short hexadecimal fingerprint: integer part and the leading 64 fraction bits.
    pub fn digest(&self) -> String {
        let top = self.frac_limbs(1)[0];
        format!("{}.{top:016x}", self.floor())
    }

    pub fn sign(&self) -> Sign {
        self.raw.sign()
    }

    pub fn abs(&self) -> Self {
        Self { raw: self.raw.abs(), frac_bits: self.frac_bits, truncated: self.truncated }
    }
}

impl PartialOrd for BigFixed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BigFixed {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.as_ref().cmp(b.as_ref())
    }
}

/// Outcome of a guarded comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Yes,
    No,
    /// The two sides are closer than the guard band.
    Ambiguous,
}

impl std::ops::Not for Decision {
    type Output = Decision;

    fn not(self) -> Decision {
        match self {
            Decision::Yes => Decision::No,
            Decision::No => Decision::Yes,
            Decision::Ambiguous => Decision::Ambiguous,
        }
    }
}

impl Decision {
    pub fn and(self, other: Decision) -> Decision {
        match (self, other) {
            (Decision::No, _) | (_, Decision::No) => Decision::No,
            (Decision::Yes, Decision::Yes) => Decision::Yes,
            _ => Decision::Ambiguous,
        }
    }
}

/// A threshold in `(0, inf)` for comparisons against a fraction in `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Threshold {
    /// Exactly `1 / d`.
    Reciprocal(u64),
    /// A dyadic value in `(0, 1)` held as limbs, plus an absolute uncertainty
    /// on how well it represents the intended threshold.
    Dyadic { limbs: Vec<u64>, slack: f64 },
    /// A float value with an absolute uncertainty, compared in double
    /// precision with a widened tolerance.
    Float { value: f64, slack: f64 },
    /// Larger than one by more than any guard band.
    Always,
}

impl Threshold {
    /// Threshold equal to the float `x`; `slack` is the uncertainty of `x`
    /// itself (zero when `x` is the intended value).
    pub fn from_f64(x: f64, slack: f64, limbs: usize) -> Result<Self> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("threshold must be positive and finite, got {x}")));
        }
        if x == 1.0 && slack == 0.0 {
            return Ok(Threshold::Reciprocal(1));
        }
        if x > 1.0 + slack + 1e-9 {
            return Ok(Threshold::Always);
        }
        if x >= 1.0 {
            // Within the slack of one: compare against one with the slack kept.
            return Ok(Threshold::Dyadic { limbs: vec![u64::MAX; limbs], slack: slack + (x - 1.0) });
        }
        let fixed = BigFixed::from_f64(x, 64 * limbs as u32)?;
        Ok(Threshold::Dyadic { limbs: fixed.frac_limbs(limbs), slack })
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Threshold::Reciprocal(d) => 1.0 / *d as f64,
            Threshold::Dyadic { limbs, .. } => limbs_to_f64(limbs),
            Threshold::Float { value, .. } => *value,
            Threshold::Always => f64::INFINITY,
        }
    }
}

pub(crate) fn limbs_to_f64(limbs: &[u64]) -> f64 {
    match limbs.iter().position(|&l| l != 0) {
        None => 0.0,
        Some(i) => limbs[i..]
            .iter()
            .take(3)
            .enumerate()
            .map(|(j, &l)| ldexp(l as f64, -64 * (i + j + 1) as i64))
            .sum(),
    }
}

/// `a - b` for equal-length big-endian limb strings, as a float.
fn limbs_diff_f64(a: &[u64], b: &[u64]) -> f64 {
    let neg = a < b;
    let (hi, lo) = if neg { (b, a) } else { (a, b) };
    let mut out = vec![0u64; a.len()];
    let mut borrow = 0u64;
    for i in (0..a.len()).rev() {
        let (d1, b1) = hi[i].overflowing_sub(lo[i]);
        let (d2, b2) = d1.overflowing_sub(borrow);
        out[i] = d2;
        borrow = (b1 | b2) as u64;
    }
    let v = limbs_to_f64(&out);
    if neg {
        -v
    } else {
        v
    }
}

/// Absolute guard band applied to a comparison at multiplier `q`:
/// `2^(8-F) + q * 2^-F`, the sensitivity of `frac(q*s)` to the truncation of `s`.
pub fn guard_band(frac_bits: u32, q: u64) -> f64 {
    ldexp(256.0 + q as f64, -(frac_bits as i64))
}

/// Decides `frac < threshold` where `frac` is a big-endian limb fraction.
pub fn frac_below(frac: &[u64], threshold: &Threshold, guard: f64) -> Decision {
    match threshold {
        Threshold::Always => Decision::Yes,
        Threshold::Reciprocal(d) => reciprocal_below(frac, *d, guard),
        Threshold::Float { value, slack } => {
            let f = limbs_to_f64(frac);
            let tol = guard + slack + 2.0 * f64::EPSILON * value.abs().max(f);
            let diff = f - value;
            if tol > 0.0 && diff.abs() <= tol {
                Decision::Ambiguous
            } else if diff < 0.0 {
                Decision::Yes
            } else {
                Decision::No
            }
        }
        Threshold::Dyadic { limbs, slack } => {
            let top_f = frac[0];
            let top_t = limbs[0];
            let tol = guard + slack;
            if tol < ldexp(1.0, -62) {
                if top_f < top_t.saturating_sub(1) {
                    return Decision::Yes;
                }
                if top_f > top_t.saturating_add(1) {
                    return Decision::No;
                }
            }
            let diff = limbs_diff_f64(frac, limbs);
            if tol > 0.0 && diff.abs() <= tol {
                Decision::Ambiguous
            } else if diff < 0.0 {
                Decision::Yes
            } else {
                Decision::No
            }
        }
    }
}

/// `2^(64 n) - x` for a nonzero limb string `x` of length `n`.
pub(crate) fn twos_complement(x: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = x.iter().map(|&l| !l).collect();
    for l in out.iter_mut().rev() {
        let (v, c) = l.overflowing_add(1);
        *l = v;
        if !c {
            break;
        }
    }
    out
}

fn reciprocal_below(frac: &[u64], d: u64, guard: f64) -> Decision {
    debug_assert!(d > 0);
    let top = frac[0] as u128;
    let d128 = d as u128;
    // Cheap rejection/acceptance from the leading limb when the guard is tiny.
    if guard * (d as f64) < ldexp(1.0, -63) {
        if top * d128 >= (1u128 << 64) + d128 {
            return Decision::No;
        }
        if (top + 1) * d128 + d128 <= 1u128 << 64 {
            return Decision::Yes;
        }
    }
    // Full product frac * d = carry + rest.
    let mut rest = vec![0u64; frac.len()];
    let mut carry: u128 = 0;
    for i in (0..frac.len()).rev() {
        let p = frac[i] as u128 * d128 + carry;
        rest[i] = p as u64;
        carry = p >> 64;
    }
    // distance of frac * d from 1
    let dist = match carry {
        0 if rest.iter().all(|&l| l == 0) => 1.0,
        0 => limbs_to_f64(&twos_complement(&rest)),
        1 => limbs_to_f64(&rest),
        _ => f64::INFINITY,
    };
    if guard > 0.0 && dist / (d as f64) <= guard {
        Decision::Ambiguous
    } else if carry == 0 {
        Decision::Yes
    } else {
        Decision::No
    }
}

/// Iterates `q * s` over consecutive integers `q` with exact limb addition.
#[derive(Clone, Debug)]
pub struct FracCursor {
    step_int: i128,
    step_frac: Vec<u64>,
    int: i128,
    frac: Vec<u64>,
    frac_bits: u32,
}

impl FracCursor {
    /// Cursor positioned at `start * s`.
    pub fn new(s: &BigFixed, start: i128) -> Result<Self> {
        let limbs = s.frac_bits().div_ceil(64) as usize;
        let step_int = s
            .floor()
            .to_i128()
            .ok_or_else(|| Error::Numeric("integer part of s does not fit in 128 bits".into()))?;
        let pos = s.mul_int(&BigInt::from(start));
        let int = pos
            .floor()
            .to_i128()
            .ok_or_else(|| Error::Numeric("q * s does not fit in 128 bits".into()))?;
        Ok(Self {
            step_int,
            step_frac: s.frac_limbs(limbs),
            int,
            frac: pos.frac_limbs(limbs),
            frac_bits: s.frac_bits(),
        })
    }

    #[inline]
    pub fn advance(&mut self) {
        let mut carry = 0u64;
        for i in (0..self.frac.len()).rev() {
            let (s1, c1) = self.frac[i].overflowing_add(self.step_frac[i]);
            let (s2, c2) = s1.overflowing_add(carry);
            self.frac[i] = s2;
            carry = (c1 | c2) as u64;
        }
        self.int += self.step_int + carry as i128;
    }

    /// `floor(q * s)`.
    #[inline]
    pub fn floor(&self) -> i128 {
        self.int
    }

    /// Fractional part of `q * s`, most significant limb first.
    #[inline]
    pub fn frac(&self) -> &[u64] {
        &self.frac
    }

    #[inline]
    pub fn frac_is_zero(&self) -> bool {
        self.frac.iter().all(|&l| l == 0)
    }

    /// `1 - frac`, valid when the fraction is nonzero.
    pub fn complement(&self) -> Vec<u64> {
        twos_complement(&self.frac)
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn limbs(&self) -> usize {
        self.frac.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ternary_digits_are_exact_rationals() {
        let x = BigFixed::from_digits(3, &[2, 0, 2], 192).unwrap();
        let expect = BigFixed::from_ratio(&BigInt::from(20), &BigInt::from(27), 192).unwrap();
        assert_eq!(x, expect);
        assert!((x.to_f64() - 20.0 / 27.0).abs() < 1e-16);
        assert!(x.is_truncated());
    }

    #[test]
    fn dyadic_floats_round_trip() {
        for v in [0.5, -0.75, 3.0, 1e-30, 123456.0625] {
            let x = BigFixed::from_f64(v, 192).unwrap();
            assert!(!x.is_truncated());
            assert_eq!(x.to_f64(), v);
        }
        assert!(BigFixed::from_f64(f64::NAN, 192).is_err());
    }

    #[test]
    fn floor_and_fract_of_negative_values() {
        let x = BigFixed::from_f64(-2.25, 64).unwrap();
        assert_eq!(x.floor(), BigInt::from(-3));
        assert_eq!(x.fract().to_f64(), 0.75);
    }

    #[test]
    fn huge_and_tiny_magnitudes_convert() {
        let big = BigFixed::from_int(BigInt::one() << 900usize, 64);
        assert_eq!(big.to_f64(), 2f64.powi(900));
        let tiny = BigFixed::from_raw(BigInt::one(), 1000);
        assert_eq!(tiny.to_f64(), ldexp(1.0, -1000));
    }

    #[test]
    fn cursor_tracks_multiples() {
        let s = BigFixed::from_ratio(&BigInt::from(1), &BigInt::from(3), 192).unwrap();
        let mut c = FracCursor::new(&s, 1).unwrap();
        for q in 1..=10i128 {
            let direct = s.mul_int(&BigInt::from(q));
            assert_eq!(c.floor(), direct.floor().to_i128().unwrap());
            assert_eq!(c.frac(), direct.frac_limbs(3).as_slice());
            c.advance();
        }
    }

    #[test]
    fn reciprocal_threshold_is_exact() {
        // frac = 1/3 exactly representable? no; use 1/4 vs 1/4
        let quarter = BigFixed::from_f64(0.25, 192).unwrap().frac_limbs(3);
        let g = guard_band(192, 4);
        assert_eq!(frac_below(&quarter, &Threshold::Reciprocal(4), g), Decision::Ambiguous);
        assert_eq!(frac_below(&quarter, &Threshold::Reciprocal(3), g), Decision::Yes);
        assert_eq!(frac_below(&quarter, &Threshold::Reciprocal(5), g), Decision::No);
        assert_eq!(frac_below(&[0, 0, 0], &Threshold::Reciprocal(1), g), Decision::Yes);
        assert_eq!(frac_below(&quarter, &Threshold::Always, g), Decision::Yes);
    }

    #[test]
    fn ambiguity_shrinks_with_precision() {
        // frac just above 1/8 by 2^-150
        let eighth = BigFixed::from_f64(0.125, 256).unwrap();
        let x = eighth.add(&BigFixed::from_raw(BigInt::one(), 150).with_frac_bits(256).unwrap());
        let thr = Threshold::Reciprocal(8);
        let lo = x.with_frac_bits(192).unwrap().frac_limbs(3);
        assert_eq!(frac_below(&lo, &thr, guard_band(192, 8)), Decision::No);
        let coarse = x.with_frac_bits(128).unwrap().frac_limbs(2);
        assert_eq!(frac_below(&coarse, &thr, guard_band(128, 8)), Decision::Ambiguous);
    }

    #[test]
    fn float_threshold_flags_near_ties() {
        let quarter = BigFixed::from_f64(0.25, 192).unwrap().frac_limbs(3);
        let g = guard_band(192, 1);
        let near = Threshold::Float { value: 0.25, slack: 1e-18 };
        assert_eq!(frac_below(&quarter, &near, g), Decision::Ambiguous);
        let above = Threshold::Float { value: 0.3, slack: 1e-18 };
        assert_eq!(frac_below(&quarter, &above, g), Decision::Yes);
        let below = Threshold::Float { value: 0.2, slack: 1e-18 };
        assert_eq!(frac_below(&quarter, &below, g), Decision::No);
    }

    proptest! {
        #[test]
        fn reciprocal_and_dyadic_agree(num in 0u64..1_000_000, d in 1u64..1000) {
            let frac = BigFixed::from_ratio(&BigInt::from(num), &BigInt::from(1_000_003u64), 192).unwrap();
            let limbs = frac.frac_limbs(3);
            let g = guard_band(192, 1);
            let a = frac_below(&limbs, &Threshold::Reciprocal(d), g);
            let b = frac_below(&limbs, &Threshold::from_f64(1.0 / d as f64, 1e-17, 3).unwrap(), g);
            let truth = (num as u128) * (d as u128) < 1_000_003u128;
            prop_assert_eq!(a, if truth { Decision::Yes } else { Decision::No });
            if b != Decision::Ambiguous {
                prop_assert_eq!(b, a);
            }
        }

        #[test]
        fn addition_is_exact(a in -1e12f64..1e12, b in -1e12f64..1e12) {
            let x = BigFixed::from_f64(a, 128).unwrap();
            let y = BigFixed::from_f64(b, 128).unwrap();
            prop_assert_eq!(x.add(&y).sub(&y), x);
        }
    }
}
