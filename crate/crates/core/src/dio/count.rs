//! Exact counting of primitive solutions of `0 <= q s - p < psi(q)` and of
//! the block counts `S_k`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::psi::{eval_psi, ApproxFn, Extension, KahanSum};
use crate::bigfixed::{frac_below, guard_band, ldexp, twos_complement, BigFixed, Decision, FracCursor, Threshold};
use crate::error::{Error, Result};
use crate::homsp::{snap_to_integer, zeta2_inv, CountInterval, Rect, TranslatePoint, DEFAULT_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `0 <= q s - p < psi(q)`
    Plus,
    /// `-psi(q) < q s - p <= 0`
    Minus,
}

/// Which approximation function the counts and sums use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `psi` as given.
    Raw,
    /// `min(psi(q), 1/q)`.
    Capped,
}

/// The real number `s`, either fixed-point or an exact rational.
#[derive(Clone, Debug, PartialEq)]
pub enum Real {
    Fixed(BigFixed),
    Ratio { num: i128, den: u64 },
}

impl Real {
    pub fn ratio(num: i128, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Domain("zero denominator".into()));
        }
        Ok(Real::Ratio { num, den })
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Fixed(x) => x.to_f64(),
            Real::Ratio { num, den } => *num as f64 / *den as f64,
        }
    }

    pub fn digest(&self) -> String {
        match self {
            Real::Fixed(x) => x.digest(),
            Real::Ratio { num, den } => format!("{num}/{den}"),
        }
    }
}

impl From<BigFixed> for Real {
    fn from(x: BigFixed) -> Self {
        Real::Fixed(x)
    }
}

/// One counted pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub p: i128,
    pub q: u64,
    /// False when the pair sits inside the guard band and is counted only in
    /// the upper end of the interval.
    pub certain: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountResult {
    pub n: u64,
    pub side: Side,
    pub count: CountInterval,
    /// Counted pairs with `q` in `(2^(k-1), 2^k]`, indexed by `k`.
    pub blocks: Vec<CountInterval>,
    pub sum_psi: f64,
    pub ratio: f64,
    pub ratio_hi: f64,
    pub hits: Vec<Hit>,
}

impl CountResult {
    /// Count restricted to `q <= n`.
    pub fn count_up_to(&self, n: u64) -> CountInterval {
        let mut out = CountInterval::default();
        for h in self.hits.iter().filter(|h| h.q <= n) {
            out.record(if h.certain { Decision::Yes } else { Decision::Ambiguous });
        }
        out
    }

    /// Solutions with `n1 < q <= n2`.
    pub fn gain_between(&self, n1: u64, n2: u64) -> CountInterval {
        let mut out = CountInterval::default();
        for h in self.hits.iter().filter(|h| h.q > n1 && h.q <= n2) {
            out.record(if h.certain { Decision::Yes } else { Decision::Ambiguous });
        }
        out
    }
}

/// Candidate `(p, decision)` pairs at one multiple `q s`.
type Candidates = [(i128, Decision); 2];

const NONE: (i128, Decision) = (0, Decision::No);

trait MultipleCursor {
    fn advance(&mut self);
    fn candidates(&self, side: Side, thr: &Threshold, q: u64) -> Candidates;
}

/// `x < thr` for a float `x` known to within `tol`.
fn float_below(x: f64, thr: &Threshold, tol: f64) -> Decision {
    let (value, slack) = match thr {
        Threshold::Always => return Decision::Yes,
        Threshold::Reciprocal(d) => (1.0 / *d as f64, 0.0),
        Threshold::Float { value, slack } => (*value, *slack),
        Threshold::Dyadic { slack, .. } => (thr.to_f64(), *slack),
    };
    let tol = tol + slack + 2.0 * f64::EPSILON * value.abs().max(x.abs());
    if (x - value).abs() <= tol {
        Decision::Ambiguous
    } else if x < value {
        Decision::Yes
    } else {
        Decision::No
    }
}

struct FixedCursor {
    inner: FracCursor,
    truncated: bool,
    bits: u32,
}

impl MultipleCursor for FixedCursor {
    fn advance(&mut self) {
        self.inner.advance();
    }

    fn candidates(&self, side: Side, thr: &Threshold, q: u64) -> Candidates {
        let frac = self.inner.frac();
        let floor = self.inner.floor();
        let guard = if self.truncated { guard_band(self.bits, q) } else { 0.0 };
        let near_one = frac[0] == u64::MAX;
        let zero = self.inner.frac_is_zero();
        let small = frac[0] == 0;
        match side {
            Side::Plus => {
                let first = (floor, frac_below(frac, thr, guard));
                // q s may have been truncated below an integer
                let wrap = if guard > 0.0 && near_one {
                    let gap = crate::bigfixed::limbs_to_f64(&twos_complement(frac));
                    (floor + 1, if gap <= guard { Decision::Ambiguous } else { Decision::No })
                } else {
                    NONE
                };
                [first, wrap]
            }
            Side::Minus => {
                if zero {
                    let at = (floor, if guard > 0.0 { Decision::Ambiguous } else { Decision::Yes });
                    return [at, (floor + 1, float_below(1.0, thr, guard))];
                }
                let exact_side = if guard > 0.0 && small {
                    let f = crate::bigfixed::limbs_to_f64(frac);
                    (floor, if f <= guard { Decision::Ambiguous } else { Decision::No })
                } else {
                    NONE
                };
                // quick rejection: 1 - frac < thr needs frac close to one
                let top = ldexp(frac[0] as f64, -64);
                let thr_f = thr.to_f64();
                if thr_f.is_finite() && top + thr_f < 1.0 - 1e-9 {
                    return [exact_side, NONE];
                }
                let comp = twos_complement(frac);
                [exact_side, (floor + 1, frac_below(&comp, thr, guard))]
            }
        }
    }
}

struct RatioCursor {
    step_int: i128,
    step_rem: u64,
    int: i128,
    rem: u64,
    den: u64,
}

impl RatioCursor {
    fn new(num: i128, den: u64, start: u64) -> Result<Self> {
        let d = den as i128;
        let total = num
            .checked_mul(start as i128)
            .ok_or_else(|| Error::Numeric("q * num overflows".into()))?;
        Ok(Self {
            step_int: Integer::div_floor(&num, &d),
            step_rem: num.mod_floor(&d) as u64,
            int: Integer::div_floor(&total, &d),
            rem: total.mod_floor(&d) as u64,
            den,
        })
    }

    /// `n / den < thr`, exact for reciprocal thresholds.
    fn below(&self, n: u64, thr: &Threshold) -> Decision {
        match thr {
            Threshold::Reciprocal(d) => {
                if (n as u128) * (*d as u128) < self.den as u128 {
                    Decision::Yes
                } else {
                    Decision::No
                }
            }
            _ => float_below(n as f64 / self.den as f64, thr, 0.0),
        }
    }
}

impl MultipleCursor for RatioCursor {
    fn advance(&mut self) {
        self.int += self.step_int;
        let (r, over) = self.rem.overflowing_add(self.step_rem);
        if over || r >= self.den {
            self.rem = r.wrapping_sub(self.den);
            self.int += 1;
        } else {
            self.rem = r;
        }
    }

    fn candidates(&self, side: Side, thr: &Threshold, _q: u64) -> Candidates {
        match side {
            Side::Plus => [(self.int, self.below(self.rem, thr)), NONE],
            Side::Minus if self.rem == 0 => [(self.int, Decision::Yes), (self.int + 1, self.below(self.den, thr))],
            Side::Minus => [(self.int + 1, self.below(self.den - self.rem, thr)), NONE],
        }
    }
}

fn cursor(s: &Real, start: u64) -> Result<Box<dyn MultipleCursor>> {
    Ok(match s {
        Real::Fixed(x) => Box::new(FixedCursor {
            inner: FracCursor::new(x, start as i128)?,
            truncated: x.is_truncated(),
            bits: x.frac_bits(),
        }),
        Real::Ratio { num, den } => Box::new(RatioCursor::new(*num, *den, start)?),
    })
}

fn coprime(p: i128, q: u64) -> bool {
    p.unsigned_abs().gcd(&(q as u128)) == 1
}

/// Minimal fractional precision for counting up to `n`.
pub fn required_frac_bits(n: u64) -> u32 {
    64 + 2 * (64 - n.saturating_sub(1).leading_zeros())
}

fn check_precision(s: &Real, n: u64) -> Result<()> {
    if let Real::Fixed(x) = s {
        let need = required_frac_bits(n);
        if x.frac_bits() < need {
            return Err(Error::Config(format!(
                "counting to N = {n} needs at least {need} fractional bits, s has {}",
                x.frac_bits()
            )));
        }
    }
    Ok(())
}

/// `T_N(s)`: primitive `(p, q)` with `1 <= q <= N` on the chosen side.
pub fn count_tn(s: &Real, psi: &ApproxFn, n: u64, side: Side, norm: Normalization) -> Result<CountResult> {
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    if psi.max_q() < n {
        return Err(Error::Domain(format!("psi is only defined up to q = {}", psi.max_q())));
    }
    check_precision(s, n)?;
    let mut cur = cursor(s, 1)?;
    let mut count = CountInterval::default();
    let mut blocks = vec![CountInterval::default(); 65 - n.leading_zeros() as usize];
    let mut hits = Vec::new();
    let mut sum = KahanSum::default();
    for q in 1..=n {
        let thr = match norm {
            Normalization::Raw => psi.threshold(q)?,
            Normalization::Capped => psi.threshold_capped(q)?,
        };
        sum.add(match &thr {
            Threshold::Reciprocal(d) => 1.0 / *d as f64,
            other => other.to_f64(),
        });
        for (p, d) in cur.candidates(side, &thr, q) {
            if d != Decision::No && coprime(p, q) {
                count.record(d);
                let k = (64 - (q - 1).leading_zeros()) as usize;
                blocks[k].record(d);
                hits.push(Hit { p, q, certain: d == Decision::Yes });
            }
        }
        cur.advance();
    }
    let sum_psi = sum.value();
    let expected = zeta2_inv() * sum_psi;
    Ok(CountResult {
        n,
        side,
        count,
        blocks,
        sum_psi,
        ratio: count.lo as f64 / expected,
        ratio_hi: count.hi as f64 / expected,
        hits,
    })
}

/// The scale parameters `r_k`, `t_k` attached to the block `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub tau: f64,
    pub k: u32,
    /// `tau^k`, snapped to an integer when within rounding of one.
    pub tau_k: f64,
    /// `psi(tau^k)` under the ceiling extension.
    pub psi_k: f64,
    pub r_k: f64,
    pub t_k: f64,
}

fn tau_pow(tau: f64, k: i32) -> f64 {
    snap_to_integer(tau.powi(k))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 1.0 && tau <= 2.0) {
        return Err(Error::Domain(format!("tau must lie in (1, 2], got {tau}")));
    }
    Ok(())
}

/// `r_k^2 = tau^k psi(tau^k)` and `t_k = tau^k / psi(tau^k)`. With `normalized`,
/// requires `psi(tau^k) <= tau^-k` so that `r_k <= 1`.
pub fn scale_params(psi: &ApproxFn, tau: f64, k: u32, normalized: bool) -> Result<ScaleParams> {
    check_tau(tau)?;
    let tau_k = tau_pow(tau, k as i32);
    let psi_k = eval_psi(psi, tau_k, Extension::Ceil)?;
    if normalized && psi_k * tau_k > 1.0 + 4.0 * f64::EPSILON {
        return Err(Error::Domain(format!(
            "normalization psi(q) <= 1/q fails at q = tau^{k} = {tau_k}: psi = {psi_k}"
        )));
    }
    Ok(ScaleParams { tau, k, tau_k, psi_k, r_k: (tau_k * psi_k).sqrt(), t_k: tau_k / psi_k })
}

impl ScaleParams {
    /// `R_k = [0, r_k) x (r_k / tau, r_k]`.
    pub fn rect(&self) -> Result<Rect> {
        Rect::new(0.0, self.r_k, self.r_k / self.tau, self.r_k)
    }
}

fn block_count(s: &BigFixed, q_lo: u64, q_hi: u64, thr: &Threshold) -> Result<CountInterval> {
    let mut out = CountInterval::default();
    if q_lo > q_hi {
        return Ok(out);
    }
    check_precision(&Real::Fixed(s.clone()), q_hi)?;
    let mut cur = FixedCursor {
        inner: FracCursor::new(s, q_lo as i128)?,
        truncated: s.is_truncated(),
        bits: s.frac_bits(),
    };
    for q in q_lo..=q_hi {
        for (p, d) in cur.candidates(Side::Plus, thr, q) {
            if d != Decision::No && coprime(p, q) {
                out.record(d);
            }
        }
        cur.advance();
    }
    Ok(out)
}

fn window_end(v: f64) -> Result<u64> {
    if !(v < 1.8e19) {
        return Err(Error::Domain(format!("q-window end {v} exceeds 64 bits")));
    }
    Ok(v.floor() as u64)
}

/// `S_k(s)`: `tau^(k-1) < q <= tau^k` and `0 <= q s - p < psi(tau^k)`.
pub fn count_sk_direct(s: &BigFixed, psi: &ApproxFn, tau: f64, k: u32) -> Result<CountInterval> {
    check_tau(tau)?;
    let lo = tau_pow(tau, k as i32 - 1);
    let hi = tau_pow(tau, k as i32);
    let q_psi = hi.ceil() as u64;
    block_count(s, window_end(lo)? + 1, window_end(hi)?, &psi.threshold(q_psi)?)
}

/// `S_k^+(s)`: `tau^k <= q < tau^(k+1)` and `0 <= q s - p < min(tau^-k, psi(floor tau^k))`.
pub fn count_sk_plus(s: &BigFixed, psi: &ApproxFn, tau: f64, k: u32) -> Result<CountInterval> {
    check_tau(tau)?;
    let lo = tau_pow(tau, k as i32);
    let hi = tau_pow(tau, k as i32 + 1);
    let floor_psi = psi.at(lo.floor() as u64)?;
    let thr = if floor_psi * lo < 1.0 {
        psi.threshold(lo.floor() as u64)?
    } else if lo.fract() == 0.0 {
        Threshold::Reciprocal(lo as u64)
    } else {
        let value = 1.0 / lo;
        Threshold::Float { value, slack: 2.0 * f64::EPSILON * value }
    };
    let q_lo = window_end(lo.ceil())?;
    let q_hi = window_end(hi.ceil())? - 1;
    block_count(s, q_lo, q_hi, &thr)
}

/// `S_k(s)` as the primitive Siegel transform of `R_k` at `a(t_k) u(s) Z^2`.
pub fn count_sk_siegel(s: &BigFixed, psi: &ApproxFn, tau: f64, k: u32) -> Result<CountInterval> {
    let params = scale_params(psi, tau, k, true)?;
    TranslatePoint::new(params.t_k, s.clone())?.siegel_count(&params.rect()?, DEFAULT_BUDGET)
}

/// Independent recheck of the coprimality of a sample of hits.
pub fn audit_hits(hits: &[Hit], every: usize) -> bool {
    hits.iter()
        .step_by(every.max(1))
        .all(|h| BigInt::from(h.p).gcd(&BigInt::from(h.q)) == BigInt::from(1) && !(h.p.is_zero() && h.q != 1))
}

/// `floor(q s)` for an audit of recorded `p` values.
pub fn floor_multiple(s: &Real, q: u64) -> i128 {
    match s {
        Real::Fixed(x) => x.mul_int(&BigInt::from(q)).floor().to_i128().unwrap_or(i128::MAX),
        Real::Ratio { num, den } => Integer::div_floor(&(num * q as i128), &(*den as i128)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> Real {
        Real::Fixed(BigFixed::from_f64((5f64.sqrt() - 1.0) / 2.0, 192).unwrap())
    }

    fn fixed(v: f64) -> BigFixed {
        BigFixed::from_f64(v, 192).unwrap()
    }

    /// Brute force with exact rationals: `s = num / den`.
    fn brute(num: i64, den: i64, n: u64, psi: impl Fn(u64) -> (i64, i64), side: Side) -> u64 {
        let mut c = 0;
        for q in 1..=n as i64 {
            let (pn, pd) = psi(q as u64);
            for p in -2 * n as i64..=2 * n as i64 {
                // q s - p = (q num - p den) / den
                let v = q * num - p * den;
                let ok = match side {
                    Side::Plus => v >= 0 && v * pd < pn * den,
                    Side::Minus => v <= 0 && -v * pd < pn * den,
                };
                if ok && p.unsigned_abs().gcd(&(q as u64)) == 1 {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn tn_examples() {
        let psi = ApproxFn::reciprocal();
        let r = count_tn(&golden(), &psi, 10, Side::Plus, Normalization::Raw).unwrap();
        assert_eq!(r.count, CountInterval::exact(3));
        let qs: Vec<u64> = r.hits.iter().map(|h| h.q).collect();
        assert_eq!(qs, vec![1, 2, 5]);

        let zero = Real::Fixed(fixed(0.0));
        let r = count_tn(&zero, &psi, 10, Side::Plus, Normalization::Raw).unwrap();
        assert_eq!(r.count, CountInterval::exact(1));

        let third = Real::ratio(1, 3).unwrap();
        let r = count_tn(&third, &psi, 6, Side::Plus, Normalization::Raw).unwrap();
        assert_eq!(r.count, CountInterval::exact(2));
        assert_eq!(r.hits.iter().map(|h| (h.p, h.q)).collect::<Vec<_>>(), vec![(0, 1), (1, 3)]);
    }

    #[test]
    fn truncated_thirds_give_an_honest_interval() {
        let s = Real::Fixed(BigFixed::from_ratio(&BigInt::from(1), &BigInt::from(3), 192).unwrap());
        let r = count_tn(&s, &ApproxFn::reciprocal(), 6, Side::Plus, Normalization::Raw).unwrap();
        assert!(r.count.lo <= 2 && r.count.hi >= 2);
        assert!(!r.count.is_exact());
    }

    #[test]
    fn rational_counts_match_brute_force() {
        for (num, den) in [(1, 3), (2, 7), (5, 12), (-3, 5), (13, 17), (0, 1), (7, 4)] {
            for side in [Side::Plus, Side::Minus] {
                let s = Real::ratio(num as i128, den as u64).unwrap();
                let r = count_tn(&s, &ApproxFn::reciprocal(), 40, side, Normalization::Raw).unwrap();
                assert_eq!(r.count, CountInterval::exact(brute(num, den, 40, |q| (1, q as i64), side)), "{num}/{den} {side:?}");
            }
        }
    }

    #[test]
    fn dyadic_counts_match_brute_force() {
        // s = m / 2^10 is exact in fixed point, so no ambiguity may appear
        for m in [1i64, 317, 512, 700, 1023, -77] {
            let s = Real::Fixed(fixed(m as f64 / 1024.0));
            for side in [Side::Plus, Side::Minus] {
                let r = count_tn(&s, &ApproxFn::reciprocal(), 60, side, Normalization::Raw).unwrap();
                assert_eq!(r.count, CountInterval::exact(brute(m, 1024, 60, |q| (1, q as i64), side)));
            }
        }
    }

    #[test]
    fn monotone_in_n_and_psi() {
        let s = golden();
        let big = count_tn(&s, &ApproxFn::reciprocal(), 5000, Side::Plus, Normalization::Raw).unwrap();
        let small = count_tn(&s, &ApproxFn::power(0.5, 1.0).unwrap(), 5000, Side::Plus, Normalization::Raw).unwrap();
        assert!(small.count.hi <= big.count.lo);
        let mut prev = 0;
        for n in [10, 100, 1000, 5000] {
            let c = big.count_up_to(n).lo;
            assert!(c >= prev);
            assert_eq!(c, count_tn(&s, &ApproxFn::reciprocal(), n, Side::Plus, Normalization::Raw).unwrap().count.lo);
            prev = c;
        }
        assert!(audit_hits(&big.hits, 1));
        for h in &big.hits {
            assert_eq!(h.p, floor_multiple(&s, h.q));
        }
    }

    #[test]
    fn precision_is_checked() {
        let s = Real::Fixed(BigFixed::from_f64(0.3, 64).unwrap());
        assert!(count_tn(&s, &ApproxFn::reciprocal(), 1_000_000, Side::Plus, Normalization::Raw).is_err());
    }

    #[test]
    fn scale_examples() {
        let p = scale_params(&ApproxFn::reciprocal(), 2.0, 3, true).unwrap();
        assert_eq!((p.tau_k, p.psi_k, p.r_k, p.t_k), (8.0, 0.125, 1.0, 64.0));
        let p = scale_params(&ApproxFn::power(1.0, 2.0).unwrap(), 2.0, 2, true).unwrap();
        assert_eq!((p.r_k, p.t_k), (0.5, 64.0));
        for k in 0..30 {
            for tau in [1.1, 1.5, 2.0] {
                let p = scale_params(&ApproxFn::log_power(2.0).unwrap(), tau, k, true).unwrap();
                assert!((p.r_k * p.t_k.sqrt() / p.tau_k - 1.0).abs() < 1e-12);
                assert!((p.r_k / p.t_k.sqrt() / p.psi_k - 1.0).abs() < 1e-12);
            }
        }
        assert!(scale_params(&ApproxFn::power(2.0, 1.0).unwrap(), 2.0, 3, true).is_err());
        assert!(scale_params(&ApproxFn::reciprocal(), 2.5, 3, true).is_err());
    }

    #[test]
    fn sk_examples() {
        let psi = ApproxFn::reciprocal();
        let g = fixed((5f64.sqrt() - 1.0) / 2.0);
        for f in [count_sk_direct, count_sk_siegel] {
            assert_eq!(f(&g, &psi, 2.0, 3).unwrap(), CountInterval::exact(1));
            assert_eq!(f(&g, &psi, 2.0, 0).unwrap(), CountInterval::exact(1));
            assert_eq!(f(&fixed(0.5), &psi, 2.0, 2).unwrap(), CountInterval::exact(0));
        }
        // q = tau^k sits on the closed side of the window
        assert_eq!(count_sk_direct(&fixed(0.0), &psi, 2.0, 0).unwrap(), CountInterval::exact(1));
        assert_eq!(count_sk_siegel(&fixed(0.0), &psi, 2.0, 0).unwrap(), CountInterval::exact(1));
        let eighth = fixed(1.0 / 8.0);
        assert_eq!(count_sk_direct(&eighth, &psi, 2.0, 3).unwrap(), count_sk_siegel(&eighth, &psi, 2.0, 3).unwrap());
    }

    #[test]
    fn sandwich_holds() {
        let psi = ApproxFn::reciprocal();
        for (i, v) in [0.1234567, std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_PI].iter().enumerate() {
            let s = fixed(*v);
            for tau in [2.0, 1.5] {
                let n_blocks = 14;
                let big_n = tau_pow(tau, n_blocks).floor() as u64 + i as u64;
                let t = count_tn(&Real::Fixed(s.clone()), &psi, big_n, Side::Plus, Normalization::Raw).unwrap().count;
                let lower: u64 = (1..=n_blocks as u32).map(|k| count_sk_direct(&s, &psi, tau, k).unwrap().lo).sum();
                let upper: u64 = (0..=n_blocks as u32).map(|k| count_sk_plus(&s, &psi, tau, k).unwrap().hi).sum();
                assert!(lower <= t.lo && t.hi <= upper, "{lower} {t:?} {upper}");
            }
        }
    }
}
