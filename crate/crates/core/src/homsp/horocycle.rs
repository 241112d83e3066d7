//! Expanding translates `a(t) u(s) Z^2` with `s` held as a [`BigFixed`].
//!
//! Counting uses a column sweep over the integer `b` of each lattice vector
//! `(sqrt(t) (a + b s), b / sqrt(t))` when the `y`-window is small enough, and
//! falls back to enumeration on a reduced basis otherwise. Reduction tracks
//! integer coefficients and re-evaluates every vector from `s` directly, so
//! the basis stays accurate for `t` far beyond double precision.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::lattice::{
    canonicalize, lagrange_reduce, siegel_count_with_budget, Coeffs, Rect, UnimodularLattice,
};
use crate::bigfixed::{
    frac_below, guard_band, limbs_to_f64, twos_complement, BigFixed, Decision, FracCursor,
    Threshold,
};
use crate::error::{Error, Result};

/// Largest `y`-window handled by the exact sweep.
pub const SWEEP_LIMIT: u64 = 1 << 24;

/// Rounds `v` to the nearest integer when it is within a few ulps of one.
pub fn snap_to_integer(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 16.0 * f64::EPSILON * v.abs().max(1.0) {
        r
    } else {
        v
    }
}

/// A count known to lie in `[lo, hi]`; `lo < hi` only when some boundary
/// decision fell inside the guard band.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountInterval {
    pub lo: u64,
    pub hi: u64,
}

impl CountInterval {
    pub const fn exact(n: u64) -> Self {
        Self { lo: n, hi: n }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn record(&mut self, d: Decision) {
        match d {
            Decision::Yes => {
                self.lo += 1;
                self.hi += 1;
            }
            Decision::Ambiguous => self.hi += 1,
            Decision::No => {}
        }
    }

    pub fn midpoint(&self) -> f64 {
        (self.lo as f64 + self.hi as f64) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
struct IntPair {
    a: BigInt,
    b: BigInt,
}

impl Coeffs for IntPair {
    fn lin(&self, ka: i64, other: &Self, kb: i64) -> Self {
        IntPair { a: &self.a * ka + &other.a * kb, b: &self.b * ka + &other.b * kb }
    }

    fn sub_mul(&self, k: f64, other: &Self) -> Self {
        let k = BigInt::from_f64(k).unwrap_or_else(BigInt::zero);
        IntPair { a: &self.a - &k * &other.a, b: &self.b - &k * &other.b }
    }
}

/// The lattice `a(t) u(s) Z^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct TranslatePoint {
    sqrt_t: f64,
    /// Whether `sqrt_t` is the exact square root of the given time.
    exact_root: bool,
    s: BigFixed,
}

impl TranslatePoint {
    pub fn new(t: f64, s: BigFixed) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("translate time must be positive, got {t}")));
        }
        let sqrt_t = t.sqrt();
        Ok(Self { sqrt_t, exact_root: sqrt_t.mul_add(sqrt_t, -t) == 0.0, s })
    }

    /// Builds the point from `log t`, for times beyond the float range.
    pub fn from_log(log_t: f64, s: BigFixed) -> Result<Self> {
        let sqrt_t = (0.5 * log_t).exp();
        if !(sqrt_t > 0.0) || !sqrt_t.is_finite() {
            return Err(Error::Domain(format!("log t = {log_t} is out of range")));
        }
        Ok(Self { sqrt_t, exact_root: false, s })
    }

    pub fn sqrt_t(&self) -> f64 {
        self.sqrt_t
    }

    pub fn log_t(&self) -> f64 {
        2.0 * self.sqrt_t.ln()
    }

    pub fn s(&self) -> &BigFixed {
        &self.s
    }

    fn vector(&self, s: &BigFixed, c: &IntPair) -> [f64; 2] {
        let x = BigFixed::from_int(c.a.clone(), s.frac_bits()).add(&s.mul_int(&c.b));
        let b = c.b.to_f64().unwrap_or(f64::INFINITY);
        [x.to_f64() * self.sqrt_t, b / self.sqrt_t]
    }

    /// Canonical reduced basis of the lattice.
    pub fn lattice(&self) -> Result<UnimodularLattice> {
        let needed = 2.0 * self.sqrt_t.log2() + 60.0;
        if (self.s.frac_bits() as f64) < needed {
            return Err(Error::Numeric(format!(
                "{} fractional bits of s are too few to reduce at log2 t = {:.1}; need {}",
                self.s.frac_bits(),
                2.0 * self.sqrt_t.log2(),
                needed.ceil()
            )));
        }
        let s = self.s.fract();
        let recompute = |c: &IntPair| Some(self.vector(&s, c));
        let e1 = IntPair { a: BigInt::one(), b: BigInt::zero() };
        let e2 = IntPair { a: BigInt::zero(), b: BigInt::one() };
        let v1 = (self.vector(&s, &e1), e1);
        let v2 = (self.vector(&s, &e2), e2);
        let (v1, v2) = lagrange_reduce(v1, v2, &recompute)?;
        let ((w1, _), (w2, _)) = canonicalize(v1, v2, &recompute);
        Ok(UnimodularLattice::from_reduced_unchecked(w1, w2))
    }

    /// Number of primitive lattice vectors in `rect`.
    pub fn siegel_count(&self, rect: &Rect, budget: u64) -> Result<CountInterval> {
        let y_lo = snap_to_integer(rect.y_lo * self.sqrt_t).floor();
        let y_hi = snap_to_integer(rect.y_hi * self.sqrt_t).floor();
        if y_hi - y_lo <= SWEEP_LIMIT as f64 {
            self.sweep(rect, y_lo as i128 + 1, y_hi as i128, budget)
        } else {
            let x = self.lattice()?;
            Ok(CountInterval::exact(siegel_count_with_budget(&x, rect, budget)?))
        }
    }

    /// The exact column sweep over `b` in the `y`-window.
    pub fn sweep_count(&self, rect: &Rect, budget: u64) -> Result<CountInterval> {
        let y_lo = snap_to_integer(rect.y_lo * self.sqrt_t).floor();
        let y_hi = snap_to_integer(rect.y_hi * self.sqrt_t).floor();
        if y_hi - y_lo > budget as f64 {
            return Err(Error::Budget { budget, needed: (y_hi - y_lo).min(u64::MAX as f64) as u64 });
        }
        self.sweep(rect, y_lo as i128 + 1, y_hi as i128, budget)
    }

    fn sweep(&self, rect: &Rect, b_lo: i128, b_hi: i128, budget: u64) -> Result<CountInterval> {
        let mut out = CountInterval::default();
        if b_lo > b_hi {
            return Ok(out);
        }
        let mut cur = FracCursor::new(&self.s, b_lo)?;
        let limbs = cur.limbs();
        let lower = XBound::new(rect.x_lo, self.sqrt_t, self.exact_root, limbs)?;
        let upper = XBound::new(rect.x_hi, self.sqrt_t, self.exact_root, limbs)?;
        let columns = (b_hi - b_lo + 1) as u128;
        let per_column = (upper.floor - lower.floor + 3) as u128;
        if columns * per_column > budget as u128 {
            return Err(Error::Budget { budget, needed: (columns * per_column).min(u64::MAX as u128) as u64 });
        }
        let truncated = self.s.is_truncated();
        let bits = self.s.frac_bits();
        for b in b_lo..=b_hi {
            let guard = if truncated { guard_band(bits, b.unsigned_abs() as u64) } else { 0.0 };
            let frac = cur.frac();
            for a_shift in (lower.floor - 1)..=(upper.floor + 1) {
                let inside = (!lower.below(frac, a_shift, guard)).and(upper.below(frac, a_shift, guard));
                if inside == Decision::No {
                    continue;
                }
                let a = a_shift - cur.floor();
                if a.gcd(&b) == 1 {
                    out.record(inside);
                }
            }
            cur.advance();
        }
        Ok(out)
    }
}

/// The bound `X = x / sqrt(t) = floor + frac` on `a' + frac(b s)`, with the
/// absolute uncertainty of its float evaluation (zero when both the root and
/// the division are exact).
struct XBound {
    floor: i128,
    frac: f64,
    slack: f64,
    threshold: Threshold,
}

impl XBound {
    fn new(side: f64, sqrt_t: f64, exact_root: bool, limbs: usize) -> Result<Self> {
        let x = side / sqrt_t;
        if !x.is_finite() || x.abs() > 1e30 {
            return Err(Error::Numeric(format!("rectangle side {x} is out of range for the sweep")));
        }
        let floor = x.floor();
        let frac = x - floor;
        let exact = exact_root && x.mul_add(sqrt_t, -side) == 0.0;
        let slack = if exact { 0.0 } else { 4.0 * f64::EPSILON * x.abs() };
        let limbs_of = BigFixed::from_f64(frac, 64 * limbs as u32)?.frac_limbs(limbs);
        Ok(Self { floor: floor as i128, frac, slack, threshold: Threshold::Dyadic { limbs: limbs_of, slack } })
    }

    /// Decides `a_shift + frac < X`.
    fn below(&self, frac: &[u64], a_shift: i128, guard: f64) -> Decision {
        let tol = guard + self.slack;
        match self.floor - a_shift {
            j if j >= 2 => Decision::Yes,
            j if j <= -2 => Decision::No,
            1 => {
                if self.frac > tol {
                    return Decision::Yes;
                }
                let gap = one_minus(frac) + self.frac;
                if gap <= tol {
                    Decision::Ambiguous
                } else {
                    Decision::Yes
                }
            }
            -1 => {
                if 1.0 - self.frac > tol {
                    return Decision::No;
                }
                let gap = limbs_to_f64(frac) + (1.0 - self.frac);
                if gap <= tol {
                    Decision::Ambiguous
                } else {
                    Decision::No
                }
            }
            _ => frac_below(frac, &self.threshold, guard),
        }
    }
}

fn one_minus(frac: &[u64]) -> f64 {
    if frac.iter().all(|&l| l == 0) {
        1.0
    } else {
        limbs_to_f64(&twos_complement(frac))
    }
}

/// `a(t) u(s) Z^2`, reduced.
pub fn translate_point(t: f64, s: &BigFixed) -> Result<UnimodularLattice> {
    TranslatePoint::new(t, s.clone())?.lattice()
}
