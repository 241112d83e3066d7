//! Unimodular lattices in the plane, held as canonical Lagrange–Gauss
//! reduced bases, with primitive-point enumeration and the Haar sampler.

use std::f64::consts::PI;

use num_integer::Integer;
use rand::Rng;
use serde::ser::SerializeTuple;
use serde::{Serialize, Serializer};

use super::group::{GroupElement, Mat2, PElement};
use crate::error::{Error, Result};

/// Relative tolerance used to break ties between equal-length vectors.
const TIE: f64 = 1e-12;

/// Default cap on candidate points examined per enumeration.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Hermite's constant bound on the systole of a unimodular planar lattice.
pub fn hermite_bound() -> f64 {
    (4.0f64 / 3.0).powf(0.25)
}

#[inline]
fn dot(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

#[inline]
fn norm2(u: [f64; 2]) -> f64 {
    dot(u, u)
}

#[inline]
fn lin(a: [f64; 2], ka: f64, b: [f64; 2], kb: f64) -> [f64; 2] {
    [ka * a[0] + kb * b[0], ka * a[1] + kb * b[1]]
}

/// Integer bookkeeping carried alongside basis vectors during reduction.
pub(crate) trait Coeffs: Clone {
    /// `ka * self + kb * other`
    fn lin(&self, ka: i64, other: &Self, kb: i64) -> Self;
    fn sub_mul(&self, k: f64, other: &Self) -> Self;
}

impl Coeffs for () {
    fn lin(&self, _: i64, _: &Self, _: i64) -> Self {}
    fn sub_mul(&self, _: f64, _: &Self) -> Self {}
}

/// A basis vector with the integer coefficients that produced it.
type Tagged<C> = ([f64; 2], C);

/// Rows of an integer change of basis.
type Change = ((i64, i64), (i64, i64));

/// Plain Lagrange–Gauss reduction: afterwards `|v1| <= |v2|` and
/// `|<v1, v2>| <= |v1|^2 / 2` up to rounding.
pub(crate) fn lagrange_reduce<C: Coeffs>(
    mut v1: Tagged<C>,
    mut v2: Tagged<C>,
    recompute: &dyn Fn(&C) -> Option<[f64; 2]>,
) -> Result<(Tagged<C>, Tagged<C>)> {
    // lengths via hypot so that bases with entries near 1e300 do not overflow
    let len = |u: [f64; 2]| u[0].hypot(u[1]);
    for _ in 0..100_000 {
        if len(v2.0) < len(v1.0) {
            std::mem::swap(&mut v1, &mut v2);
        }
        let n1 = len(v1.0);
        if !(n1 > 0.0) || !n1.is_finite() {
            return Err(Error::Numeric("degenerate basis during reduction".into()));
        }
        let unit = [v1.0[0] / n1, v1.0[1] / n1];
        let mu = dot(unit, v2.0) / n1;
        if mu.abs() <= 0.5 {
            return Ok((v1, v2));
        }
        let k = mu.round();
        let c = v2.1.sub_mul(k, &v1.1);
        let v = recompute(&c).unwrap_or_else(|| lin(v2.0, 1.0, v1.0, -k));
        v2 = (v, c);
    }
    Err(Error::Numeric("lattice reduction did not terminate".into()))
}

/// Picks the canonical representative among the reduced bases of a lattice:
/// positive orientation, shortest vector of least angle in `[0, pi)`, and
/// `<v1, v2> / |v1|^2` in `(-1/2, 1/2]`.
pub(crate) fn canonicalize<C: Coeffs>(
    v1: Tagged<C>,
    v2: Tagged<C>,
    recompute: &dyn Fn(&C) -> Option<[f64; 2]>,
) -> (Tagged<C>, Tagged<C>) {
    let (v1, v2) = if v1.0[0] * v2.0[1] - v1.0[1] * v2.0[0] < 0.0 {
        (v1, (lin(v2.0, -1.0, v2.0, 0.0), v2.1.lin(-1, &v2.1, 0)))
    } else {
        (v1, v2)
    };
    let n1 = norm2(v1.0);
    // candidates (a, b): a*v1 + b*v2, with complement (c, d) s.t. ad - bc = 1
    let options: [Change; 4] =
        [((1, 0), (0, 1)), ((0, 1), (-1, 0)), ((1, 1), (0, 1)), ((-1, 1), (-1, 0))];
    let mut best: Option<(f64, Change)> = None;
    for ((a, b), (c, d)) in options {
        let w = lin(v1.0, a as f64, v2.0, b as f64);
        if norm2(w) > n1 * (1.0 + TIE) {
            continue;
        }
        let len = norm2(w).sqrt();
        let flip = w[1] < -TIE * len || (w[1].abs() <= TIE * len && w[0] < 0.0);
        let (a, b, c, d, w) = if flip { (-a, -b, -c, -d, [-w[0], -w[1]]) } else { (a, b, c, d, w) };
        let y = if w[1].abs() <= TIE * len { 0.0 } else { w[1] };
        let angle = y.atan2(w[0]);
        if best.as_ref().is_none_or(|(ang, _)| angle < *ang - TIE) {
            best = Some((angle, ((a, b), (c, d))));
        }
    }
    let (_, ((a, b), (c, d))) = best.expect("v1 is always a candidate");
    let w1c = v1.1.lin(a, &v2.1, b);
    let w2c = v1.1.lin(c, &v2.1, d);
    let w1 = recompute(&w1c).unwrap_or_else(|| lin(v1.0, a as f64, v2.0, b as f64));
    let w2 = recompute(&w2c).unwrap_or_else(|| lin(v1.0, c as f64, v2.0, d as f64));
    let mu = dot(w1, w2) / norm2(w1);
    let k = (mu - 0.5 - TIE).ceil();
    if k == 0.0 {
        return ((w1, w1c), (w2, w2c));
    }
    let w2c2 = w2c.sub_mul(k, &w1c);
    let w2v = recompute(&w2c2).unwrap_or_else(|| lin(w2, 1.0, w1, -k));
    ((w1, w1c), (w2v, w2c2))
}

/// A point of `SL2(R)/SL2(Z)`: the lattice spanned by the columns of a
/// canonical reduced basis of determinant one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnimodularLattice {
    basis: Mat2,
}

impl Serialize for UnimodularLattice {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(4)?;
        for v in self.basis.row_major() {
            t.serialize_element(&v)?;
        }
        t.end()
    }
}

impl UnimodularLattice {
    /// The standard lattice `Z^2`.
    pub fn standard() -> Self {
        Self { basis: Mat2::IDENTITY }
    }

    pub(crate) fn from_reduced_unchecked(v1: [f64; 2], v2: [f64; 2]) -> Self {
        Self { basis: Mat2::from_columns(v1, v2) }
    }

    pub fn basis(&self) -> &Mat2 {
        &self.basis
    }

    pub fn v1(&self) -> [f64; 2] {
        self.basis.col(0)
    }

    pub fn v2(&self) -> [f64; 2] {
        self.basis.col(1)
    }

    /// Length of the shortest nonzero vector.
    pub fn systole(&self) -> f64 {
        norm2(self.v1()).sqrt()
    }

    pub fn is_reduced(&self) -> bool {
        let (v1, v2) = (self.v1(), self.v2());
        let n1 = norm2(v1);
        n1 <= norm2(v2) * (1.0 + 1e-9) && dot(v1, v2).abs() <= 0.5 * n1 * (1.0 + 1e-9)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.basis.max_abs_diff(&other.basis) <= tol
    }

    pub fn is_standard(&self) -> bool {
        self.approx_eq(&Self::standard(), 1e-12)
    }
}

/// Canonical reduced basis for the lattice spanned by the columns of `basis`.
pub fn gauss_reduce(basis: &Mat2) -> Result<UnimodularLattice> {
    let det = basis.det();
    if !((1.0 - 1e-9)..=(1.0 + 1e-9)).contains(&det.abs()) {
        return Err(Error::Numeric(format!("basis determinant {det} is not ±1")));
    }
    let none = |_: &()| None;
    let (v1, v2) = lagrange_reduce((basis.col(0), ()), (basis.col(1), ()), &none)?;
    let ((w1, _), (w2, _)) = canonicalize(v1, v2, &none);
    Ok(UnimodularLattice::from_reduced_unchecked(w1, w2))
}

/// `g · x`, reduced.
pub fn act(g: &GroupElement, x: &UnimodularLattice) -> Result<UnimodularLattice> {
    gauss_reduce(&g.matrix().mul(x.basis()))
}

pub fn act_p(g: &PElement, x: &UnimodularLattice) -> Result<UnimodularLattice> {
    act(&g.to_matrix(), x)
}

pub fn systole(x: &UnimodularLattice) -> f64 {
    x.systole()
}

/// Axis-parallel rectangle `[x_lo, x_hi) × (y_lo, y_hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        let finite = [x_lo, x_hi, y_lo, y_hi].iter().all(|v| v.is_finite());
        if !finite || !(x_lo < x_hi) || !(y_lo < y_hi) {
            return Err(Error::Domain(format!(
                "rectangle needs x_lo < x_hi and y_lo < y_hi, got [{x_lo}, {x_hi}) x ({y_lo}, {y_hi}]"
            )));
        }
        Ok(Self { x_lo, x_hi, y_lo, y_hi })
    }

    pub fn area(&self) -> f64 {
        (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)
    }

    #[inline]
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.x_lo <= p[0] && p[0] < self.x_hi && self.y_lo < p[1] && p[1] <= self.y_hi
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.x_lo, self.y_lo],
            [self.x_lo, self.y_hi],
            [self.x_hi, self.y_lo],
            [self.x_hi, self.y_hi],
        ]
    }

    /// The same rectangle widened by `margin` on every side.
    pub fn widened(&self, margin: f64) -> Rect {
        Rect {
            x_lo: self.x_lo - margin,
            x_hi: self.x_hi + margin,
            y_lo: self.y_lo - margin,
            y_hi: self.y_hi + margin,
        }
    }
}

/// Closed integer interval of `k` with `lo <= k*a + c <= hi`.
fn coefficient_range(a: f64, c: f64, lo: f64, hi: f64) -> Option<(i64, i64)> {
    if a == 0.0 {
        return (lo <= c && c <= hi).then_some((i64::MIN, i64::MAX));
    }
    let (x, y) = ((lo - c) / a, (hi - c) / a);
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    let (lo_k, hi_k) = (x.ceil() - 1.0, y.floor() + 1.0);
    if lo_k > 9.0e18 || hi_k < -9.0e18 {
        return None;
    }
    Some((lo_k.max(-9.0e18) as i64, hi_k.min(9.0e18) as i64))
}

/// Calls `visit(m, n, point)` for every lattice point `m v1 + n v2` that may
/// lie in `rect` (a superset; callers test membership). Fails once more than
/// `budget` candidates would be examined.
pub(crate) fn for_each_candidate(
    x: &UnimodularLattice,
    rect: &Rect,
    budget: u64,
    mut visit: impl FnMut(i64, i64, [f64; 2]),
) -> Result<()> {
    let (v1, v2) = (x.v1(), x.v2());
    let inv = x.basis().inverse()?;
    // second row of the inverse gives the n-coefficient of a point
    let n_of = |p: [f64; 2]| inv.c * p[0] + inv.d * p[1];
    let ns: Vec<f64> = rect.corners().iter().map(|&p| n_of(p)).collect();
    let n_min = ns.iter().cloned().fold(f64::INFINITY, f64::min).floor() - 1.0;
    let n_max = ns.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil() + 1.0;
    let n_count = n_max - n_min + 1.0;
    if n_count > budget as f64 {
        return Err(Error::Budget { budget, needed: n_count.min(u64::MAX as f64) as u64 });
    }
    let mut examined = n_count as u64;
    for n in (n_min as i64)..=(n_max as i64) {
        let nf = n as f64;
        let Some((x0, x1)) = coefficient_range(v1[0], nf * v2[0], rect.x_lo, rect.x_hi) else {
            continue;
        };
        let Some((y0, y1)) = coefficient_range(v1[1], nf * v2[1], rect.y_lo, rect.y_hi) else {
            continue;
        };
        let (m0, m1) = (x0.max(y0), x1.min(y1));
        if m0 > m1 {
            continue;
        }
        let width = (m1 as i128 - m0 as i128 + 1) as u64;
        examined = examined.saturating_add(width);
        if examined > budget {
            return Err(Error::Budget { budget, needed: examined });
        }
        for m in m0..=m1 {
            let p = lin(v1, m as f64, v2, nf);
            visit(m, n, p);
        }
    }
    Ok(())
}

/// Primitive coefficient pairs `(m, n)` with `m v1 + n v2` in `rect`.
pub fn primitive_points_in_rect(
    x: &UnimodularLattice,
    rect: &Rect,
    budget: u64,
) -> Result<Vec<(i64, i64)>> {
    let mut out = Vec::new();
    for_each_candidate(x, rect, budget, |m, n, p| {
        if rect.contains(p) && m.gcd(&n) == 1 {
            out.push((m, n));
        }
    })?;
    Ok(out)
}

/// Primitive Siegel transform of the indicator of `rect`, evaluated at `x`.
pub fn siegel_count(x: &UnimodularLattice, rect: &Rect) -> Result<u64> {
    siegel_count_with_budget(x, rect, DEFAULT_BUDGET)
}

pub fn siegel_count_with_budget(x: &UnimodularLattice, rect: &Rect, budget: u64) -> Result<u64> {
    let mut count = 0u64;
    for_each_candidate(x, rect, budget, |m, n, p| {
        if rect.contains(p) && m.gcd(&n) == 1 {
            count += 1;
        }
    })?;
    Ok(count)
}

/// `6 / pi^2`, the Haar mean of the primitive Siegel transform per unit area.
pub fn zeta2_inv() -> f64 {
    6.0 / (PI * PI)
}

/// A lattice distributed according to the Haar probability measure.
///
/// The shape `z = x + iy` is drawn from the fundamental domain
/// `{|z| >= 1, |x| <= 1/2}` with density proportional to `y^-2`, then rotated
/// by a uniform angle.
pub fn haar_sample<R: Rng + ?Sized>(rng: &mut R) -> UnimodularLattice {
    let y_min = 3f64.sqrt() / 2.0;
    let (x, y) = loop {
        let x: f64 = rng.random::<f64>() - 0.5;
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let y = y_min / u;
        if x * x + y * y >= 1.0 {
            break (x, y);
        }
    };
    let theta = 2.0 * PI * rng.random::<f64>();
    let (s, c) = theta.sin_cos();
    let rot = Mat2::new(c, -s, s, c);
    let shape = Mat2::new(1.0 / y.sqrt(), x / y.sqrt(), 0.0, y.sqrt());
    gauss_reduce(&rot.mul(&shape)).expect("rotation of a unimodular shape is unimodular")
}
