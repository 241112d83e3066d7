//! `SL2(R)`, the upper-triangular subgroup `P`, and the one-parameter
//! subgroups `a(t)` and `u(s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifs::AffineMap;

/// A real 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// Matrix with the given column vectors.
    pub const fn from_columns(v1: [f64; 2], v2: [f64; 2]) -> Self {
        Self { a: v1[0], b: v2[0], c: v1[1], d: v2[1] }
    }

    pub fn col(&self, i: usize) -> [f64; 2] {
        match i {
            0 => [self.a, self.c],
            _ => [self.b, self.d],
        }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    pub fn inverse(&self) -> Result<Mat2> {
        let det = self.det();
        let scale = self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs());
        if !det.is_finite() || det.abs() <= 1e-300 || det.abs() < 1e-14 * scale * scale {
            return Err(Error::Numeric(format!("matrix {self:?} is not invertible")));
        }
        Ok(Mat2 { a: self.d / det, b: -self.b / det, c: -self.c / det, d: self.a / det })
    }

    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        (self.a - o.a)
            .abs()
            .max((self.b - o.b).abs())
            .max((self.c - o.c).abs())
            .max((self.d - o.d).abs())
    }

    pub fn frobenius(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    /// Operator (spectral) norm.
    pub fn op_norm(&self) -> f64 {
        let f2 = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let det = self.det();
        let disc = (f2 * f2 - 4.0 * det * det).max(0.0).sqrt();
        ((f2 + disc) / 2.0).sqrt()
    }

    pub fn row_major(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

/// An element of `SL2(R)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement(Mat2);

impl GroupElement {
    pub fn new(m: Mat2) -> Result<Self> {
        let scale = (m.a * m.d).abs() + (m.b * m.c).abs();
        if !(m.det() - 1.0).abs().le(&(1e-12 * scale.max(1.0))) {
            return Err(Error::Numeric(format!("determinant {} is not 1", m.det())));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn mul(&self, o: &GroupElement) -> GroupElement {
        GroupElement(self.0.mul(&o.0))
    }

    pub fn inverse(&self) -> GroupElement {
        let m = self.0;
        GroupElement(Mat2::new(m.d, -m.b, -m.c, m.a))
    }

    pub fn identity() -> Self {
        Self(Mat2::IDENTITY)
    }
}

/// `a(t) = diag(t^{1/2}, t^{-1/2})`.
pub fn diag_a(t: f64) -> Result<GroupElement> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("a(t) needs t > 0, got {t}")));
    }
    let r = t.sqrt();
    Ok(GroupElement(Mat2::new(r, 0.0, 0.0, 1.0 / r)))
}

/// `u(s) = [[1, s], [0, 1]]`.
pub fn shear_u(s: f64) -> GroupElement {
    GroupElement(Mat2::new(1.0, s, 0.0, 1.0))
}

/// An element `g = a(r)^{-1} u(b)` of `P`, stored as `(log r, b)`.
///
/// Under the anti-isomorphism with the orientation-preserving affine group,
/// `g` corresponds to `t -> r t + b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PElement {
    pub log_rate: f64,
    pub offset: f64,
}

impl PElement {
    pub const IDENTITY: PElement = PElement { log_rate: 0.0, offset: 0.0 };

    pub fn new(rate: f64, offset: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::Domain(format!("P-element rate must be positive, got {rate}")));
        }
        Ok(Self { log_rate: rate.ln(), offset })
    }

    pub fn from_map(map: &AffineMap) -> Result<Self> {
        Self::new(map.rate, map.offset)
    }

    pub fn rate(&self) -> f64 {
        self.log_rate.exp()
    }

    /// The matrix product `self * other`.
    pub fn compose(&self, other: &PElement) -> PElement {
        PElement {
            log_rate: self.log_rate + other.log_rate,
            offset: self.offset * other.rate() + other.offset,
        }
    }

    /// `[[r^{-1/2}, r^{-1/2} b], [0, r^{1/2}]]`.
    pub fn to_matrix(&self) -> GroupElement {
        let inv_sqrt = (-0.5 * self.log_rate).exp();
        let sqrt = (0.5 * self.log_rate).exp();
        GroupElement(Mat2::new(inv_sqrt, inv_sqrt * self.offset, 0.0, sqrt))
    }

    pub fn as_map(&self) -> AffineMap {
        AffineMap { rate: self.rate(), offset: self.offset }
    }
}
