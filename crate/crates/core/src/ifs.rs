//! Weighted affine iterated function systems on the real line.
//!
//! A system `(lambda_i, phi_i)` with `phi_i(t) = r_i t + b_i` drives every other
//! part of the crate: its stationary measure `sigma` is the fractal whose
//! points are pushed along horocycles, and the same maps, read as elements of
//! the upper-triangular group, drive the lattice random walk.

use std::sync::Arc;

use num_bigint::BigInt;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bigfixed::BigFixed;
use crate::error::{Error, Result};
use crate::seed::{label, stream_rng};

/// Default stopping tolerance for backward sampling of `sigma`.
pub const DEFAULT_TOLERANCE: f64 = 1.0 / (1u128 << 96) as f64;

/// Default cap on the number of compositions a positivized draw may take.
pub const DEFAULT_POSITIVIZE_CAP: usize = 64;

/// Hard cap on backward iteration length.
const MAX_BACKWARD_STEPS: usize = 10_000_000;

/// `t -> rate * t + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub rate: f64,
    pub offset: f64,
}

impl AffineMap {
    pub fn new(rate: f64, offset: f64) -> Result<Self> {
        if rate == 0.0 || !rate.is_finite() || !offset.is_finite() {
            return Err(Error::Config(format!("invalid affine map rate={rate} offset={offset}")));
        }
        Ok(Self { rate, offset })
    }

    pub const fn identity() -> Self {
        Self { rate: 1.0, offset: 0.0 }
    }

    #[inline]
    pub fn apply(&self, t: f64) -> f64 {
        self.rate * t + self.offset
    }

    /// `self ∘ inner`.
    #[inline]
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap { rate: self.rate * inner.rate, offset: self.rate * inner.offset + self.offset }
    }

    pub fn fixed_point(&self) -> Option<f64> {
        if self.rate == 1.0 {
            None
        } else {
            Some(self.offset / (1.0 - self.rate))
        }
    }
}

/// Missing-digit structure: every map is `t -> (t + d) / base`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitSystem {
    pub base: u32,
    /// Digit of each map, in map order.
    pub digits: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct AffineSystem {
    maps: Vec<AffineMap>,
    weights: Vec<f64>,
    digits: Option<DigitSystem>,
    chooser: WeightedIndex<f64>,
}

impl PartialEq for AffineSystem {
    fn eq(&self, other: &Self) -> bool {
        self.maps == other.maps && self.weights == other.weights
    }
}

impl AffineSystem {
    /// Checks the structural hypotheses (nonempty, matching lengths, positive
    /// weights summing to one) and recognizes missing-digit systems.
    pub fn new(maps: Vec<AffineMap>, weights: Vec<f64>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::Config("an IFS needs at least one map".into()));
        }
        if maps.len() != weights.len() {
            return Err(Error::Config(format!(
                "{} maps but {} weights",
                maps.len(),
                weights.len()
            )));
        }
        for m in &maps {
            AffineMap::new(m.rate, m.offset)?;
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Config("weights must be positive and finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights sum to {total}, expected 1")));
        }
        let chooser = WeightedIndex::new(&weights)
            .map_err(|e| Error::Config(format!("invalid weight vector: {e}")))?;
        let digits = detect_digits(&maps);
        Ok(Self { maps, weights, digits, chooser })
    }

    /// The missing-digit system `{t -> (t + d) / base : d in digits}`.
    /// Uniform weights when `weights` is `None`.
    pub fn missing_digit(base: u32, digits: &[u32], weights: Option<Vec<f64>>) -> Result<Self> {
        if base < 2 {
            return Err(Error::Config(format!("base must be at least 2, got {base}")));
        }
        if digits.is_empty() || digits.iter().any(|&d| d >= base) {
            return Err(Error::Config(format!("digits {digits:?} invalid for base {base}")));
        }
        let b = base as f64;
        let maps = digits.iter().map(|&d| AffineMap { rate: 1.0 / b, offset: d as f64 / b }).collect();
        let weights = weights.unwrap_or_else(|| vec![1.0 / digits.len() as f64; digits.len()]);
        let mut sys = Self::new(maps, weights)?;
        sys.digits = Some(DigitSystem { base, digits: digits.to_vec() });
        Ok(sys)
    }

    /// Middle-thirds Cantor system with equal weights.
    pub fn cantor() -> Self {
        Self::missing_digit(3, &[0, 2], None).expect("static system")
    }

    /// `t -> t/2`, `t -> t/2 + 1/2`: stationary measure is Lebesgue on `[0, 1]`.
    pub fn lebesgue() -> Self {
        Self::missing_digit(2, &[0, 1], None).expect("static system")
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn digit_system(&self) -> Option<&DigitSystem> {
        self.digits.as_ref()
    }

    pub fn mean_log_rate(&self) -> f64 {
        self.maps.iter().zip(&self.weights).map(|(m, w)| w * m.rate.abs().ln()).sum()
    }

    pub fn is_orientation_preserving(&self) -> bool {
        self.maps.iter().all(|m| m.rate > 0.0)
    }

    #[inline]
    pub fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.chooser.sample(rng)
    }
}

fn detect_digits(maps: &[AffineMap]) -> Option<DigitSystem> {
    let rate = maps[0].rate;
    if !(rate > 0.0 && rate < 1.0) {
        return None;
    }
    let base = (1.0 / rate).round();
    if !(2.0..=1e9).contains(&base) || 1.0 / base != rate {
        return None;
    }
    let mut digits = Vec::with_capacity(maps.len());
    for m in maps {
        if m.rate != rate {
            return None;
        }
        let d = (m.offset * base).round();
        if d < 0.0 || d >= base || d / base != m.offset {
            return None;
        }
        digits.push(d as u32);
    }
    Some(DigitSystem { base: base as u32, digits })
}

/// On-disk IFS definition: either `base` + `digits` or explicit `maps`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsDefinition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digits: Option<Vec<u32>>,
    /// `[[rate, offset], ...]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl IfsDefinition {
    pub fn into_system(&self) -> Result<AffineSystem> {
        match (&self.base, &self.digits, &self.maps) {
            (Some(base), Some(digits), None) => {
                AffineSystem::missing_digit(*base, digits, self.weights.clone())
            }
            (None, None, Some(maps)) => {
                let maps = maps
                    .iter()
                    .map(|[r, b]| AffineMap::new(*r, *b))
                    .collect::<Result<Vec<_>>>()?;
                let weights =
                    self.weights.clone().unwrap_or_else(|| vec![1.0 / maps.len() as f64; maps.len()]);
                AffineSystem::new(maps, weights)
            }
            _ => Err(Error::Config(
                "IFS definition needs either `base` and `digits`, or `maps`".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub contracting: bool,
    pub mean_log_rate: f64,
    pub common_fixed_point: Option<f64>,
    pub orientation_preserving: bool,
}

impl ValidationReport {
    /// Contracting on average and without a global fixed point.
    pub fn usable(&self) -> bool {
        self.contracting && self.common_fixed_point.is_none()
    }
}

pub fn validate(system: &AffineSystem) -> ValidationReport {
    ValidationReport {
        contracting: system.mean_log_rate() < 0.0,
        mean_log_rate: system.mean_log_rate(),
        common_fixed_point: common_fixed_point(system.maps()),
        orientation_preserving: system.is_orientation_preserving(),
    }
}

fn common_fixed_point(maps: &[AffineMap]) -> Option<f64> {
    // A map with rate one fixes a point only if it is the identity, which fixes all.
    let candidate = maps.iter().find_map(AffineMap::fixed_point);
    match candidate {
        None => maps.iter().all(|m| m.offset == 0.0).then_some(0.0),
        Some(t) => {
            let scale = 1.0 + t.abs();
            maps.iter().all(|m| (m.apply(t) - t).abs() <= 1e-12 * scale).then_some(t)
        }
    }
}

/// Lyapunov exponent `-sum_i lambda_i log|r_i|`.
pub fn lyapunov(system: &AffineSystem) -> f64 {
    -system.mean_log_rate()
}

/// Draw modes of a [`SampleStream`].
#[derive(Clone, Debug, PartialEq)]
pub enum SampleMode {
    /// Stationary measure by backward iteration until the tail is below `tolerance`.
    Backward { tolerance: f64 },
    /// The `n`-step measure `lambda^{*n} * delta_0`.
    Forward { n: usize },
    /// Exact digit expansion of `depth` digits, stored at `frac_bits`.
    DigitExact { depth: usize, frac_bits: u32 },
}

/// A seeded, clonable source of draws from `sigma` or `sigma^(n)`.
#[derive(Clone, Debug)]
pub struct SampleStream {
    system: Arc<AffineSystem>,
    mode: SampleMode,
    seed: u64,
    positivize_cap: Option<usize>,
    rng: ChaCha8Rng,
}

impl SampleStream {
    pub fn new(system: AffineSystem, mode: SampleMode, seed: u64) -> Result<Self> {
        Self::with_system(Arc::new(system), mode, seed)
    }

    pub fn with_system(system: Arc<AffineSystem>, mode: SampleMode, seed: u64) -> Result<Self> {
        let report = validate(&system);
        match &mode {
            SampleMode::Backward { tolerance } => {
                if !report.contracting {
                    return Err(Error::NonContracting { mean_log_rate: report.mean_log_rate });
                }
                if !(*tolerance > 0.0) {
                    return Err(Error::Config(format!("tolerance must be positive, got {tolerance}")));
                }
            }
            SampleMode::Forward { .. } => {}
            SampleMode::DigitExact { frac_bits, .. } => {
                if system.digit_system().is_none() {
                    return Err(Error::Config(
                        "digit-exact sampling requires a missing-digit system".into(),
                    ));
                }
                BigFixed::zero(*frac_bits).with_frac_bits(*frac_bits)?;
            }
        }
        Ok(Self {
            system,
            mode,
            seed,
            positivize_cap: None,
            rng: stream_rng(seed, &[label::SIGMA]),
        })
    }

    pub fn system(&self) -> &AffineSystem {
        &self.system
    }

    pub fn shared_system(&self) -> Arc<AffineSystem> {
        Arc::clone(&self.system)
    }

    pub fn mode(&self) -> &SampleMode {
        &self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_positivized(&self) -> bool {
        self.positivize_cap.is_some()
    }

    /// Same system and mode, restarted on the stream addressed by `labels`.
    pub fn fork(&self, labels: &[u64]) -> Self {
        let mut out = self.clone();
        let mut path = vec![label::SIGMA];
        path.extend_from_slice(labels);
        out.rng = stream_rng(self.seed, &path);
        out
    }

    pub fn with_mode(&self, mode: SampleMode) -> Result<Self> {
        let mut out = Self::with_system(Arc::clone(&self.system), mode, self.seed)?;
        out.positivize_cap = self.positivize_cap;
        out.rng = self.rng.clone();
        Ok(out)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// One driving map and the number of compositions it took: always one
    /// unless the stream is positivized.
    pub fn draw_step(&mut self) -> Result<(AffineMap, usize)> {
        let first = self.system.maps()[self.system.draw_index(&mut self.rng)];
        let Some(cap) = self.positivize_cap else {
            return Ok((first, 1));
        };
        let mut composite = first;
        let mut steps = 1;
        while composite.rate < 0.0 {
            if steps >= cap {
                return Err(Error::StoppingCap { cap });
            }
            let next = self.system.maps()[self.system.draw_index(&mut self.rng)];
            composite = composite.compose(&next);
            steps += 1;
        }
        Ok((composite, steps))
    }

    /// A draw from `sigma`: backward iteration, or the float value of an exact
    /// digit draw in digit mode.
    pub fn sample_sigma(&mut self, tolerance: f64) -> Result<f64> {
        match self.mode {
            SampleMode::DigitExact { .. } => Ok(self.sample_sigma_exact()?.to_f64()),
            SampleMode::Forward { .. } => Err(Error::Config(
                "sample_sigma needs a backward or digit-exact stream".into(),
            )),
            SampleMode::Backward { .. } => self.backward(tolerance),
        }
    }

    fn backward(&mut self, tolerance: f64) -> Result<f64> {
        if !(tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {tolerance}")));
        }
        let mut x = 0.0;
        let mut scale = 1.0f64;
        for _ in 0..MAX_BACKWARD_STEPS {
            let (map, _) = self.draw_step()?;
            let moved = scale * map.offset;
            x += moved;
            scale *= map.rate;
            if scale.abs() < tolerance && moved.abs() < tolerance {
                return Ok(x);
            }
        }
        Err(Error::Numeric(format!(
            "backward iteration did not reach tolerance {tolerance} in {MAX_BACKWARD_STEPS} steps"
        )))
    }

    /// Digit indices of one exact draw.
    pub fn sample_digits(&mut self, depth: usize) -> Result<Vec<u32>> {
        let digits = self
            .system
            .digit_system()
            .ok_or_else(|| Error::Config("not a missing-digit system".into()))?;
        Ok((0..depth).map(|_| digits.digits[self.system.draw_index(&mut self.rng)]).collect())
    }

    /// A digit-exact draw from `sigma`, truncated to the mode's depth.
    pub fn sample_sigma_exact(&mut self) -> Result<BigFixed> {
        let SampleMode::DigitExact { depth, frac_bits } = self.mode else {
            return Err(Error::Config("exact draws need a digit-exact stream".into()));
        };
        let base = self.system.digit_system().map(|d| d.base).unwrap_or(2);
        let digits = self.sample_digits(depth)?;
        BigFixed::from_digits(base, &digits, frac_bits)
    }

    /// `phi_{i_1} ∘ ... ∘ phi_{i_n}(0)` with i.i.d. indices.
    pub fn sample_sigma_n(&mut self, n: usize) -> Result<f64> {
        let mut x = 0.0;
        let mut scale = 1.0;
        for _ in 0..n {
            let (map, _) = self.draw_step()?;
            x += scale * map.offset;
            scale *= map.rate;
        }
        Ok(x)
    }

    /// Next draw according to the stream's own mode.
    pub fn next_draw(&mut self) -> Result<f64> {
        match self.mode.clone() {
            SampleMode::Backward { tolerance } => self.backward(tolerance),
            SampleMode::Forward { n } => self.sample_sigma_n(n),
            SampleMode::DigitExact { .. } => Ok(self.sample_sigma_exact()?.to_f64()),
        }
    }
}

/// Wraps a system so that each draw is the composite `phi_1 ∘ ... ∘ phi_tau`
/// at the first time `tau` the composite rate is positive.
pub fn positivize_sampler(system: AffineSystem, seed: u64) -> Result<SampleStream> {
    let report = validate(&system);
    if !report.contracting {
        return Err(Error::NonContracting { mean_log_rate: report.mean_log_rate });
    }
    let mut stream = SampleStream::new(system, SampleMode::Backward { tolerance: DEFAULT_TOLERANCE }, seed)?;
    stream.positivize_cap = Some(DEFAULT_POSITIVIZE_CAP);
    stream.rng = stream_rng(seed, &[label::POSITIVIZE]);
    Ok(stream)
}

impl SampleStream {
    pub fn with_positivize_cap(mut self, cap: usize) -> Self {
        self.positivize_cap = Some(cap.max(1));
        self
    }
}

/// `phi_{i_1} ∘ ... ∘ phi_{i_n}(0)` evaluated innermost first.
pub fn compose_indices(system: &AffineSystem, indices: &[usize]) -> f64 {
    indices.iter().rev().fold(0.0, |y, &i| system.maps()[i].apply(y))
}

/// The same point accumulated outermost first, as backward iteration does.
pub fn accumulate_indices(system: &AffineSystem, indices: &[usize]) -> f64 {
    let mut x = 0.0;
    let mut scale = 1.0;
    for &i in indices {
        let m = system.maps()[i];
        x += scale * m.offset;
        scale *= m.rate;
    }
    x
}

/// Exact value of a digit-system composition as `(numerator, base^n)`.
pub fn digit_indices_exact(digits: &DigitSystem, indices: &[usize]) -> (BigInt, BigInt) {
    let b = BigInt::from(digits.base);
    let mut num = BigInt::from(0);
    for &i in indices {
        num = num * &b + digits.digits[i];
    }
    (num, num_traits::pow(b, indices.len()))
}
