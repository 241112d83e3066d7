//! Expanding translates `a(t) u(s) Z^2` with `s` drawn from a self-similar
//! measure, and the equidistribution statistics of their Siegel counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bigfixed::BigFixed;
use crate::dio::precise_draw;
use crate::error::{Error, Result};
use crate::homsp::{
    act, diag_a, haar_sample, shear_u, siegel_count, zeta2_inv, CountInterval, PElement, Rect, TranslatePoint,
    DEFAULT_BUDGET,
};
use crate::ifs::SampleStream;
use crate::seed::{derive_seed, label};
use crate::stats::{log_log_slope, mean, std_err};

/// Haar samples drawn from one derived generator in [`correlation_estimate`].
const HAAR_CHUNK: u64 = 1024;

/// `|a(t r) u(s) g - a(t) u(r s + b)|_inf` for `g = a(r)^-1 u(b)`, relative
/// to the largest entry of either side when that exceeds one.
pub fn cocycle_identity_check(t: f64, s: f64, g: &PElement) -> Result<f64> {
    let r = g.rate();
    let lhs = diag_a(t * r)?.mul(&shear_u(s)).mul(&g.to_matrix());
    let rhs = diag_a(t)?.mul(&shear_u(r * s + g.offset));
    Ok(relative_gap(lhs.matrix(), rhs.matrix()))
}

/// `|compose(g1, g2) - g1 g2|_inf`, relative as in [`cocycle_identity_check`].
pub fn compose_residual(g1: &PElement, g2: &PElement) -> f64 {
    let composed = g1.compose(g2).to_matrix();
    let product = g1.to_matrix().mul(&g2.to_matrix());
    relative_gap(composed.matrix(), product.matrix())
}

fn relative_gap(a: &crate::homsp::Mat2, b: &crate::homsp::Mat2) -> f64 {
    let scale = a.row_major().iter().chain(b.row_major().iter()).fold(1.0f64, |m, x| m.max(x.abs()));
    a.max_abs_diff(b) / scale
}

#[derive(Clone, Debug)]
pub struct TranslateConfig {
    pub stream: SampleStream,
    pub times: Vec<f64>,
    pub rects: Vec<Rect>,
    pub replicas: usize,
}

impl TranslateConfig {
    fn check(&self, rects: usize) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be positive".into()));
        }
        if self.times.is_empty() {
            return Err(Error::Config("empty time grid".into()));
        }
        if let Some(t) = self.times.iter().find(|t| !(**t > 1.0 && t.is_finite())) {
            return Err(Error::Config(format!("times must exceed 1, got {t}")));
        }
        if self.rects.len() != rects {
            return Err(Error::Config(format!("expected {rects} rect(s), got {}", self.rects.len())));
        }
        Ok(())
    }

    /// The `s`-draws, resolved for the largest time on the grid.
    pub fn draws(&self) -> Result<Vec<BigFixed>> {
        let t_max = self.times.iter().cloned().fold(1.0, f64::max);
        let extra = match self.stream.system().digit_system() {
            Some(d) => (64.0 / (d.base as f64).log2()).ceil() as usize,
            None => 0,
        };
        (0..self.replicas as u64)
            .into_par_iter()
            .map(|i| precise_draw(&mut self.stream.fork(&[label::TRANSLATE, i]), t_max, extra))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationPoint {
    pub t: f64,
    /// Second time for double statistics.
    pub t2: Option<f64>,
    pub mean: f64,
    pub std_err: f64,
    pub target: f64,
    pub deviation: f64,
    pub ambiguous: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub replicas: usize,
    pub points: Vec<DeviationPoint>,
    /// Log-log slope of the deviation in `t` over points above three standard errors.
    pub slope: Option<f64>,
}

impl DeviationReport {
    fn new(replicas: usize, points: Vec<DeviationPoint>) -> Self {
        let (x, y): (Vec<f64>, Vec<f64>) = points
            .iter()
            .filter(|p| p.deviation > 3.0 * p.std_err)
            .map(|p| (p.t2.unwrap_or(p.t), p.deviation))
            .unzip();
        let slope = if x.len() >= 2 { log_log_slope(&x, &y) } else { None };
        Self { replicas, points, slope }
    }

    pub fn deviations(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.deviation).collect()
    }

    /// Whether each deviation exceeds the previous by at most `k` standard errors.
    pub fn non_increasing_within(&self, k: f64) -> bool {
        self.points.windows(2).all(|w| w[1].deviation <= w[0].deviation + k * w[0].std_err.max(w[1].std_err))
    }
}

fn count_at(t: f64, s: &BigFixed, rect: &Rect) -> Result<CountInterval> {
    TranslatePoint::new(t, s.clone())?.siegel_count(rect, DEFAULT_BUDGET)
}

fn point(t: f64, t2: Option<f64>, values: &[f64], target: f64, ambiguous: u64) -> DeviationPoint {
    let m = mean(values);
    DeviationPoint { t, t2, mean: m, std_err: std_err(values), target, deviation: (m - target).abs(), ambiguous }
}

/// Single equidistribution deviations over explicit draws.
pub fn equidist_deviation_points(points: &[BigFixed], times: &[f64], rect: &Rect) -> Result<DeviationReport> {
    if points.is_empty() {
        return Err(Error::Config("no draws".into()));
    }
    let rows: Vec<Vec<CountInterval>> = points
        .par_iter()
        .map(|s| times.iter().map(|&t| count_at(t, s, rect)).collect())
        .collect::<Result<_>>()?;
    let target = zeta2_inv() * rect.area();
    let out = times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let values: Vec<f64> = rows.iter().map(|r| r[j].midpoint()).collect();
            let ambiguous = rows.iter().filter(|r| !r[j].is_exact()).count() as u64;
            point(t, None, &values, target, ambiguous)
        })
        .collect();
    Ok(DeviationReport::new(points.len(), out))
}

/// `D(t) = |mean siegel count at a(t) u(s) Z^2 - zeta(2)^-1 area|` over the grid.
pub fn equidist_deviation(config: &TranslateConfig) -> Result<DeviationReport> {
    config.check(1)?;
    equidist_deviation_points(&config.draws()?, &config.times, &config.rects[0])
}

/// Double deviations over explicit draws for each `(t1, t2)`.
pub fn double_deviation_points(
    points: &[BigFixed],
    pairs: &[(f64, f64)],
    rects: (&Rect, &Rect),
) -> Result<DeviationReport> {
    if points.is_empty() {
        return Err(Error::Config("no draws".into()));
    }
    if let Some((t1, t2)) = pairs.iter().find(|(t1, t2)| !(*t1 > 1.0 && t2 >= t1)) {
        return Err(Error::Config(format!("pairs need t2 >= t1 > 1, got ({t1}, {t2})")));
    }
    let rows: Vec<Vec<(f64, bool)>> = points
        .par_iter()
        .map(|s| {
            pairs
                .iter()
                .map(|&(t1, t2)| {
                    let a = count_at(t1, s, rects.0)?;
                    let b = count_at(t2, s, rects.1)?;
                    Ok((a.midpoint() * b.midpoint(), !(a.is_exact() && b.is_exact())))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let target = zeta2_inv() * rects.0.area() * zeta2_inv() * rects.1.area();
    let out = pairs
        .iter()
        .enumerate()
        .map(|(j, &(t1, t2))| {
            let values: Vec<f64> = rows.iter().map(|r| r[j].0).collect();
            let ambiguous = rows.iter().filter(|r| r[j].1).count() as u64;
            point(t1, Some(t2), &values, target, ambiguous)
        })
        .collect();
    Ok(DeviationReport::new(points.len(), out))
}

/// `|E[count_1(t1, s) count_2(t2, s)] - product of targets|` for each pair.
pub fn double_deviation(config: &TranslateConfig, pairs: &[(f64, f64)]) -> Result<DeviationReport> {
    let mut grid = config.clone();
    grid.times = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    grid.check(2)?;
    double_deviation_points(&grid.draws()?, pairs, (&config.rects[0], &config.rects[1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub t: f64,
    pub estimate: f64,
    pub std_err: f64,
    /// Mean Siegel count over the Haar samples themselves.
    pub haar_mean: f64,
    pub haar_std_err: f64,
    pub samples: u64,
}

/// Haar Monte Carlo estimate of `<a(t).f, f>` with `f` the centred Siegel count of `rect`.
pub fn correlation_estimate(t: f64, rect: &Rect, samples: u64, seed: u64) -> Result<CorrelationEstimate> {
    if samples == 0 {
        return Err(Error::Config("samples must be positive".into()));
    }
    let back = diag_a(1.0 / t)?;
    let target = zeta2_inv() * rect.area();
    let chunks = samples.div_ceil(HAAR_CHUNK);
    let pairs: Vec<Vec<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[label::HAAR, c]));
            let n = HAAR_CHUNK.min(samples - c * HAAR_CHUNK);
            (0..n)
                .map(|_| {
                    let x = haar_sample(&mut rng);
                    let c0 = siegel_count(&x, rect)? as f64;
                    let ft = siegel_count(&act(&back, &x)?, rect)? as f64 - target;
                    Ok((c0, ft * (c0 - target)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let (counts, products): (Vec<f64>, Vec<f64>) = pairs.into_iter().flatten().unzip();
    Ok(CorrelationEstimate {
        t,
        estimate: mean(&products),
        std_err: std_err(&products),
        haar_mean: mean(&counts),
        haar_std_err: std_err(&counts),
        samples,
    })
}
