//! Monte Carlo experiments over draws from a self-similar measure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::count::{count_sk_direct, count_tn, CountResult, Normalization, Real, Side};
use super::psi::{eval_psi, ApproxFn, Extension};
use crate::bigfixed::{BigFixed, DEFAULT_FRAC_BITS};
use crate::error::{Error, Result};
use crate::homsp::{snap_to_integer, zeta2_inv};
use crate::ifs::SampleStream;
use crate::seed::label;
use crate::stats::{mean, quantile_sorted, sorted, std_err};

/// Fractional bits for a draw that must resolve `q s mod 1` for `q` up to `scale`.
pub fn draw_frac_bits(scale: f64) -> u32 {
    DEFAULT_FRAC_BITS.max((2.0 * scale.max(1.0).log2()).ceil() as u32 + 128)
}

/// One draw from the stream's measure at a precision resolving `q <= scale`.
///
/// Missing-digit systems produce exact digit expansions of depth
/// `ceil(2 log_B scale) + extra_digits`; other systems give the float draw
/// converted exactly.
pub fn precise_draw(stream: &mut SampleStream, scale: f64, extra_digits: usize) -> Result<BigFixed> {
    let bits = draw_frac_bits(scale);
    match stream.system().digit_system().map(|d| d.base) {
        Some(base) => {
            let depth = (2.0 * scale.max(1.0).ln() / (base as f64).ln()).ceil() as usize + extra_digits;
            let digits = stream.sample_digits(depth)?;
            BigFixed::from_digits(base, &digits, bits)
        }
        None => BigFixed::from_f64(stream.next_draw()?, bits),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KhintchineSample {
    pub index: u64,
    pub s_digest: String,
    pub result: CountResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KhintchineReport {
    pub n: u64,
    pub side: Side,
    pub normalization: Normalization,
    pub samples: Vec<KhintchineSample>,
    /// Median of the interval midpoints.
    pub median: f64,
    pub median_lo: f64,
    pub median_hi: f64,
    /// Lower quartile of the lower ends and upper quartile of the upper ends.
    pub q1: f64,
    pub q3: f64,
    pub ambiguous_samples: usize,
}

impl KhintchineReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.samples.iter().map(|s| (s.result.ratio + s.result.ratio_hi) / 2.0).collect()
    }
}

/// Draws `samples` points and counts `T_N` on each.
pub fn khintchine_experiment(
    stream: &SampleStream,
    psi: &ApproxFn,
    n: u64,
    samples: u64,
    side: Side,
    normalization: Normalization,
) -> Result<KhintchineReport> {
    khintchine_experiment_at(stream, psi, n, samples, side, normalization, 0)
}

/// As [`khintchine_experiment`], holding every draw at `min_frac_bits` or more.
pub fn khintchine_experiment_at(
    stream: &SampleStream,
    psi: &ApproxFn,
    n: u64,
    samples: u64,
    side: Side,
    normalization: Normalization,
    min_frac_bits: u32,
) -> Result<KhintchineReport> {
    if samples == 0 {
        return Err(Error::Config("samples must be positive".into()));
    }
    let runs: Vec<KhintchineSample> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut st = stream.fork(&[label::KHINTCHINE, i]);
            let mut s = precise_draw(&mut st, n as f64, 64)?;
            if s.frac_bits() < min_frac_bits {
                s = s.with_frac_bits(min_frac_bits)?;
            }
            let s_digest = s.digest();
            let result = count_tn(&Real::Fixed(s), psi, n, side, normalization)?;
            Ok(KhintchineSample { index: i, s_digest, result })
        })
        .collect::<Result<_>>()?;
    let lo = sorted(&runs.iter().map(|r| r.result.ratio).collect::<Vec<_>>());
    let hi = sorted(&runs.iter().map(|r| r.result.ratio_hi).collect::<Vec<_>>());
    let mid = sorted(&runs.iter().map(|r| (r.result.ratio + r.result.ratio_hi) / 2.0).collect::<Vec<_>>());
    Ok(KhintchineReport {
        n,
        side,
        normalization,
        median: quantile_sorted(&mid, 0.5),
        median_lo: quantile_sorted(&lo, 0.5),
        median_hi: quantile_sorted(&hi, 0.5),
        q1: quantile_sorted(&lo, 0.25),
        q3: quantile_sorted(&hi, 0.75),
        ambiguous_samples: runs.iter().filter(|r| !r.result.count.is_exact()).count(),
        samples: runs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub tau: f64,
    pub first_block: u32,
    pub last_block: u32,
    pub samples: usize,
    /// `E[(sum Z_k)^2] / sum y_k`
    pub ratio: f64,
    pub ratio_std_err: f64,
    pub sum_y: f64,
    /// Mean of `S_k` per block.
    pub block_means: Vec<f64>,
    pub y: Vec<f64>,
    pub ambiguous_blocks: u64,
}

/// `y_k = zeta(2)^-1 (tau^k - tau^(k-1)) psi(tau^k)`.
pub fn block_expectation(psi: &ApproxFn, tau: f64, k: u32) -> Result<f64> {
    let hi = snap_to_integer(tau.powi(k as i32));
    let lo = snap_to_integer(tau.powi(k as i32 - 1));
    Ok(zeta2_inv() * (hi - lo) * eval_psi(psi, hi, Extension::Ceil)?)
}

/// The variance ratio over the given points.
pub fn variance_probe_points(
    points: &[BigFixed],
    psi: &ApproxFn,
    tau: f64,
    first: u32,
    last: u32,
) -> Result<VarianceReport> {
    if points.is_empty() || first > last {
        return Err(Error::Config("variance probe needs points and a nonempty block range".into()));
    }
    let y: Vec<f64> = (first..=last).map(|k| block_expectation(psi, tau, k)).collect::<Result<_>>()?;
    let rows: Vec<(Vec<f64>, u64)> = points
        .par_iter()
        .map(|s| {
            let mut counts = Vec::with_capacity(y.len());
            let mut ambiguous = 0;
            for k in first..=last {
                let c = count_sk_direct(s, psi, tau, k)?;
                ambiguous += u64::from(!c.is_exact());
                counts.push(c.midpoint());
            }
            Ok((counts, ambiguous))
        })
        .collect::<Result<_>>()?;
    let sum_y: f64 = y.iter().sum();
    let squares: Vec<f64> = rows
        .iter()
        .map(|(c, _)| {
            let z: f64 = c.iter().zip(&y).map(|(s, y)| s - y).sum();
            z * z
        })
        .collect();
    let block_means = (0..y.len())
        .map(|j| mean(&rows.iter().map(|(c, _)| c[j]).collect::<Vec<_>>()))
        .collect();
    Ok(VarianceReport {
        tau,
        first_block: first,
        last_block: last,
        samples: points.len(),
        ratio: mean(&squares) / sum_y,
        ratio_std_err: std_err(&squares) / sum_y,
        sum_y,
        block_means,
        y,
        ambiguous_blocks: rows.iter().map(|(_, a)| a).sum(),
    })
}

/// Monte Carlo estimate of `E[(sum_{k in J} Z_k)^2] / sum_{k in J} y_k` with
/// `Z_k = S_k - y_k` over `samples` draws.
pub fn variance_probe(
    stream: &SampleStream,
    psi: &ApproxFn,
    tau: f64,
    first: u32,
    last: u32,
    samples: u64,
) -> Result<VarianceReport> {
    let scale = snap_to_integer(tau.powi(last as i32));
    let points: Vec<BigFixed> = (0..samples)
        .into_par_iter()
        .map(|i| precise_draw(&mut stream.fork(&[label::VARIANCE, i]), scale, 64))
        .collect::<Result<_>>()?;
    variance_probe_points(&points, psi, tau, first, last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{AffineSystem, SampleMode};

    fn cantor_stream(seed: u64) -> SampleStream {
        SampleStream::new(AffineSystem::cantor(), SampleMode::DigitExact { depth: 64, frac_bits: 192 }, seed)
            .unwrap()
    }

    #[test]
    fn experiment_is_reproducible_and_ordered() {
        let psi = ApproxFn::reciprocal();
        let a = khintchine_experiment(&cantor_stream(3), &psi, 2000, 8, Side::Plus, Normalization::Raw).unwrap();
        let b = khintchine_experiment(&cantor_stream(3), &psi, 2000, 8, Side::Plus, Normalization::Raw).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.iter().map(|s| s.index).collect::<Vec<_>>(), (0..8).collect::<Vec<_>>());
        assert!(a.q1 <= a.median && a.median <= a.q3);
    }

    #[test]
    fn single_block_ratio_is_variance_over_mean() {
        let psi = ApproxFn::reciprocal();
        let r = variance_probe(&cantor_stream(5), &psi, 2.0, 6, 6, 200).unwrap();
        assert_eq!(r.y.len(), 1);
        assert!(r.ratio.is_finite() && r.ratio_std_err >= 0.0);
    }

    #[test]
    fn degenerate_measure_gives_closed_form() {
        let psi = ApproxFn::reciprocal();
        let s0 = BigFixed::from_f64(0.3, 192).unwrap();
        let r = variance_probe_points(&[s0.clone(), s0.clone()], &psi, 2.0, 1, 8).unwrap();
        let z: f64 = (1..=8)
            .map(|k| count_sk_direct(&s0, &psi, 2.0, k).unwrap().lo as f64 - block_expectation(&psi, 2.0, k).unwrap())
            .sum();
        let sum_y: f64 = (1..=8).map(|k| block_expectation(&psi, 2.0, k).unwrap()).sum();
        assert!((r.ratio - z * z / sum_y).abs() < 1e-12);
        assert_eq!(r.ratio_std_err, 0.0);
    }
}
