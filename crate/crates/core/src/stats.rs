//! Empirical estimators shared by the experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation divided by `sqrt(n)`.
pub fn std_err(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Mean and standard error in one pass over the data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        Self { mean: mean(xs), std_err: std_err(xs), n: xs.len() }
    }
}

/// Linear-interpolated quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(xs: &[f64]) -> f64 {
    quantile_sorted(&sorted(xs), 0.5)
}

/// Sup-norm distance between the empirical CDFs of two samples.
pub fn cdf_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("cdf_distance needs two nonempty samples".into()));
    }
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// For each radius `r`, the largest fraction of samples inside a closed
/// interval of length `2r`.
pub fn estimate_ball_mass(samples: &[f64], radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::Domain("ball mass needs at least one sample".into()));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let xs = sorted(samples);
    let n = xs.len() as f64;
    Ok(radii
        .iter()
        .map(|&r| {
            let mut best = 0usize;
            let mut j = 0usize;
            for i in 0..xs.len() {
                if j < i {
                    j = i;
                }
                while j + 1 < xs.len() && xs[j + 1] - xs[i] <= 2.0 * r {
                    j += 1;
                }
                best = best.max(j + 1 - i);
            }
            (r, best as f64 / n)
        })
        .collect())
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Slope of `log y` against `log x`, skipping nonpositive values.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    linear_fit(&lx, &ly).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cdf_distance_examples() {
        assert_eq!(cdf_distance(&[0.3, 0.1, 0.2], &[0.1, 0.2, 0.3]).unwrap(), 0.0);
        assert_eq!(cdf_distance(&[0.0], &[1.0]).unwrap(), 1.0);
        assert!(cdf_distance(&[], &[1.0]).is_err());
    }

    #[test]
    fn ball_mass_examples() {
        let point = vec![0.25; 100];
        for (_, m) in estimate_ball_mass(&point, &[1e-6, 0.1, 10.0]).unwrap() {
            assert_eq!(m, 1.0);
        }
        let uniform: Vec<f64> = (0..100_000).map(|i| (i as f64 + 0.5) / 100_000.0).collect();
        let m = estimate_ball_mass(&uniform, &[0.1]).unwrap()[0].1;
        assert!((m - 0.2).abs() < 0.02);
        assert!(estimate_ball_mass(&[], &[0.1]).is_err());
        assert!(estimate_ball_mass(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
    }

    #[test]
    fn fits() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((log_log_slope(&x, &y).unwrap() - 2.0).abs() < 1e-12);
    }

    fn samples() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, 1..60)
    }

    proptest! {
        #[test]
        fn cdf_distance_is_a_pseudometric(a in samples(), b in samples(), c in samples()) {
            let ab = cdf_distance(&a, &b).unwrap();
            prop_assert_eq!(ab, cdf_distance(&b, &a).unwrap());
            prop_assert_eq!(cdf_distance(&a, &a).unwrap(), 0.0);
            let ac = cdf_distance(&a, &c).unwrap();
            let cb = cdf_distance(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn ball_mass_monotone_in_radius(xs in samples(), r1 in 1e-3f64..2.0, r2 in 1e-3f64..2.0) {
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let m = estimate_ball_mass(&xs, &[lo, hi]).unwrap();
            prop_assert!(m[0].1 <= m[1].1);
        }
    }
}
