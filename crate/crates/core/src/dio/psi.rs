//! Approximation functions `psi` and their real-argument extensions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bigfixed::Threshold;
use crate::error::{Error, Result};

/// A positive non-increasing function on the positive integers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ApproxFn {
    /// `c q^-alpha`
    Power { c: f64, alpha: f64 },
    /// `1 / (q log^beta (q + 2))`
    LogPower { beta: f64 },
    /// Explicit values at `q = 1, 2, ...`.
    Table { values: Vec<f64> },
}

/// How `psi` is evaluated away from the integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extension {
    IntegerOnly,
    /// `psi(ceil q)`
    Ceil,
    /// `min(1/q, psi(floor q))`
    FloorMin,
}

impl ApproxFn {
    pub fn power(c: f64, alpha: f64) -> Result<Self> {
        Self::checked(ApproxFn::Power { c, alpha })
    }

    pub fn log_power(beta: f64) -> Result<Self> {
        Self::checked(ApproxFn::LogPower { beta })
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        Self::checked(ApproxFn::Table { values })
    }

    /// `1/q`
    pub fn reciprocal() -> Self {
        ApproxFn::Power { c: 1.0, alpha: 1.0 }
    }

    fn checked(f: Self) -> Result<Self> {
        f.validate()?;
        Ok(f)
    }

    /// Checks positivity and monotonicity on `q <= 10^4` and at powers of two beyond.
    pub fn validate(&self) -> Result<()> {
        match self {
            ApproxFn::Power { c, alpha } => {
                if !(*c > 0.0 && c.is_finite()) || !(*alpha >= 0.0 && alpha.is_finite()) {
                    return Err(Error::Config(format!(
                        "psi: power family needs c > 0 and alpha >= 0, got c = {c}, alpha = {alpha}"
                    )));
                }
            }
            ApproxFn::LogPower { beta } => {
                if !(*beta >= 0.0 && beta.is_finite()) {
                    return Err(Error::Config(format!("psi: logpower needs beta >= 0, got {beta}")));
                }
            }
            ApproxFn::Table { values } => {
                if values.is_empty() {
                    return Err(Error::Config("psi: table is empty".into()));
                }
                if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    return Err(Error::Config(format!("psi: table values must be positive, found {v}")));
                }
            }
        }
        let mut prev = f64::INFINITY;
        let probes = (1..=10_000u64).chain((14..63).map(|e| 1u64 << e));
        for q in probes {
            let Ok(v) = self.at(q) else { break };
            if !(v > 0.0) {
                return Err(Error::Config(format!("psi({q}) = {v} is not positive")));
            }
            if v > prev {
                return Err(Error::Config(format!("psi is increasing at q = {q}")));
            }
            prev = v;
        }
        Ok(())
    }

    /// `psi(q)` at a positive integer.
    pub fn at(&self, q: u64) -> Result<f64> {
        if q == 0 {
            return Err(Error::Domain("psi is defined for q >= 1".into()));
        }
        let qf = q as f64;
        Ok(match self {
            ApproxFn::Power { c, alpha } => c * qf.powf(-alpha),
            ApproxFn::LogPower { beta } => 1.0 / (qf * (qf + 2.0).ln().powf(*beta)),
            ApproxFn::Table { values } => *values.get(q as usize - 1).ok_or_else(|| {
                Error::Domain(format!("psi table has {} entries, asked for q = {q}", values.len()))
            })?,
        })
    }

    /// Largest `q` at which the function is defined.
    pub fn max_q(&self) -> u64 {
        match self {
            ApproxFn::Table { values } => values.len() as u64,
            _ => u64::MAX,
        }
    }

    /// Comparison threshold for `psi(q)`; exact for `q^-alpha` with integer `alpha`.
    pub fn threshold(&self, q: u64) -> Result<Threshold> {
        if let ApproxFn::Power { c, alpha } = self {
            if *c == 1.0 && alpha.fract() == 0.0 && *alpha <= 64.0 {
                if let Some(d) = q.checked_pow(*alpha as u32) {
                    return Ok(Threshold::Reciprocal(d));
                }
            }
        }
        let value = self.at(q)?;
        let slack = match self {
            ApproxFn::Table { .. } => 0.0,
            _ => 4.0 * f64::EPSILON * value,
        };
        Ok(Threshold::Float { value, slack })
    }

    /// Threshold for `min(psi(q), 1/q)`.
    pub fn threshold_capped(&self, q: u64) -> Result<Threshold> {
        if self.at(q)? * q as f64 >= 1.0 {
            Ok(Threshold::Reciprocal(q))
        } else {
            self.threshold(q)
        }
    }
}

impl fmt::Display for ApproxFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApproxFn::Power { c, alpha } => write!(f, "power:{c},{alpha}"),
            ApproxFn::LogPower { beta } => write!(f, "logpower:{beta}"),
            ApproxFn::Table { values } => {
                let v: Vec<String> = values.iter().map(|x| x.to_string()).collect();
                write!(f, "table:{}", v.join(","))
            }
        }
    }
}

impl FromStr for ApproxFn {
    type Err = Error;

    /// Parses `power:C,ALPHA`, `logpower:BETA` or `table:V1,V2,...`.
    fn from_str(spec: &str) -> Result<Self> {
        let bad = |why: String| Error::Config(format!("psi: {why} in {spec:?}"));
        let (family, args) = spec.split_once(':').ok_or_else(|| bad("expected FAMILY:ARGS".into()))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad(format!("bad number {a:?}"))))
            .collect::<Result<_>>()?;
        match (family.trim(), nums.as_slice()) {
            ("power", [c, alpha]) => Self::power(*c, *alpha),
            ("power", _) => Err(bad("power takes two arguments".into())),
            ("logpower", [beta]) => Self::log_power(*beta),
            ("logpower", _) => Err(bad("logpower takes one argument".into())),
            ("table", _) => Self::table(nums),
            (other, _) => Err(bad(format!("unknown family {other:?}"))),
        }
    }
}

/// `psi` at a real argument `q >= 1` under the given extension.
pub fn eval_psi(psi: &ApproxFn, q: f64, extension: Extension) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::Domain(format!("psi needs q >= 1, got {q}")));
    }
    match extension {
        Extension::IntegerOnly => {
            if q.fract() != 0.0 {
                return Err(Error::Domain(format!("q = {q} is not an integer")));
            }
            psi.at(q as u64)
        }
        Extension::Ceil => psi.at(q.ceil() as u64),
        Extension::FloorMin => Ok(psi.at(q.floor() as u64)?.min(1.0 / q)),
    }
}

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `sum_{q=1}^{n} psi(q)`.
pub fn sum_psi(psi: &ApproxFn, n: u64) -> Result<f64> {
    sum_psi_from(psi, n, false)
}

/// The same sum with `psi` replaced by `min(psi, 1/q)` when `capped`.
pub fn sum_psi_from(psi: &ApproxFn, n: u64, capped: bool) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("sum_psi needs N >= 1".into()));
    }
    let mut acc = KahanSum::default();
    for q in 1..=n {
        let v = psi.at(q)?;
        acc.add(if capped { v.min(1.0 / q as f64) } else { v });
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extension_examples() {
        let psi = ApproxFn::reciprocal();
        assert!((eval_psi(&psi, 2.5, Extension::FloorMin).unwrap() - 0.4).abs() < 1e-15);
        assert!((eval_psi(&psi, 2.5, Extension::Ceil).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(eval_psi(&psi, 2.5, Extension::IntegerOnly).is_err());
        let t = ApproxFn::table(vec![0.5, 0.5, 0.1]).unwrap();
        assert_eq!(eval_psi(&t, 2.0, Extension::IntegerOnly).unwrap(), 0.5);
    }

    #[test]
    fn sums() {
        let h10 = sum_psi(&ApproxFn::reciprocal(), 10).unwrap();
        assert!((h10 - 7381.0 / 2520.0).abs() < 1e-14);
        let basel = sum_psi(&ApproxFn::power(1.0, 2.0).unwrap(), 1_000_000).unwrap();
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((basel - pi2_6).abs() < 1.1e-6);
        assert!(basel < pi2_6);
    }

    #[test]
    fn invalid_functions_are_rejected() {
        assert!(ApproxFn::table(vec![0.0, 0.0]).is_err());
        assert!(ApproxFn::table(vec![0.1, 0.2]).is_err());
        assert!(ApproxFn::power(1.0, -1.0).is_err());
        assert!(ApproxFn::log_power(-1.0).is_err());
    }

    #[test]
    fn parsing() {
        assert_eq!("power:1,1".parse::<ApproxFn>().unwrap(), ApproxFn::reciprocal());
        assert_eq!("logpower:2".parse::<ApproxFn>().unwrap(), ApproxFn::LogPower { beta: 2.0 });
        let t: ApproxFn = "table:0.5,0.5,0.1".parse().unwrap();
        assert_eq!(t.to_string().parse::<ApproxFn>().unwrap(), t);
        for bad in ["power", "power:1", "power:x,1", "cubic:1", "table:"] {
            let err = bad.parse::<ApproxFn>().unwrap_err().to_string();
            assert!(err.contains("psi"), "{err}");
        }
    }

    #[test]
    fn exact_thresholds_for_integer_powers() {
        assert_eq!(ApproxFn::reciprocal().threshold(8).unwrap(), Threshold::Reciprocal(8));
        let sq = ApproxFn::power(1.0, 2.0).unwrap();
        assert_eq!(sq.threshold(5).unwrap(), Threshold::Reciprocal(25));
        assert!(matches!(sq.threshold(1 << 40).unwrap(), Threshold::Float { .. }));
        let half = ApproxFn::power(2.0, 1.0).unwrap();
        assert_eq!(half.threshold_capped(4).unwrap(), Threshold::Reciprocal(4));
    }
}
