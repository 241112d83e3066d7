//! Experiment manifests: what to run, with which parameters and seed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use klab_core::dio::ApproxFn;
use klab_core::homsp::Rect;
use klab_core::ifs::{AffineSystem, IfsDefinition};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Khintchine,
    Walk,
    Translate,
    Double,
    Correlation,
    Regularity,
    IdentitySuite,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Khintchine => "khintchine",
            Kind::Walk => "walk",
            Kind::Translate => "translate",
            Kind::Double => "double",
            Kind::Correlation => "correlation",
            Kind::Regularity => "regularity",
            Kind::IdentitySuite => "identity-suite",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Experiment parameters. Each kind reads the fields it needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Path to an IFS file, or `builtin:cantor` / `builtin:lebesgue`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ifs: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_from: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<[u32; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rect: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rect2: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision_bits: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub kind: Kind,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: Params,
}

pub const DEFAULT_RECT: [f64; 4] = [0.0, 1.0, 0.5, 1.0];

impl ExperimentManifest {
    pub fn new(kind: Kind, seed: u64) -> Self {
        Self { kind, seed, workers: None, out: None, params: Params::default() }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Validation(format!("manifest: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("manifest: {e}")))
    }

    /// Reads a manifest file; a relative `ifs` path is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut m = Self::from_toml(&text)?;
        if let (Some(ifs), Some(dir)) = (&m.params.ifs, path.parent()) {
            if !ifs.starts_with("builtin:") && Path::new(ifs).is_relative() {
                m.params.ifs = Some(dir.join(ifs).to_string_lossy().into_owned());
            }
        }
        Ok(m)
    }

    /// SHA-256 of the manifest with the worker count and output path removed,
    /// so that the digest names the experiment and not how it was scheduled.
    pub fn digest(&self) -> Result<String, CliError> {
        let mut canonical = self.clone();
        canonical.workers = None;
        canonical.out = None;
        let hash = Sha256::digest(canonical.to_toml()?.as_bytes());
        Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
    }
}

fn missing(field: &str) -> CliError {
    CliError::Validation(format!("missing parameter `{field}`"))
}

/// Typed views of the parameter block.
impl Params {
    pub fn system(&self) -> Result<(AffineSystem, IfsDefinition), CliError> {
        let spec = self.ifs.as_deref().ok_or_else(|| missing("ifs"))?;
        let def = match spec {
            "builtin:cantor" => IfsDefinition { base: Some(3), digits: Some(vec![0, 2]), ..Default::default() },
            "builtin:lebesgue" => IfsDefinition { base: Some(2), digits: Some(vec![0, 1]), ..Default::default() },
            path => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Validation(format!("ifs: cannot read {path}: {e}"))
                })?;
                toml::from_str(&text).map_err(|e| CliError::Validation(format!("ifs: {path}: {e}")))?
            }
        };
        let system = def.into_system().map_err(|e| CliError::Validation(format!("ifs: {e}")))?;
        Ok((system, def))
    }

    pub fn psi(&self) -> Result<ApproxFn, CliError> {
        let spec = self.psi.as_deref().ok_or_else(|| missing("psi"))?;
        ApproxFn::from_str(spec).map_err(|e| CliError::Validation(format!("--psi {spec:?}: {e}")))
    }

    pub fn n(&self) -> Result<u64, CliError> {
        match self.n {
            Some(0) => Err(CliError::Validation("N must be positive".into())),
            Some(n) => Ok(n),
            None => Err(missing("n")),
        }
    }

    pub fn samples(&self) -> Result<u64, CliError> {
        match self.samples {
            Some(0) => Err(CliError::Validation("samples must be positive".into())),
            Some(m) => Ok(m),
            None => Err(missing("samples")),
        }
    }

    pub fn rect(&self) -> Result<Rect, CliError> {
        parse_rect("rect", self.rect.unwrap_or(DEFAULT_RECT))
    }

    pub fn rect2(&self) -> Result<Rect, CliError> {
        match self.rect2 {
            Some(r) => parse_rect("rect2", r),
            None => self.rect(),
        }
    }

    pub fn t_grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = self.t_grid.clone().ok_or_else(|| missing("t_grid"))?;
        if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(CliError::Validation(format!("t_grid must be nonempty and positive, got {grid:?}")));
        }
        Ok(grid)
    }
}

fn parse_rect(field: &str, r: [f64; 4]) -> Result<Rect, CliError> {
    Rect::new(r[0], r[1], r[2], r[3]).map_err(|e| CliError::Validation(format!("{field}: {e}")))
}

/// Parses `x0,x1,y0,y1`.
pub fn rect_from_str(s: &str) -> Result<[f64; 4], String> {
    let v = float_list(s)?;
    <[f64; 4]>::try_from(v).map_err(|_| format!("expected x0,x1,y0,y1, got {s:?}"))
}

/// Parses a comma-separated list of reals, accepting forms like `1e6`.
pub fn float_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad number {x:?}"))).collect()
}

/// Parses a positive integer written as `1000000` or `1e6`.
pub fn count_from_str(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("bad count {s:?}"))?;
    if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(format!("count must be a nonnegative integer, got {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentManifest {
        let mut m = ExperimentManifest::new(Kind::Translate, 7);
        m.workers = Some(4);
        m.params.ifs = Some("builtin:cantor".into());
        m.params.t_grid = Some(vec![100.0, 1e3, 0.1 + 0.2]);
        m.params.rect = Some([0.0, 1.0, 0.5, 1.0]);
        m
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let m = sample();
        let text = m.to_toml().unwrap();
        let back = ExperimentManifest::from_toml(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_toml().unwrap(), text);
        assert_eq!(back.params.t_grid.unwrap()[2].to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn digest_ignores_scheduling() {
        let a = sample();
        let mut b = a.clone();
        b.workers = Some(16);
        b.out = Some("elsewhere".into());
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        b.seed = 8;
        assert_ne!(a.digest().unwrap(), b.digest().unwrap());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentManifest::from_toml("kind = \"walk\"\nseed = 1\n[params]\nstep = 3\n").unwrap_err();
        assert!(err.to_string().contains("step"), "{err}");
    }

    #[test]
    fn counts_and_rects_parse() {
        assert_eq!(count_from_str("1e6"), Ok(1_000_000));
        assert_eq!(count_from_str("250"), Ok(250));
        assert!(count_from_str("1.5").is_err());
        assert_eq!(rect_from_str("0,1,0.5,1"), Ok([0.0, 1.0, 0.5, 1.0]));
        assert!(rect_from_str("0,1").is_err());
    }

    #[test]
    fn bad_psi_names_the_field() {
        let p = Params { psi: Some("cubic:1".into()), ..Default::default() };
        assert!(p.psi().unwrap_err().to_string().contains("psi"));
    }
}
