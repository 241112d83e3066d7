//! Manifest-driven experiment runner for `klab-core`.
//!
//! A run reads an [`ExperimentManifest`], executes it on a fixed-size worker
//! pool, and writes `<kind>.csv` and `<kind>.json` into the output directory.
//! The JSON summary depends only on the manifest and seed, never on the
//! worker count.

use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

pub mod emit;
pub mod experiments;
pub mod manifest;

pub use emit::{Artifacts, Summary, Table};
pub use manifest::{ExperimentManifest, Kind, Params};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    #[error("{0}")]
    Failed(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 2 for invalid input, 3 for resource limits, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Resource(_) => 3,
            _ => 1,
        }
    }
}

impl From<klab_core::Error> for CliError {
    fn from(e: klab_core::Error) -> Self {
        use klab_core::Error as E;
        match e {
            e if e.is_resource() => CliError::Resource(e.to_string()),
            E::Config(_) | E::Domain(_) | E::NonContracting { .. } => CliError::Validation(e.to_string()),
            e => CliError::Failed(e.to_string()),
        }
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub summary: Summary,
    pub table: Table,
    pub artifacts: Option<Artifacts>,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Runs the manifest and builds its summary without writing anything.
pub fn evaluate(manifest: &ExperimentManifest) -> Result<(Summary, Table, Option<String>), CliError> {
    let workers = manifest.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(CliError::Validation("workers must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Failed(format!("worker pool: {e}")))?;
    let outcome = pool.install(|| experiments::execute(manifest))?;
    let mut parameters = json!({ "manifest": manifest.params });
    if let (Some(extra), Some(obj)) = (outcome.resolved.as_object(), parameters.as_object_mut()) {
        obj.extend(extra.clone());
    }
    let summary = Summary {
        schema: emit::SCHEMA.into(),
        kind: manifest.kind.name().into(),
        claim: outcome.claim.into(),
        manifest_digest: manifest.digest()?,
        seed: manifest.seed,
        parameters,
        count: outcome.table.rows.len(),
        estimates: outcome.estimates,
    };
    Ok((summary, outcome.table, outcome.failed))
}

/// Runs the manifest and writes its artifacts into `manifest.out` (default `.`).
///
/// Artifacts are written only once the run has completed. A failed embedded
/// check still writes them and is then reported as [`CliError::Check`].
pub fn run(manifest: &ExperimentManifest) -> Result<RunReport, CliError> {
    let (summary, table, failed) = evaluate(manifest)?;
    let dir = manifest.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let artifacts = emit::emit(&dir, &table, &summary)?;
    if let Some(msg) = failed {
        return Err(CliError::Check(msg));
    }
    Ok(RunReport { summary, table, artifacts: Some(artifacts) })
}
