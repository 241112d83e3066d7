//! CSV tables and JSON summaries, written atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA: &str = "klab.summary/1";

/// A CSV table with a fixed column order.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Failed(format!("csv: {e}"));
        w.write_record(&self.header).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row).map_err(fail)?;
        }
        w.into_inner().map_err(|e| CliError::Failed(format!("csv: {e}")))
    }
}

/// Formats a float so that it parses back to the same bits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        String::new()
    }
}

/// JSON summary of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub kind: String,
    pub claim: String,
    pub manifest_digest: String,
    pub seed: u64,
    pub parameters: Value,
    /// Number of CSV data rows.
    pub count: usize,
    pub estimates: Value,
}

impl Summary {
    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Failed(format!("json: {e}")))?;
        s.push('\n');
        Ok(s)
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Paths of the artifacts of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub json: PathBuf,
}

/// Writes `<kind>.csv` and `<kind>.json` into `dir`. Both are fully rendered
/// before either file is replaced.
pub fn emit(dir: &Path, table: &Table, summary: &Summary) -> Result<Artifacts, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let csv = table.to_csv()?;
    let json = summary.to_json()?;
    let out = Artifacts {
        csv: dir.join(format!("{}.csv", summary.kind)),
        json: dir.join(format!("{}.json", summary.kind)),
    };
    write_atomic(&out.csv, &csv)?;
    write_atomic(&out.json, json.as_bytes())?;
    Ok(out)
}
