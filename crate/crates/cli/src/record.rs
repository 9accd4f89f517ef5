//! Run records (`record.json`) and the plain-text summary built from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Bumped whenever the record layout changes incompatibly.
pub const RECORD_FORMAT: u32 = 1;

/// One pass/fail check of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub format: u32,
    pub tool_version: String,
    pub command: String,
    /// SHA-256 of the normalized configuration and seed.
    pub inputs_digest: String,
    pub seed: u64,
    /// CSV tables, relative to the run directory.
    pub csv: Vec<String>,
    /// Other artifacts (plots, verdict records), relative to the run directory.
    pub artifacts: Vec<String>,
    pub verdicts: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    /// Whether an eigendecomposition came from the cache, when one was needed.
    pub cache_hit: Option<bool>,
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn new(command: &str, inputs_digest: String, seed: u64) -> Self {
        Self {
            format: RECORD_FORMAT,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs_digest,
            seed,
            csv: Vec::new(),
            artifacts: Vec::new(),
            verdicts: BTreeMap::new(),
            checks: Vec::new(),
            cache_hit: None,
            wall_time_s: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug)]
pub enum ReportError {
    /// No records were named.
    Empty,
    Read { path: PathBuf, message: String },
    Version { path: PathBuf, found: u32 },
}

impl std::fmt::Display for ReportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReportError::Empty => write!(
                f,
                "usage: the [report] section needs `records = [...]` naming record.json files or run directories"
            ),
            ReportError::Read { path, message } => write!(f, "cannot read record {}: {message}", path.display()),
            ReportError::Version { path, found } => write!(
                f,
                "record {} has format {found}, this tool reads format {RECORD_FORMAT}",
                path.display()
            ),
        }
    }
}

impl std::error::Error for ReportError {}

/// Loads a record from a `record.json` path or a directory holding one.
pub fn load_record(path: &Path) -> Result<ResultRecord, ReportError> {
    let file = if path.is_dir() { path.join("record.json") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| ReportError::Read {
        path: file.clone(),
        message: e.to_string(),
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| ReportError::Read {
        path: file.clone(),
        message: e.to_string(),
    })?;
    let found = value.get("format").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != RECORD_FORMAT {
        return Err(ReportError::Version { path: file, found });
    }
    serde_json::from_value(value).map_err(|e| ReportError::Read {
        path: file,
        message: e.to_string(),
    })
}

/// Summary of a set of records.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
}

/// Aggregates verdicts and checks. `labels` name the records in the text.
pub fn report(records: &[(String, ResultRecord)]) -> Result<Summary, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut text = String::new();
    let mut checks = 0;
    let mut failures = 0;
    for (label, r) in records {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            text,
            "{status} {} [{label}] digest {} ({:.2}s)",
            r.command,
            &r.inputs_digest[..r.inputs_digest.len().min(12)],
            r.wall_time_s
        );
        for (k, v) in &r.verdicts {
            let _ = writeln!(text, "  verdict {k} = {v}");
        }
        for c in &r.checks {
            checks += 1;
            if !c.passed {
                failures += 1;
            }
            let _ = writeln!(text, "  {} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
        }
    }
    let _ = writeln!(
        text,
        "{} records, {checks} checks, {failures} failed",
        records.len()
    );
    Ok(Summary {
        text,
        passed: failures == 0,
        checks,
        failures,
    })
}
