//! Report envelopes and their JSON/CSV serialisation.
//!
//! The files written by [`emit_reports`] depend only on the configuration,
//! the seed and the tool version. Wall-clock time goes to a separate
//! `*.timing.json` file so that the envelope and tables stay byte-identical
//! across runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig};
use crate::error::{Error, Result};
use crate::mc::McEstimate;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub status: Status,
    pub detail: String,
}

impl Check {
    pub fn new(id: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            status: if passed { Status::Pass } else { Status::Fail },
            detail: detail.into(),
        }
    }
}

/// How a number was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Exact,
    ClosedForm,
    Quadrature,
    MonteCarlo,
    Fit,
}

/// A numeric result with its provenance tag and, when random, an error bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr: Option<f64>,
    pub tag: Tag,
}

impl Quantity {
    pub fn exact(name: impl Into<String>, value: f64, tag: Tag) -> Self {
        debug_assert!(tag != Tag::MonteCarlo);
        Self {
            name: name.into(),
            value,
            stderr: None,
            tag,
        }
    }

    pub fn estimate(name: impl Into<String>, est: McEstimate) -> Self {
        Self {
            name: name.into(),
            value: est.value,
            stderr: Some(est.stderr),
            tag: Tag::MonteCarlo,
        }
    }

    pub fn with_error(name: impl Into<String>, value: f64, stderr: f64, tag: Tag) -> Self {
        Self {
            name: name.into(),
            value,
            stderr: Some(stderr),
            tag,
        }
    }
}

/// A CSV-ready table with a frozen header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, headers: &[&str]) -> Self {
        Self {
            name: name.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; panics if its width does not match the header.
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.headers.len(), "row width differs from the header of `{}`", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String]| cells.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "{}", line(&self.headers));
        for r in &self.rows {
            let _ = writeln!(out, "{}", line(r));
        }
        out
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_owned()
    }
}

/// Shortest round-trip decimal form of a float.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub schema_version: u32,
    pub tool_version: String,
    pub subcommand: String,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub quantities: Vec<Quantity>,
    pub tables: Vec<Table>,
    /// Subcommand-specific structured results.
    pub details: serde_json::Value,
    /// Seconds spent; kept out of the deterministic files.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

impl ReportEnvelope {
    pub fn new(subcommand: &str, config: &RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_owned(),
            subcommand: subcommand.to_owned(),
            config: config.clone(),
            checks: Vec::new(),
            quantities: Vec::new(),
            tables: Vec::new(),
            details: serde_json::Value::Null,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| c.status == Status::Fail)
            .map(|c| c.id.as_str())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Writes `<subcommand>.json` (always), one `<subcommand>-<table>.csv` per
/// table when CSV is requested, and `<subcommand>.timing.json`.
pub fn emit_reports(env: &ReportEnvelope, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut written = Vec::new();
    let json = dir.join(format!("{}.json", env.subcommand));
    write(&json, &env.to_json()?)?;
    written.push(json);
    if formats.contains(&Format::Csv) {
        for t in &env.tables {
            let path = dir.join(format!("{}-{}.csv", env.subcommand, t.name));
            write(&path, &t.to_csv())?;
            written.push(path);
        }
    }
    let timing = dir.join(format!("{}.timing.json", env.subcommand));
    write(
        &timing,
        &format!("{{\n  \"wall_clock_seconds\": {}\n}}\n", num(env.wall_clock_seconds)),
    )?;
    written.push(timing);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_and_headers() {
        let mut t = Table::new("scan", &["epsilon", "note"]);
        t.push(vec![num(0.01), "a,b".into()]);
        assert_eq!(t.to_csv(), "epsilon,note\n0.01,\"a,b\"\n");
    }

    #[test]
    fn envelope_round_trip_and_emit() {
        let cfg = RunConfig::minimal(5).unwrap();
        let mut env = ReportEnvelope::new("constants", &cfg);
        env.checks.push(Check::new("c1", true, "ok"));
        env.quantities.push(Quantity::exact("gamma1", 325.0, Tag::ClosedForm));
        env.wall_clock_seconds = 1.5;
        let json = env.to_json().unwrap();
        assert!(!json.contains("wall_clock"));
        let back: ReportEnvelope = serde_json::from_str(&json).unwrap();
        assert_eq!(back.checks, env.checks);
        let dir = std::env::temp_dir().join(format!("blowup-report-{}", std::process::id()));
        let files = emit_reports(&env, &dir, &[Format::Json]).unwrap();
        assert_eq!(files.len(), 2);
        fs::remove_dir_all(dir).unwrap();
    }
}
