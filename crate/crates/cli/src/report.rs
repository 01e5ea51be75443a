//! Report envelope and writers for `report.json` and CSV series.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::commands::Payload;
use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Milliseconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub created_unix_ms: u128,
    pub seed: u64,
    pub config: RunConfig,
    pub payload: Payload,
}

impl ReportBundle {
    pub fn new(command: &str, config: &RunConfig, payload: Payload) -> Self {
        let created_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        Self {
            schema_version: SCHEMA_VERSION,
            tool: "osr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            created_unix_ms,
            seed: config.run.seed,
            config: config.clone(),
            payload,
        }
    }
}

/// A CSV file to be written next to `report.json`.
pub struct CsvSeries {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvSeries {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        self.rows.push(row.into_iter().map(|s| s.to_string()).collect());
    }
}

/// Shortest round-tripping form, in exponent notation for very small or
/// large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

pub fn opt_int(v: Option<u64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Writes `report.json` and, if requested, the CSV series. Returns the paths written.
pub fn write_outputs(dir: &Path, bundle: &ReportBundle, csv: &[CsvSeries], with_csv: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let json_path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(bundle)?;
    text.push('\n');
    fs::write(&json_path, text).with_context(|| format!("writing {}", json_path.display()))?;
    written.push(json_path);
    if with_csv {
        for series in csv {
            let path = dir.join(format!("{}.csv", series.name));
            let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
            w.write_record(&series.header)?;
            for row in &series.rows {
                w.write_record(row)?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}
