//! Serialized experiment output.
//!
//! A report regenerates byte-identically from the same config and seed at
//! any worker count: rows are emitted in trial order and every field is
//! deterministic. Wall-clock time is kept on the struct for operators but
//! never serialized.

use crate::error::Result;
use serde::Serialize;
use std::fmt::Write as _;
use std::time::Duration;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One measured quantity of one trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRow {
    pub trial: u64,
    pub seed: u64,
    /// Box side (or model size) the trial ran on.
    pub side: u64,
    pub quantity: String,
    pub value: f64,
}

/// Aggregated statistics for one quantity at one key (side, distance, ...).
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub quantity: String,
    pub key: f64,
    pub n: u64,
    pub mean: f64,
    pub median: f64,
    pub std_error: f64,
}

/// An empirical value paired with the formula it is checked against.
#[derive(Debug, Clone, Serialize)]
pub struct BoundComparison {
    pub quantity: String,
    pub key: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub reference: f64,
    /// Set when the comparison carries a pass criterion; `None` for purely
    /// exploratory pairs.
    pub passes: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub config: serde_json::Value,
    pub rows: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
    pub comparisons: Vec<BoundComparison>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(crate::error::Error::invalid(format!(
                "unknown format {other:?}, expected json or csv"
            ))),
        }
    }
}

impl Report {
    pub fn new(experiment: impl Into<String>, config: impl Serialize) -> Result<Self> {
        Ok(Report {
            schema_version: REPORT_SCHEMA_VERSION,
            experiment: experiment.into(),
            config: serde_json::to_value(config)
                .map_err(|e| crate::error::Error::invalid(format!("config echo: {e}")))?,
            rows: Vec::new(),
            summary: Vec::new(),
            comparisons: Vec::new(),
            wall_clock: Duration::ZERO,
        })
    }

    pub fn push_row(&mut self, trial: u64, seed: u64, side: u64, quantity: &str, value: f64) {
        self.rows.push(TrialRow {
            trial,
            seed,
            side,
            quantity: quantity.to_string(),
            value,
        });
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    /// Per-trial table with fixed, versioned columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# perclab-report-csv v{REPORT_SCHEMA_VERSION}");
        let _ = writeln!(out, "trial,seed,side,quantity,value");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.trial, r.seed, r.side, r.quantity, r.value);
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv(),
        }
    }

    pub fn write_to(&self, path: &std::path::Path, format: ReportFormat) -> Result<()> {
        std::fs::write(path, self.render(format))?;
        Ok(())
    }
}
