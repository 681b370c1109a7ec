//! Canonical JSON and CSV report files.
//!
//! JSON objects are written with sorted keys and shortest round-trip
//! floats, so equal reports produce equal bytes.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Row-oriented view of a report.
///
/// The default is a single row whose columns are the report's top-level
/// scalar fields in key order; nested values are embedded as JSON text.
pub trait Tabular: Serialize {
    fn header(&self) -> Vec<String> {
        match serde_json::to_value(self) {
            Ok(Value::Object(map)) => map.keys().cloned().collect(),
            _ => vec!["value".to_string()],
        }
    }

    fn records(&self) -> Vec<Vec<String>> {
        match serde_json::to_value(self) {
            Ok(Value::Object(map)) => vec![map.values().map(cell).collect()],
            Ok(other) => vec![vec![cell(&other)]],
            Err(_) => Vec::new(),
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Shortest round-trip decimal for CSV cells.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn to_canonical_json<T: Serialize + ?Sized>(report: &T) -> Result<String> {
    let value = serde_json::to_value(report).map_err(|e| Error::invalid(format!("report: {e}")))?;
    let mut text =
        serde_json::to_string_pretty(&value).map_err(|e| Error::invalid(format!("report: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn to_csv<T: Tabular + ?Sized>(report: &T) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record(report.header()).map_err(io)?;
    for r in report.records() {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_report<T: Tabular + ?Sized>(report: &T, path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Json => to_canonical_json(report)?,
        ReportFormat::Csv => to_csv(report)?,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a JSON report written by [`write_report`].
pub fn read_report<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

impl Tabular for crate::mean::MeanEstimate {}
impl Tabular for crate::diagnostics::PropertyReport {}
impl Tabular for crate::diagnostics::SmallBallReport {}

impl Tabular for crate::diagnostics::RatioReport {
    fn header(&self) -> Vec<String> {
        ["index", "sigma", "prop_a_worst", "prop_b_worst", "pass"]
            .map(String::from)
            .to_vec()
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.directions
            .iter()
            .map(|m| {
                vec![
                    m.index.to_string(),
                    fmt_f64(m.sigma),
                    m.prop_a_worst.map(fmt_f64).unwrap_or_default(),
                    fmt_f64(m.prop_b_worst),
                    m.pass.to_string(),
                ]
            })
            .collect()
    }
}
