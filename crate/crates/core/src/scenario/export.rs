//! CSV and JSON writers for the trace family and the budget report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TraceId, TraceSet};
use crate::budget::BudgetReport;
use crate::error::{Error, Result};
use crate::noise::{FrequencyGrid, Spectrum, SpectrumUnit};

pub const TRACE_SCHEMA_VERSION: u32 = 1;
pub const BUDGET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Fixed-point rendering with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() {
            "0".into()
        } else {
            x.to_string()
        };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// One row per grid point; every trace in its decibel unit.
pub fn traces_to_csv(traces: &TraceSet) -> Result<String> {
    let db: Vec<Spectrum<f64>> = traces
        .iter()
        .map(|(_, s)| s.to_db())
        .collect::<Result<_>>()?;
    let mut out = String::from("freq_hz");
    for id in TraceId::ALL {
        out.push(',');
        out.push_str(id.key());
    }
    out.push('\n');
    for (i, f) in traces.grid().points().iter().enumerate() {
        out.push_str(&format_sig6(*f));
        for s in &db {
            let _ = write!(out, ",{}", format_sig6(s.values()[i]));
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRecord {
    role: String,
    unit: String,
    db_unit: String,
    linear: Vec<f64>,
    db: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceDocument {
    schema_version: u32,
    grid_hz: Vec<f64>,
    traces: BTreeMap<String, TraceRecord>,
}

pub fn traces_to_json(traces: &TraceSet) -> Result<String> {
    let mut map = BTreeMap::new();
    for (id, s) in traces.iter() {
        let db = s.to_db()?;
        map.insert(
            id.key().to_string(),
            TraceRecord {
                role: id.role().to_string(),
                unit: s.unit().label().to_string(),
                db_unit: db.unit().label().to_string(),
                linear: s.values_f64(),
                db: db.values_f64(),
            },
        );
    }
    let doc = TraceDocument {
        schema_version: TRACE_SCHEMA_VERSION,
        grid_hz: traces.grid().points().to_vec(),
        traces: map,
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

/// Parses a document written by [`traces_to_json`].
pub fn read_traces_json(text: &str) -> Result<TraceSet> {
    let doc: TraceDocument = serde_json::from_str(text)?;
    if doc.schema_version != TRACE_SCHEMA_VERSION {
        return Err(Error::structural(format!(
            "unsupported trace schema {}",
            doc.schema_version
        )));
    }
    let grid = FrequencyGrid::new(doc.grid_hz)?;
    let mut records = doc.traces;
    let traces = TraceId::ALL
        .iter()
        .map(|id| {
            let rec = records
                .remove(id.key())
                .ok_or_else(|| Error::structural(format!("missing {}", id.key())))?;
            let unit = SpectrumUnit::from_label(&rec.unit)
                .ok_or_else(|| Error::structural(format!("unknown unit {}", rec.unit)))?;
            Spectrum::new(grid.clone(), rec.linear, unit)
        })
        .collect::<Result<Vec<_>>>()?;
    TraceSet::new(traces)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn export_traces(traces: &TraceSet, path: &Path, format: OutputFormat) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => traces_to_csv(traces)?,
        OutputFormat::Json => traces_to_json(traces)?,
    };
    write(path, &text)
}

#[derive(Serialize)]
struct BudgetDocument<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a BudgetReport,
}

pub fn budget_to_json(report: &BudgetReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&BudgetDocument {
        schema_version: BUDGET_SCHEMA_VERSION,
        report,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn export_budget(report: &BudgetReport, path: &Path) -> Result<()> {
    write(path, &budget_to_json(report)?)
}
