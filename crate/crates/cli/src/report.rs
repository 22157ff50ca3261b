//! Report assembly and JSON/CSV emission.

use std::io::Write;

use anyhow::Result;
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Comparison against an independent oracle or a stated bound.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn close(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let pass = (value - expected).abs() <= tolerance;
        Self { name: name.into(), value, expected: Some(expected), tolerance: Some(tolerance), pass }
    }

    pub fn relative(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let pass = ((value - expected) / expected).abs() <= tolerance;
        Self { name: name.into(), value, expected: Some(expected), tolerance: Some(tolerance), pass }
    }

    pub fn holds(name: impl Into<String>, value: f64, pass: bool) -> Self {
        Self { name: name.into(), value, expected: None, tolerance: None, pass }
    }
}

pub type Row = Map<String, Value>;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: Value,
    pub results: Value,
    pub checks: Vec<Check>,
    /// Plot-ready table for CSV output; JSON output carries it in `results`.
    #[serde(skip)]
    pub table: Vec<Row>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, self)?;
                writeln!(out)?;
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                if let Some(first) = self.table.first() {
                    w.write_record(first.keys())?;
                }
                for row in &self.table {
                    w.write_record(row.values().map(cell))?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Builds a row from `(column, value)` pairs, keeping column order.
#[macro_export]
macro_rules! row {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = $crate::report::Row::new();
        $(m.insert($k.to_string(), serde_json::json!($v));)*
        m
    }};
}
