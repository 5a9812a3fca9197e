//! Versioned JSON and CSV reports.

use serde_json::{json, Map, Value};
use std::io::Write;

pub const SCHEMA: &str = "starszego/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// A single gated check under `--assert`.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance }
    }

    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub symbol: String,
    pub config: Map<String, Value>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub summary: Map<String, Value>,
    pub checks: Vec<Check>,
    pub assert_enabled: bool,
}

/// JSON number, with non-finite values mapped to `null`.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

impl Report {
    pub fn new(command: &str, symbol: &str, columns: Vec<&'static str>) -> Self {
        Self {
            command: command.into(),
            symbol: symbol.into(),
            config: Map::new(),
            columns,
            rows: Vec::new(),
            summary: Map::new(),
            checks: Vec::new(),
            assert_enabled: false,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
            .collect();
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| json!({"name": c.name, "value": num(c.value), "tolerance": num(c.tolerance), "passed": c.passed()}))
            .collect();
        json!({
            "schema": SCHEMA,
            "command": self.command,
            "symbol": self.symbol,
            "config": self.config,
            "columns": self.columns,
            "rows": rows,
            "summary": self.summary,
            "assert": {"enabled": self.assert_enabled, "passed": self.passed(), "checks": checks},
        })
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.to_json())?;
                writeln!(out)
            }
            Format::Csv => {
                writeln!(out, "# schema={SCHEMA} command={} symbol={}", self.command, self.symbol)?;
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns)?;
                for r in &self.rows {
                    w.write_record(r.iter().map(cell))?;
                }
                w.flush()
            }
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "nan".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
