use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One checked assertion of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub assertion: String,
    pub pass: bool,
}

/// Parameters, computed quantities and verdicts of one experiment. Maps are
/// ordered so that serialization is byte-stable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, Value>,
    pub quantities: BTreeMap<String, Value>,
    pub verdicts: Vec<Verdict>,
    pub seeds: Vec<u64>,
    /// Per-trial or per-parameter rows for the CSV summary.
    #[serde(default, skip_serializing_if = "Table::is_empty")]
    pub table: Table,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

impl ExperimentReport {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), ..Self::default() }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn quantity(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.quantities.insert(key.to_string(), value.into());
        self
    }

    pub fn check(&mut self, assertion: &str, pass: bool) -> bool {
        self.verdicts.push(Verdict { assertion: assertion.to_string(), pass });
        pass
    }

    /// True iff every recorded assertion passed.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// The table as CSV, or `key,value` lines of the quantities when the
    /// report has no table. Floats use 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.table.is_empty() {
            out.push_str("key,value\n");
            for (k, v) in &self.quantities {
                let _ = writeln!(out, "{},{}", k, csv_cell(v));
            }
        } else {
            out.push_str(&self.table.columns.join(","));
            out.push('\n');
            for row in &self.table.rows {
                let cells: Vec<String> = row.iter().map(csv_cell).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        out
    }
}

pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => csv_float(n.as_f64().unwrap_or(f64::NAN)),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => {
            let s = other.to_string();
            if s.contains([',', '"']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s
            }
        }
    }
}
