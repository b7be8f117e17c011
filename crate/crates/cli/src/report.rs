//! Tabular reports rendered as JSON or sectioned CSV.

use std::fmt::Write as _;

use serde_json::{Map, Number, Value};
use uda_core::measures::MeasureValue;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u8> for Cell {
    fn from(v: u8) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<MeasureValue> for Cell {
    fn from(v: MeasureValue) -> Self {
        Cell::Float(v.as_f64())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Rounds to 12 significant digits; `-0` becomes `0`.
fn round12(v: f64) -> f64 {
    let r: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl Cell {
    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) if v.is_infinite() && *v > 0.0 => Value::from("Infinity"),
            Cell::Float(v) if v.is_infinite() => Value::from("-Infinity"),
            Cell::Float(v) => Number::from_f64(round12(*v)).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_infinite() && *v > 0.0 => "Infinity".into(),
            Cell::Float(v) if v.is_infinite() => "-Infinity".into(),
            Cell::Float(v) if v.is_nan() => String::new(),
            Cell::Float(v) => round12(*v).to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_columns(name: &str, columns: Vec<String>) -> Self {
        Self { name: name.into(), columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub command: &'static str,
    pub config: Vec<(String, Cell)>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Self { command, config: Vec::new(), tables: Vec::new() }
    }

    pub fn config(&mut self, key: &str, value: impl Into<Cell>) -> &mut Self {
        self.config.push((key.to_string(), value.into()));
        self
    }

    pub fn table(&mut self, table: Table) -> &mut Self {
        self.tables.push(table);
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }

    pub fn to_json(&self) -> String {
        let config: Map<String, Value> = self.config.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        let result: Map<String, Value> = self
            .tables
            .iter()
            .map(|t| {
                let rows = t
                    .rows
                    .iter()
                    .map(|r| Value::Object(t.columns.iter().cloned().zip(r.iter().map(Cell::to_json)).collect()))
                    .collect();
                (t.name.clone(), Value::Array(rows))
            })
            .collect();
        let mut root = Map::new();
        root.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
        root.insert("command".into(), Value::from(self.command));
        root.insert("config".into(), Value::Object(config));
        root.insert("result".into(), Value::Object(result));
        let mut out = serde_json::to_string_pretty(&Value::Object(root)).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# schema_version: {SCHEMA_VERSION}");
        let _ = writeln!(out, "# command: {}", self.command);
        for (k, v) in &self.config {
            let _ = writeln!(out, "# config: {k}={}", v.to_csv());
        }
        for t in &self.tables {
            let _ = writeln!(out, "# table: {}", t.name);
            let _ = writeln!(out, "{}", t.columns.join(","));
            for r in &t.rows {
                let _ = writeln!(out, "{}", r.iter().map(Cell::to_csv).collect::<Vec<_>>().join(","));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("demo");
        r.config("seed", 7u64);
        let mut t = Table::new("values", &["name", "value"]);
        t.push(vec!["kl".into(), f64::INFINITY.into()]);
        t.push(vec!["third".into(), (1.0f64 / 3.0).into()]);
        t.push(vec!["a,b".into(), Cell::Empty]);
        r.table(t);
        r
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(round12(1.0 / 3.0), 0.333333333333);
        assert_eq!(round12(-0.0).to_bits(), 0.0f64.to_bits());
        assert_eq!(round12(0.125), 0.125);
    }

    #[test]
    fn infinity_is_a_string_in_both_formats() {
        let r = sample();
        assert!(r.to_json().contains("\"value\": \"Infinity\""));
        assert!(r.to_csv().contains("kl,Infinity"));
    }

    #[test]
    fn csv_quotes_commas() {
        assert!(sample().to_csv().contains("\"a,b\","));
    }

    #[test]
    fn json_keeps_column_order() {
        let json = sample().to_json();
        let (name, value) = (json.find("\"name\"").unwrap(), json.find("\"value\"").unwrap());
        assert!(name < value);
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["result"]["values"][1]["value"], 0.333333333333);
    }
}
