//! Tables rendered as CSV or JSON, written to stdout or into the output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Rows under a fixed header. Cells are JSON values; `null` renders as an
/// empty CSV field.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(csv_field)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_json_rows(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self.header.iter().cloned().zip(row.iter().cloned()).collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

fn csv_field(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(csv_field).collect::<Vec<_>>().join(" "),
        other => other.to_string(),
    }
}

/// `f64` cell; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

/// A table plus scalar facts about it. In CSV mode the facts go to stderr as
/// `key: value` lines so stdout stays machine-readable; in JSON mode they sit
/// next to the rows.
#[derive(Debug, Clone)]
pub struct Report {
    pub name: String,
    pub table: Table,
    pub facts: Vec<(String, Value)>,
}

impl Report {
    pub fn new(name: &str, table: Table) -> Self {
        Self {
            name: name.to_string(),
            table,
            facts: Vec::new(),
        }
    }

    pub fn fact(&mut self, key: &str, value: Value) {
        self.facts.push((key.to_string(), value));
    }

    fn json(&self) -> String {
        let mut obj = Map::new();
        for (k, v) in &self.facts {
            obj.insert(k.clone(), v.clone());
        }
        obj.insert("rows".into(), self.table.to_json_rows());
        let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("json");
        s.push('\n');
        s
    }
}

pub struct Output {
    pub format: Format,
    pub dir: Option<PathBuf>,
}

impl Output {
    /// Prints the report, or writes `<dir>/<name>.<ext>` when a directory was given.
    pub fn emit(&self, report: &Report) -> Result<(), CliError> {
        let body = match self.format {
            Format::Csv => {
                for (k, v) in &report.facts {
                    eprintln!("{k}: {}", csv_field(v));
                }
                report.table.to_csv()
            }
            Format::Json => report.json(),
        };
        match &self.dir {
            Some(dir) => {
                let path = dir.join(format!("{}.{}", report.name, self.format.extension()));
                write_file(&path, &body)
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(body.as_bytes()).map_err(CliError::io("stdout"))
            }
        }
    }
}

pub fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    fs::write(path, body).map_err(CliError::io(path))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}
