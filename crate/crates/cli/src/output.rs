//! Tabular artifacts. Every file carries the schema version, command, full
//! parameter set, seed and tolerances, and contains nothing run-dependent, so
//! identical inputs give identical bytes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use peakref::ModelParams;
use serde::Serialize;
use serde_json::Value;

use crate::config::Format;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
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

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub schema_version: u32,
    pub command: String,
    pub params: ModelParams,
    pub seed: Option<u64>,
    pub tolerances: BTreeMap<String, f64>,
    /// Free-form key/value annotations, e.g. closure choices.
    pub notes: BTreeMap<String, String>,
}

impl Meta {
    pub fn new(command: &str, params: &ModelParams) -> Self {
        Meta {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            params: *params,
            seed: None,
            tolerances: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn tolerance(mut self, name: &str, v: f64) -> Self {
        self.tolerances.insert(name.to_string(), v);
        self
    }

    pub fn note(mut self, key: &str, v: impl Into<String>) -> Self {
        self.notes.insert(key.to_string(), v.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub meta: Meta,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(meta: Meta, columns: &[&'static str]) -> Self {
        Table {
            meta,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let j = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| &r[j]).collect())
    }

    /// CSV with `#`-prefixed metadata lines ahead of the header.
    pub fn to_csv(&self) -> CliResult<String> {
        let mut out = Vec::new();
        let m = &self.meta;
        let p = serde_json::to_string(&m.params).map_err(|e| CliError::Io(e.to_string()))?;
        let t = serde_json::to_string(&m.tolerances).map_err(|e| CliError::Io(e.to_string()))?;
        let seed = m.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        writeln!(out, "# schema_version: {}", m.schema_version).ok();
        writeln!(out, "# command: {}", m.command).ok();
        writeln!(out, "# params: {p}").ok();
        writeln!(out, "# seed: {seed}").ok();
        writeln!(out, "# tolerances: {t}").ok();
        for (k, v) in &m.notes {
            writeln!(out, "# {k}: {v}").ok();
        }
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn to_json(&self) -> CliResult<String> {
        to_json(self)
    }

    pub fn render(&self, format: Format) -> CliResult<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Pretty JSON with a trailing newline. Non-finite numbers become null.
pub fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    let value: Value = serde_json::to_value(v).map_err(|e| CliError::Io(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}
