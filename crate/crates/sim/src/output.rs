use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Format};
use crate::error::SimError;

pub const TOOL: &str = "cqi-sim";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One table cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:e}"),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
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

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column (`NaN` for non-numeric cells).
    pub fn floats(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.column(name) else { return Vec::new() };
        self.rows
            .iter()
            .map(|r| match r[i] {
                Cell::Float(v) => v,
                Cell::Int(v) => v as f64,
                _ => f64::NAN,
            })
            .collect()
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub table: Table,
    pub diagnostics: Value,
    /// Parameters with every default filled in.
    pub resolved: Value,
}

/// Header block: tool, version, time and the resolved configuration.
pub fn header(cfg: &ExperimentConfig, art: &Artifact, refine: u32, generated_at: &str) -> Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "generated_at": generated_at,
        "refine": refine,
        "config": {
            "kind": cfg.kind,
            "params": art.resolved,
            "grid": cfg.grid,
            "seed": cfg.seed,
            "output": cfg.output,
        },
    })
}

pub fn now_rfc3339() -> String {
    humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string()
}

pub fn render(cfg: &ExperimentConfig, art: &Artifact, refine: u32, generated_at: &str) -> Result<String, SimError> {
    let head = header(cfg, art, refine, generated_at);
    match cfg.output.format {
        Format::Json => {
            let doc = json!({
                "header": head,
                "data": { "columns": art.table.columns, "rows": art.table.rows, "diagnostics": art.diagnostics },
            });
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| SimError::Internal(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut out = String::new();
            for key in ["tool", "version", "generated_at", "refine"] {
                let v = &head[key];
                out += &format!("# {key}: {}\n", v.as_str().map_or_else(|| v.to_string(), str::to_string));
            }
            out += &format!("# config: {}\n", head["config"]);
            out += &format!("# diagnostics: {}\n", art.diagnostics);
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
            let err = |e: csv::Error| SimError::Internal(e.to_string());
            w.write_record(&art.table.columns).map_err(err)?;
            for row in &art.table.rows {
                w.write_record(row.iter().map(Cell::csv)).map_err(err)?;
            }
            let bytes = w.into_inner().map_err(|e| SimError::Internal(e.to_string()))?;
            out += &String::from_utf8(bytes).map_err(|e| SimError::Internal(e.to_string()))?;
            Ok(out)
        }
    }
}

/// Output location: `output.path`, placed under `out_dir` when one is given.
pub fn destination(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> PathBuf {
    let p = PathBuf::from(&cfg.output.path);
    match out_dir {
        Some(d) if p.is_relative() => d.join(p),
        Some(d) => d.join(p.file_name().unwrap_or_default()),
        None => p,
    }
}

pub fn write(path: &Path, text: &str) -> Result<(), SimError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| SimError::config("output.path", e))?;
    }
    std::fs::write(path, text).map_err(|e| SimError::config("output.path", e))
}

/// File contents with the timestamp removed: the part that must be
/// identical between runs with the same config and seed.
pub fn data_payload(text: &str) -> String {
    if let Ok(mut v) = serde_json::from_str::<Value>(text) {
        if let Some(h) = v.get_mut("header").and_then(Value::as_object_mut) {
            h.remove("generated_at");
        }
        return v.to_string();
    }
    text.split_inclusive('\n').filter(|l| !l.starts_with("# generated_at:")).collect()
}
