//! CSV/JSON artifacts and the run report.

use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Format;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Normalization total of a distribution, written as the last row.
    pub total: Option<f64>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table { columns, rows: Vec::new(), total: None }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal, or fixed decimals when `precision` is set.
pub fn fmt_f64(x: f64, precision: Option<usize>) -> String {
    match precision {
        Some(p) => format!("{x:.p$}"),
        None => format!("{x}"),
    }
}

fn fmt_cell(c: &Cell, precision: Option<usize>) -> String {
    match c {
        Cell::Num(x) => fmt_f64(*x, precision),
        Cell::Int(i) => i.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}

pub fn to_csv(t: &Table, precision: Option<usize>) -> String {
    let mut out = t.columns.join(",");
    out.push('\n');
    for r in &t.rows {
        let cells: Vec<String> = r.iter().map(|c| fmt_cell(c, precision)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    if let Some(total) = t.total {
        let mut cells = vec![String::new(); t.columns.len()];
        cells[0] = "total".into();
        *cells.last_mut().expect("non-empty header") = fmt_f64(total, precision);
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn json_num(x: f64, precision: Option<usize>) -> Value {
    match precision {
        Some(_) => fmt_f64(x, precision).parse::<f64>().map_or(Value::Null, |v| json!(v)),
        None if x.is_finite() => json!(x),
        None => Value::Null,
    }
}

fn cell_json(c: &Cell, precision: Option<usize>) -> Value {
    match c {
        Cell::Num(x) => json_num(*x, precision),
        Cell::Int(i) => json!(i),
        Cell::Text(s) => json!(s),
        Cell::Empty => Value::Null,
    }
}

pub fn table_json(t: &Table, precision: Option<usize>, envelope: Value) -> Value {
    let rows: Vec<Value> = t.rows.iter().map(|r| Value::Array(r.iter().map(|c| cell_json(c, precision)).collect())).collect();
    json!({
        "meta": envelope,
        "columns": t.columns,
        "rows": rows,
        "total": t.total.map(|x| json_num(x, precision)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

/// One named invariant or measured quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    /// Upper bound on `value`, or the target for slope checks.
    pub tolerance: Option<f64>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        let ok = value <= tol;
        Check { name: name.into(), value: Some(value), tolerance: Some(tol), status: pass_if(ok), detail: None }
    }

    pub fn holds(name: impl Into<String>, ok: bool, detail: Option<String>) -> Self {
        Check { name: name.into(), value: None, tolerance: None, status: pass_if(ok), detail }
    }

    pub fn measured(name: impl Into<String>, value: f64) -> Self {
        Check { name: name.into(), value: Some(value), tolerance: None, status: Status::Pass, detail: None }
    }

    pub fn skipped(name: impl Into<String>, value: Option<f64>, why: impl Into<String>) -> Self {
        Check { name: name.into(), value, tolerance: None, status: Status::Skip, detail: Some(why.into()) }
    }

    pub fn failed(name: impl Into<String>, why: impl Into<String>) -> Self {
        Check { name: name.into(), value: None, tolerance: None, status: Status::Fail, detail: Some(why.into()) }
    }
}

pub fn pass_if(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisResult {
    pub name: String,
    pub op: &'static str,
    pub tags: Vec<&'static str>,
    pub checks: Vec<Check>,
    /// Scalar tracked by `sweep`.
    pub metric: Option<f64>,
    pub table: Option<Table>,
}

impl AnalysisResult {
    pub fn status(&self) -> Status {
        if self.checks.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else if !self.checks.is_empty() && self.checks.iter().all(|c| c.status == Status::Skip) {
            Status::Skip
        } else {
            Status::Pass
        }
    }

    pub fn violated(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| c.status == Status::Fail).map(|c| c.name.as_str()).collect()
    }
}

pub struct Writer {
    pub root: PathBuf,
    pub formats: Vec<Format>,
    pub precision: Option<usize>,
}

impl Writer {
    pub fn write(&self, rel: &str, contents: &str) -> Result<String, CliError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(rel.to_string())
    }

    /// Writes the analysis table in every configured format; returns the relative paths.
    pub fn artifacts(&self, scenario: &str, a: &AnalysisResult, envelope: Value) -> Result<Vec<String>, CliError> {
        let Some(t) = &a.table else { return Ok(vec![]) };
        let mut out = Vec::new();
        for f in &self.formats {
            match f {
                Format::Csv => out.push(self.write(&format!("{scenario}/{}.csv", a.name), &to_csv(t, self.precision))?),
                Format::Json => {
                    let v = table_json(t, self.precision, envelope.clone());
                    out.push(self.write(&format!("{scenario}/{}.json", a.name), &pretty(&v))?);
                }
            }
        }
        Ok(out)
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

pub fn report_json(scenario: &str, hash: &str, seed: u64, results: &[(AnalysisResult, Vec<String>)]) -> Value {
    let analyses: Vec<Value> = results
        .iter()
        .map(|(a, paths)| {
            json!({
                "name": a.name,
                "op": a.op,
                "tags": a.tags,
                "status": a.status(),
                "checks": a.checks,
                "violated": a.violated(),
                "artifacts": paths,
            })
        })
        .collect();
    let failed = results.iter().any(|(a, _)| a.status() == Status::Fail);
    json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario,
        "config_hash": hash,
        "seed": seed,
        "status": pass_if(!failed),
        "analyses": analyses,
    })
}

/// `PAW_OUTPUT_DIR` when set, else the configured directory.
pub fn output_root(configured: &str) -> PathBuf {
    match std::env::var_os("PAW_OUTPUT_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(configured),
    }
}
