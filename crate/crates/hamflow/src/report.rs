//! Checks, tables and the files they are written to.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

/// A measured quantity against a threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub bound: Bound,
    pub pass: bool,
    #[serde(skip)]
    scalable: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check { name: name.into(), measured, threshold, bound: Bound::AtMost, pass: measured <= threshold, scalable: true }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check { name: name.into(), measured, threshold, bound: Bound::AtLeast, pass: measured >= threshold, scalable: true }
    }

    /// A boolean property, reported as 1 (holds) or 0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check { scalable: false, ..Check::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0) }
    }

    /// Whether this came from [`Check::holds`].
    pub fn is_flag(&self) -> bool {
        !self.scalable
    }

    /// Loosens (factor > 1) or tightens the threshold.
    pub fn scaled(mut self, factor: f64) -> Self {
        if !self.scalable {
            return self;
        }
        self.threshold = match self.bound {
            Bound::AtMost if self.threshold >= 0.0 => self.threshold * factor,
            Bound::AtMost => self.threshold / factor,
            Bound::AtLeast if self.threshold <= 0.0 => self.threshold * factor,
            Bound::AtLeast => self.threshold / factor,
        };
        self.pass = match self.bound {
            Bound::AtMost => self.measured <= self.threshold,
            Bound::AtLeast => self.measured >= self.threshold,
        };
        self
    }

    pub fn line(&self) -> String {
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        };
        format!("{} {:.3e} {op} {:.3e}", self.name, self.measured, self.threshold)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
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

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // shortest round-trip representation, so reruns are byte-identical
            Cell::Num(v) => format!("{v:e}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Two whitespace-separated columns, `#` header.
    pub fn write_plot(&self, path: &Path, x: &str, y: &str) -> Result<()> {
        let (Some(ix), Some(iy)) = (self.column(x), self.column(y)) else {
            return Ok(());
        };
        let mut out = format!("# {x} {y}\n");
        for r in &self.rows {
            if let (Cell::Num(a), Cell::Num(b)) = (&r[ix], &r[iy]) {
                out.push_str(&format!("{a:e} {b:e}\n"));
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Everything an experiment produced, before it touches the disk.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub name: String,
    pub kind: &'static str,
    pub table: Table,
    pub plot: Option<(String, String)>,
    pub checks: Vec<Check>,
    pub summary: serde_json::Map<String, serde_json::Value>,
    /// Raw grid field: values, shape and sidecar metadata.
    pub field: Option<(Vec<f64>, serde_json::Value)>,
}

impl ExperimentResult {
    pub fn new(name: &str, kind: &'static str, table: Table) -> Self {
        ExperimentResult { name: name.to_string(), kind, table, plot: None, checks: Vec::new(), summary: Default::default(), field: None }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).expect("summary value serializes"));
    }

    /// Writes `<name>.csv`, `<name>.summary.json`, the optional plot and raw field; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths = Vec::new();
        let csv_path = dir.join(format!("{}.csv", self.name));
        self.table.write_csv(&csv_path)?;
        paths.push(csv_path);
        if let Some((x, y)) = &self.plot {
            let p = dir.join(format!("{}.dat", self.name));
            self.table.write_plot(&p, x, y)?;
            paths.push(p);
        }
        if let Some((values, meta)) = &self.field {
            let p = dir.join(format!("{}.field.f64", self.name));
            let mut f = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
            let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
            f.write_all(&bytes).map_err(|e| Error::io(&p, e))?;
            paths.push(p);
            let p = dir.join(format!("{}.field.json", self.name));
            fs::write(&p, serde_json::to_string_pretty(meta)? + "\n").map_err(|e| Error::io(&p, e))?;
            paths.push(p);
        }
        let summary = serde_json::json!({
            "name": self.name,
            "experiment": self.kind,
            "passed": self.passed(),
            "checks": self.checks,
            "values": self.summary,
        });
        let p = dir.join(format!("{}.summary.json", self.name));
        fs::write(&p, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::io(&p, e))?;
        paths.push(p);
        Ok(paths)
    }
}
