//! Tabular experiment reports with per-row provenance and a schema.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::grid::Grid;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One CSV cell. Reals print in shortest round-trip form.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Real(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Cell::Int(_) | Cell::Real(_) => 0,
            Cell::Text(_) => 1,
        }
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Cell::Int(a), Cell::Int(b)) => a.cmp(b),
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
            _ => match (self.as_f64(), other.as_f64()) {
                (Some(a), Some(b)) => a.total_cmp(&b),
                _ => self.rank().cmp(&other.rank()),
            },
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Real(v) if v.is_infinite() => f.write_str(if *v > 0.0 { "inf" } else { "-inf" }),
            Cell::Real(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Measured,
    Skipped,
    Diagnostic,
    NotReproducible,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Measured => "measured",
            Provenance::Skipped => "skipped",
            Provenance::Diagnostic => "diagnostic",
            Provenance::NotReproducible => "not-reproducible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub description: String,
}

impl Column {
    pub fn new(name: &str, description: &str) -> Self {
        Self {
            name: name.to_string(),
            description: description.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub params: Vec<Cell>,
    pub values: Vec<Cell>,
    pub provenance: Provenance,
}

/// Description of one report, emitted next to the CSV files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSchema {
    pub experiment: String,
    pub file: String,
    pub tool_version: String,
    pub metadata: BTreeMap<String, String>,
    pub parameter_columns: Vec<Column>,
    pub value_columns: Vec<Column>,
    pub provenance_values: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub metadata: BTreeMap<String, String>,
    pub param_columns: Vec<Column>,
    pub value_columns: Vec<Column>,
    pub rows: Vec<ReportRow>,
    pub tool_version: String,
}

/// Shape, resolution, spacing and related facts about the grid.
pub fn domain_metadata(grid: &Grid) -> BTreeMap<String, String> {
    let spec = grid.spec();
    let mut m = BTreeMap::new();
    m.insert("shape".into(), spec.shape.name().into());
    m.insert("dim".into(), grid.dim().to_string());
    m.insert("resolution".into(), spec.resolution.to_string());
    m.insert("unknowns".into(), grid.len().to_string());
    m.insert(
        "extents".into(),
        spec.extents
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join("x"),
    );
    m.insert(
        "h".into(),
        grid.spacing()
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join("x"),
    );
    m.insert(
        "potential".into(),
        format!("{:?}:{}", spec.potential.kind, spec.potential.amplitude).to_lowercase(),
    );
    m.insert("domain_class".into(), spec.shape.intended_class().into());
    m.insert(
        "dyadic_truncation".into(),
        "sums over j cover the active range only; exact on the grid, continuum fidelity not asserted".into(),
    );
    m
}

impl ExperimentReport {
    pub fn new(
        name: &str,
        metadata: BTreeMap<String, String>,
        params: Vec<Column>,
        values: Vec<Column>,
    ) -> Self {
        Self {
            name: name.to_string(),
            metadata,
            param_columns: params,
            value_columns: values,
            rows: Vec::new(),
            tool_version: TOOL_VERSION.to_string(),
        }
    }

    pub fn push(&mut self, params: Vec<Cell>, values: Vec<Cell>, provenance: Provenance) {
        assert_eq!(
            params.len(),
            self.param_columns.len(),
            "parameter arity of {}",
            self.name
        );
        assert_eq!(
            values.len(),
            self.value_columns.len(),
            "value arity of {}",
            self.name
        );
        self.rows.push(ReportRow {
            params,
            values,
            provenance,
        });
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    /// Stable sort by the parameter tuple.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.params
                .iter()
                .zip(&b.params)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        });
    }

    fn index(columns: &[Column], name: &str) -> Option<usize> {
        columns.iter().position(|c| c.name == name)
    }

    pub fn param(&self, row: &ReportRow, name: &str) -> Option<Cell> {
        Self::index(&self.param_columns, name).map(|i| row.params[i].clone())
    }

    pub fn value(&self, row: &ReportRow, name: &str) -> Option<Cell> {
        Self::index(&self.value_columns, name).map(|i| row.values[i].clone())
    }

    /// Numeric value column of a row, `None` when absent or textual.
    pub fn number(&self, row: &ReportRow, name: &str) -> Option<f64> {
        self.value(row, name)
            .or_else(|| self.param(row, name))
            .and_then(|c| c.as_f64())
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn header(&self) -> Vec<String> {
        self.param_columns
            .iter()
            .chain(&self.value_columns)
            .map(|c| c.name.clone())
            .chain(std::iter::once("provenance".to_string()))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .quote_style(csv::QuoteStyle::Never)
            .from_writer(out);
        wtr.write_record(self.header())?;
        for row in &self.rows {
            let record: Vec<String> = row
                .params
                .iter()
                .chain(&row.values)
                .map(|c| c.to_string())
                .chain(std::iter::once(row.provenance.name().to_string()))
                .collect();
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("cells are UTF-8")
    }

    pub fn schema(&self) -> ReportSchema {
        ReportSchema {
            experiment: self.name.clone(),
            file: self.file_name(),
            tool_version: self.tool_version.clone(),
            metadata: self.metadata.clone(),
            parameter_columns: self.param_columns.clone(),
            value_columns: self.value_columns.clone(),
            provenance_values: vec!["measured", "skipped", "diagnostic", "not-reproducible"],
        }
    }
}
