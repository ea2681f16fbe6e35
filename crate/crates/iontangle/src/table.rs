//! CSV tables with `#`-prefixed unit headers.

use std::io::Write;
use std::path::Path;

use crate::error::RunError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    /// Numbers are written with 10 significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => format!("{x:.9e}"),
            Cell::Num(x) => format!("{x}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(n) => Some(*n as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<Option<usize>> for Cell {
    fn from(n: Option<usize>) -> Self {
        n.map_or(Cell::Empty, Cell::from)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(file: &str) -> Self {
        Self { file: file.to_string(), columns: Vec::new(), rows: Vec::new() }
    }

    pub fn column(mut self, name: &str, unit: &str, description: &str) -> Self {
        self.columns.push(Column { name: name.into(), unit: unit.into(), description: description.into() });
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Numeric values of one column; non-numeric cells become NaN.
    pub fn values(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.index(name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<(), RunError> {
        for c in &self.columns {
            writeln!(out, "# {} [{}]: {}", c.name, c.unit, c.description)?;
        }
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| RunError::Io(std::io::Error::other(e));
        w.write_record(self.columns.iter().map(|c| c.name.as_str())).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        let f = std::fs::File::create(dir.join(&self.file))?;
        self.write_to(std::io::BufWriter::new(f))
    }
}
