//! CSV emission and parsing. One comment line `# schema=1`, a header row,
//! then data rows; floats carry 17 significant digits so every value
//! round-trips losslessly.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

pub const SCHEMA_LINE: &str = "# schema=1";

/// A CSV cell: empty, integer, float, or bare text (no commas or quotes).
#[derive(Debug, Clone)]
pub enum Cell {
    Empty,
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Int(v) => v.to_string(),
            // 17 significant digits: lossless f64 round-trip.
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => {
                debug_assert!(!s.contains(',') && !s.contains('\n'));
                s.clone()
            }
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

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Accumulates a CSV document with a fixed column set.
pub struct CsvDoc {
    columns: Vec<&'static str>,
    body: String,
}

impl CsvDoc {
    pub fn new(columns: &[&'static str]) -> Self {
        let mut body = String::new();
        writeln!(body, "{SCHEMA_LINE}").unwrap();
        writeln!(body, "{}", columns.join(",")).unwrap();
        CsvDoc {
            columns: columns.to_vec(),
            body,
        }
    }

    pub fn push_row(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns.len(), "row width mismatch");
        let rendered: Vec<String> = cells.iter().map(Cell::render).collect();
        writeln!(self.body, "{}", rendered.join(",")).unwrap();
    }

    pub fn into_string(self) -> String {
        self.body
    }
}

/// Parsed CSV: header plus rows of raw string cells.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Parse a CSV document, skipping `#` comment lines. Errors carry the
/// 1-based line number.
pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        match &columns {
            None => columns = Some(cells),
            Some(header) => {
                if cells.len() != header.len() {
                    bail!(
                        "line {lineno}: expected {} cells, found {}",
                        header.len(),
                        cells.len()
                    );
                }
                rows.push(cells);
            }
        }
    }
    let columns = columns.context("missing header row")?;
    Ok(CsvTable { columns, rows })
}
