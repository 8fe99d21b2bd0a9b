//! Plain-text inputs and CSV outputs.
//!
//! Vectors are one value per line; matrices are headerless dense CSV.
//! Outputs use `.` decimals, LF line endings and Rust's shortest
//! round-trip float formatting, so they do not depend on the locale.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, Result};

fn parse_value(text: &str, path: &Path, line: usize, col: usize) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| {
        CliError::Input(format!(
            "{}: line {line}, field {col}: cannot parse {:?} as a number",
            path.display(),
            text.trim()
        ))
    })?;
    if !v.is_finite() {
        return Err(CliError::Input(format!(
            "{}: line {line}, field {col}: value is not finite",
            path.display()
        )));
    }
    Ok(v)
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        values.push(parse_value(line, path, i + 1, 1)?);
    }
    if values.is_empty() {
        return Err(CliError::Input(format!("{}: no values", path.display())));
    }
    Ok(DVector::from_vec(values))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| parse_value(field, path, i + 1, j + 1))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || ncols == 0 {
        return Err(CliError::Input(format!("{}: empty matrix", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Shortest round-trip form; scientific notation outside `[1e-5, 1e16)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Collects rows and writes them in one go.
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    trailer: Option<String>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            trailer: None,
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// A comment line written after the rows.
    pub fn set_trailer(&mut self, line: impl Into<String>) {
        self.trailer = Some(line.into());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io_err = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
        writer.write_record(&self.header).map_err(io_err)?;
        for row in &self.rows {
            writer.write_record(row).map_err(io_err)?;
        }
        let mut bytes = writer
            .into_inner()
            .map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
        if let Some(t) = &self.trailer {
            writeln!(bytes, "# {t}").map_err(|e| CliError::io(path, e))?;
        }
        fs::write(path, bytes).map_err(|e| CliError::io(path, e))
    }
}
