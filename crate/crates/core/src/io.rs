//! CSV input/output for data matrices, responses, and weight matrices.
//!
//! Format: UTF-8, comma-separated, decimal point only. A header row is
//! auto-detected (first row whose fields do not all parse as numbers) and
//! skipped. Blank lines are ignored.

use std::path::Path;

use crate::data::{DataMatrix, SquareMatrix};
use crate::error::{Error, Result};

fn split_fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn all_numeric(fields: &[&str]) -> bool {
    !fields.is_empty() && fields.iter().all(|f| f.parse::<f64>().is_ok())
}

/// Parse CSV text into rows of numbers, skipping an optional header.
fn parse_rows(text: &str, what: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut first_data_row = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields = split_fields(line);
        if first_data_row && !all_numeric(&fields) {
            first_data_row = false; // header row
            continue;
        }
        first_data_row = false;
        let mut row = Vec::with_capacity(fields.len());
        for f in &fields {
            row.push(f.parse::<f64>().map_err(|_| {
                Error::parse(format!("{what}: line {}: '{f}' is not a number", lineno + 1))
            })?);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::parse(format!(
                    "{what}: line {} has {} fields, expected {w}",
                    lineno + 1,
                    row.len()
                )));
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(format!("{what}: no data rows")));
    }
    Ok(rows)
}

/// Parse an n×p data matrix from CSV text.
pub fn parse_data_csv(text: &str) -> Result<DataMatrix> {
    let rows = parse_rows(text, "data csv")?;
    let x = DataMatrix::from_rows(&rows)?;
    if !x.is_finite() {
        return Err(Error::parse("data csv: non-finite value".to_string()));
    }
    Ok(x)
}

/// Parse a single-column response from CSV text.
pub fn parse_response_csv(text: &str) -> Result<Vec<f64>> {
    let rows = parse_rows(text, "response csv")?;
    let mut y = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        if row.len() != 1 {
            return Err(Error::parse(format!(
                "response csv: row {} has {} fields, expected a single column",
                k + 1,
                row.len()
            )));
        }
        if !row[0].is_finite() {
            return Err(Error::parse("response csv: non-finite value".to_string()));
        }
        y.push(row[0]);
    }
    Ok(y)
}

/// Parse a p×p symmetric weight matrix from CSV text.
pub fn parse_weights_csv(text: &str) -> Result<SquareMatrix> {
    let rows = parse_rows(text, "weights csv")?;
    let p = rows.len();
    for (k, row) in rows.iter().enumerate() {
        if row.len() != p {
            return Err(Error::parse(format!(
                "weights csv: row {} has {} fields but there are {p} rows",
                k + 1,
                row.len()
            )));
        }
    }
    let w = SquareMatrix::from_rows(&rows)?;
    if w.asymmetry() > 1e-12 {
        return Err(Error::parse("weights csv: matrix is not symmetric".to_string()));
    }
    Ok(w)
}

pub fn read_data_csv(path: &Path) -> Result<DataMatrix> {
    parse_data_csv(&std::fs::read_to_string(path)?)
}

pub fn read_response_csv(path: &Path) -> Result<Vec<f64>> {
    parse_response_csv(&std::fs::read_to_string(path)?)
}

pub fn read_weights_csv(path: &Path) -> Result<SquareMatrix> {
    parse_weights_csv(&std::fs::read_to_string(path)?)
}

/// Serialize a data matrix as headerless CSV with full float precision.
pub fn data_to_csv(x: &DataMatrix) -> String {
    let mut out = String::new();
    for r in 0..x.n_rows() {
        for c in 0..x.n_cols() {
            if c > 0 {
                out.push(',');
            }
            // ryu-style shortest round-trip representation via Display
            out.push_str(&format!("{:?}", x.get(r, c)));
        }
        out.push('\n');
    }
    out
}

pub fn write_data_csv(path: &Path, x: &DataMatrix) -> Result<()> {
    std::fs::write(path, data_to_csv(x))?;
    Ok(())
}
