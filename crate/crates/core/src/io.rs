//! Plain-text matrix and vector files.
//!
//! The first non-empty line holds the dimensions (`rows cols` for a matrix,
//! `len` for a vector); the remaining whitespace-separated tokens are the
//! entries in row-major order. Lines starting with `#` are ignored.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn tokens(text: &str) -> (Option<&str>, impl Iterator<Item = &str>) {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next();
    (header, lines.flat_map(str::split_whitespace))
}

fn parse_dims(header: Option<&str>, expected: usize) -> Result<Vec<usize>> {
    let header = header.ok_or_else(|| Error::Parse("empty file".into()))?;
    let dims = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| Error::Parse(format!("bad dimension `{t}`"))))
        .collect::<Result<Vec<_>>>()?;
    if dims.len() != expected {
        return Err(Error::Parse(format!("expected {expected} dimension(s) on the first line, got `{header}`")));
    }
    Ok(dims)
}

fn parse_values<'a>(body: impl Iterator<Item = &'a str>, count: usize) -> Result<Vec<f64>> {
    let values = body
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{t}`"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != count {
        return Err(Error::Parse(format!("expected {count} entries, found {}", values.len())));
    }
    Ok(values)
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let (header, body) = tokens(text);
    let dims = parse_dims(header, 2)?;
    let values = parse_values(body, dims[0] * dims[1])?;
    Ok(DMatrix::from_row_slice(dims[0], dims[1], &values))
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let (header, body) = tokens(text);
    let dims = parse_dims(header, 1)?;
    parse_values(body, dims[0])
}

/// Full-precision rendering; every value parses back exactly.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn format_vector(v: &[f64]) -> String {
    let body: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
    format!("{}\n{}\n", v.len(), body.join(" "))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    parse_vector(&std::fs::read_to_string(path)?)
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    std::fs::write(path, format_vector(v))?;
    Ok(())
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, format_matrix(m))?;
    Ok(())
}
