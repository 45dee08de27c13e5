//! Plain-text interchange formats.
//!
//! Dense matrix: first line `rows,cols`, then one comma-separated line per
//! row. Observation set: first line `n1,n2,p`, then one `i,j,v` line per
//! observed entry with 0-based indices. Reals are written with 17
//! significant digits, which round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::dense::{self, Matrix};
use super::sparse::{Entry, ObservationSet};
use crate::error::{Error, Result};

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn matrix_to_string(m: &Matrix) -> String {
    let mut out = format!("{},{}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_real(m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn matrix_from_str(text: &str, source: &str) -> Result<Matrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "missing `rows,cols` header"))?;
    let dims = parse_fields::<usize>(header, source, hline + 1)?;
    let [rows, cols] = dims[..] else {
        return Err(Error::parse(source, hline + 1, "header must be `rows,cols`"));
    };
    let mut entries = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (ln, line) in lines {
        let row = parse_fields::<f64>(line, source, ln + 1)?;
        if row.len() != cols {
            return Err(Error::parse(
                source,
                ln + 1,
                format!("expected {cols} values, found {}", row.len()),
            ));
        }
        entries.extend(row);
        seen += 1;
    }
    if seen != rows {
        return Err(Error::parse(source, hline + 1, format!("header declares {rows} rows, found {seen}")));
    }
    dense::from_rows(rows, cols, &entries)
}

pub fn observations_to_string(obs: &ObservationSet) -> String {
    let mut out = format!("{},{},{}\n", obs.n1(), obs.n2(), fmt_real(obs.p()));
    for e in obs.entries() {
        let _ = writeln!(out, "{},{},{}", e.i, e.j, fmt_real(e.v));
    }
    out
}

pub fn observations_from_str(text: &str, source: &str) -> Result<ObservationSet> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "missing `n1,n2,p` header"))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    let [n1, n2, p] = fields[..] else {
        return Err(Error::parse(source, hline + 1, "header must be `n1,n2,p`"));
    };
    let n1 = parse_one::<usize>(n1, source, hline + 1)?;
    let n2 = parse_one::<usize>(n2, source, hline + 1)?;
    let p = parse_one::<f64>(p, source, hline + 1)?;
    let mut entries = Vec::new();
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [i, j, v] = fields[..] else {
            return Err(Error::parse(source, ln + 1, "expected `i,j,v`"));
        };
        entries.push(Entry {
            i: parse_one(i, source, ln + 1)?,
            j: parse_one(j, source, ln + 1)?,
            v: parse_one(v, source, ln + 1)?,
        });
    }
    ObservationSet::new(n1, n2, p, entries)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, matrix_to_string(m)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    matrix_from_str(&text, &path.display().to_string())
}

pub fn write_observations(path: &Path, obs: &ObservationSet) -> Result<()> {
    fs::write(path, observations_to_string(obs)).map_err(|e| Error::io(path, e))
}

pub fn read_observations(path: &Path) -> Result<ObservationSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    observations_from_str(&text, &path.display().to_string())
}

fn parse_one<T: std::str::FromStr>(field: &str, source: &str, line: usize) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(source, line, format!("cannot parse `{field}`")))
}

fn parse_fields<T: std::str::FromStr>(line: &str, source: &str, ln: usize) -> Result<Vec<T>> {
    line.split(',').map(|f| parse_one(f, source, ln)).collect()
}
