//! Dense row-major datasets, point views, and text I/O.
//!
//! The on-disk format is one point per line with fields separated by
//! any run of spaces, commas, or tabs. Both LF and CRLF line endings
//! are accepted on load; output always uses LF. Values are written in
//! the shortest decimal form that round-trips a 64-bit float, so
//! `load(save(m))` reproduces `m` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Dense n-by-d matrix of 64-bit floats, one data point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from a flat row-major buffer.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::InvalidParameter(
                "matrix must have at least one column".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "buffer length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(|r| r.len()).unwrap_or(0);
        if cols == 0 {
            return Err(Error::InvalidParameter(
                "cannot infer column count from empty input".into(),
            ));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::InvalidParameter(format!(
                    "row {} has {} fields, expected {}",
                    i,
                    r.len(),
                    cols
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a slice. Panics if out of range; use [`Self::row_view`]
    /// for a checked variant.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Non-owning view of row `i`.
    pub fn row_view(&self, i: usize) -> Result<DataPoint<'_>> {
        if i >= self.rows {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.rows,
            });
        }
        Ok(DataPoint::new(self.row(i)))
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }
}

/// Lightweight view of one d-dimensional point. Never copies: it
/// borrows either a matrix row or a caller-owned buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint<'a> {
    coords: &'a [f64],
}

impl<'a> DataPoint<'a> {
    #[inline]
    pub fn new(coords: &'a [f64]) -> Self {
        Self { coords }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coords(&self) -> &'a [f64] {
        self.coords
    }
}

impl<'a> From<&'a [f64]> for DataPoint<'a> {
    fn from(coords: &'a [f64]) -> Self {
        Self::new(coords)
    }
}

impl<'a> From<&'a Vec<f64>> for DataPoint<'a> {
    fn from(coords: &'a Vec<f64>) -> Self {
        Self::new(coords.as_slice())
    }
}

/// One view per matrix row, in row order.
pub fn matrix_to_datapoints(m: &DenseMatrix) -> Vec<DataPoint<'_>> {
    m.iter_rows().map(DataPoint::new).collect()
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        let d = a - b;
        acc += d * d;
    }
    acc
}

/// Reads a space- or comma-separated matrix file, one point per line.
///
/// Trailing blank lines are ignored. Every remaining line must carry
/// the same number of finite numeric fields; violations are reported
/// with their 1-based line number. An empty file is an error because
/// the column count cannot be inferred.
pub fn load_matrix<P: AsRef<Path>>(path: P) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .collect();
    while matches!(lines.last(), Some((_, l)) if l.trim().is_empty()) {
        lines.pop();
    }
    if lines.is_empty() {
        return Err(parse_err(
            0,
            "empty matrix file: no rows to infer dimension".into(),
        ));
    }

    let mut cols = 0usize;
    let mut data = Vec::new();
    for &(lineno, line) in &lines {
        let mut fields = 0usize;
        for tok in line.split(|c| c == ' ' || c == ',' || c == '\t') {
            if tok.is_empty() {
                continue;
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("not a number: {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value: {tok:?}")));
            }
            data.push(v);
            fields += 1;
        }
        if cols == 0 {
            if fields == 0 {
                return Err(parse_err(lineno, "blank line inside matrix".into()));
            }
            cols = fields;
        } else if fields != cols {
            return Err(parse_err(
                lineno,
                format!("expected {cols} fields, found {fields}"),
            ));
        }
    }
    let rows = data.len() / cols;
    DenseMatrix::new(rows, cols, data)
}

/// Writes `m` as space-separated text, LF line endings, shortest
/// round-trip float formatting.
pub fn save_matrix<P: AsRef<Path>>(m: &DenseMatrix, path: P) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(m.rows() * m.cols() * 8);
    for row in m.iter_rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
