//! Matrix Market reader and writer.
//!
//! Reads `coordinate` and `array` files with `real` or `integer` values and
//! `general` or `symmetric` structure into a dense [`Matrix`]. Indices are
//! 1-based, `%` starts a comment line, and duplicate coordinate entries are
//! summed. In a symmetric file each entry is stored on both sides of the
//! diagonal regardless of which triangle it was written in.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::matrix::Matrix;

/// Largest order densified unless the caller says otherwise.
pub const DEFAULT_DENSIFY_LIMIT: usize = 20_000;

#[derive(Debug, thiserror::Error)]
pub enum MtxError {
    #[error("cannot read matrix file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unsupported Matrix Market format: {0}")]
    UnsupportedFormat(String),
    #[error("matrix order {n} exceeds the densify limit {limit}")]
    TooLarge { n: usize, limit: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
}

struct Header {
    layout: Layout,
    field: Field,
    symmetric: bool,
}

fn parse_error(line: usize, reason: impl Into<String>) -> MtxError {
    MtxError::Parse {
        line,
        reason: reason.into(),
    }
}

fn parse_header(line: &str) -> Result<Header, MtxError> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(parse_error(1, "missing %%MatrixMarket banner"));
    }
    if tokens.len() != 5 {
        return Err(parse_error(1, "banner needs object, format, field and symmetry"));
    }
    if tokens[1] != "matrix" {
        return Err(MtxError::UnsupportedFormat(format!("object '{}'", tokens[1])));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_error(1, format!("unknown format '{other}'"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "complex" | "pattern" => return Err(MtxError::UnsupportedFormat(format!("field '{}'", tokens[3]))),
        other => return Err(parse_error(1, format!("unknown field '{other}'"))),
    };
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        "skew-symmetric" | "hermitian" => {
            return Err(MtxError::UnsupportedFormat(format!("symmetry '{}'", tokens[4])))
        }
        other => return Err(parse_error(1, format!("unknown symmetry '{other}'"))),
    };
    Ok(Header {
        layout,
        field,
        symmetric,
    })
}

fn parse_usize(token: &str, line: usize, what: &str) -> Result<usize, MtxError> {
    token
        .parse()
        .map_err(|_| parse_error(line, format!("{what} '{token}' is not a non-negative integer")))
}

fn parse_value(token: &str, field: Field, line: usize) -> Result<f64, MtxError> {
    let v = match field {
        Field::Real => token.parse::<f64>().ok(),
        Field::Integer => token.parse::<i64>().ok().map(|v| v as f64),
    };
    match v {
        Some(v) if v.is_finite() => Ok(v),
        Some(_) => Err(parse_error(line, format!("value '{token}' is not finite"))),
        None => Err(parse_error(line, format!("cannot parse value '{token}'"))),
    }
}

/// Data lines of the file with their 1-based line numbers.
struct DataLines<R> {
    lines: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> DataLines<R> {
    fn next_line(&mut self) -> Result<Option<(usize, String)>, MtxError> {
        for line in self.lines.by_ref() {
            self.number += 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            return Ok(Some((self.number, trimmed.to_owned())));
        }
        Ok(None)
    }
}

/// Reads a square matrix of order at most `densify_limit`.
pub fn parse_matrix_market<R: BufRead>(reader: R, densify_limit: usize) -> Result<Matrix, MtxError> {
    let mut lines = reader.lines();
    let banner = match lines.next() {
        Some(line) => line?,
        None => return Err(parse_error(1, "empty file")),
    };
    let header = parse_header(&banner)?;
    let mut data = DataLines { lines, number: 1 };

    let (size_line, size) = data
        .next_line()?
        .ok_or_else(|| parse_error(data.number, "missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    let expected = if header.layout == Layout::Coordinate { 3 } else { 2 };
    if dims.len() != expected {
        return Err(parse_error(size_line, format!("size line needs {expected} integers")));
    }
    let rows = parse_usize(dims[0], size_line, "row count")?;
    let cols = parse_usize(dims[1], size_line, "column count")?;
    if rows != cols {
        return Err(MtxError::UnsupportedFormat(format!("matrix is {rows}x{cols}, not square")));
    }
    let n = rows;
    if n == 0 {
        return Err(parse_error(size_line, "matrix order must be positive"));
    }
    if n > densify_limit {
        return Err(MtxError::TooLarge { n, limit: densify_limit });
    }
    let mut a = Matrix::zeros(n, n);

    match header.layout {
        Layout::Coordinate => {
            let nnz = parse_usize(dims[2], size_line, "entry count")?;
            let capacity = if header.symmetric { n * (n + 1) / 2 } else { n * n };
            if nnz > capacity.saturating_mul(4) {
                return Err(parse_error(size_line, format!("entry count {nnz} is implausible for order {n}")));
            }
            for k in 0..nnz {
                let (line, text) = data
                    .next_line()?
                    .ok_or_else(|| parse_error(data.number, format!("expected {nnz} entries, found {k}")))?;
                let tokens: Vec<&str> = text.split_whitespace().collect();
                if tokens.len() != 3 {
                    return Err(parse_error(line, "entry needs row, column and value"));
                }
                let i = parse_usize(tokens[0], line, "row index")?;
                let j = parse_usize(tokens[1], line, "column index")?;
                if !(1..=n).contains(&i) || !(1..=n).contains(&j) {
                    return Err(parse_error(line, format!("index ({i}, {j}) outside 1..={n}")));
                }
                let v = parse_value(tokens[2], header.field, line)?;
                let (i, j) = (i - 1, j - 1);
                let sum = a[(i, j)] + v;
                if !sum.is_finite() {
                    return Err(parse_error(line, "duplicate entries sum to a non-finite value"));
                }
                a[(i, j)] = sum;
                if header.symmetric && i != j {
                    a[(j, i)] = sum;
                }
            }
        }
        Layout::Array => {
            for j in 0..n {
                let first = if header.symmetric { j } else { 0 };
                for i in first..n {
                    let (line, text) = data
                        .next_line()?
                        .ok_or_else(|| parse_error(data.number, "array data ends early"))?;
                    let mut tokens = text.split_whitespace();
                    let v = parse_value(tokens.next().unwrap_or(""), header.field, line)?;
                    if tokens.next().is_some() {
                        return Err(parse_error(line, "array entry must be a single value"));
                    }
                    a[(i, j)] = v;
                    if header.symmetric {
                        a[(j, i)] = v;
                    }
                }
            }
        }
    }
    if let Some((line, _)) = data.next_line()? {
        return Err(parse_error(line, "unexpected data after the last entry"));
    }
    Ok(a)
}

pub fn load_matrix_market(path: &Path, densify_limit: usize) -> Result<Matrix, MtxError> {
    parse_matrix_market(BufReader::new(File::open(path)?), densify_limit)
}

/// Writes the lower triangle of `a` as a `coordinate real symmetric` file,
/// skipping zeros.
pub fn write_matrix_market<W: Write>(a: &Matrix, mut out: W) -> std::io::Result<()> {
    let n = a.rows();
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j..n {
            if a[(i, j)] != 0.0 {
                entries.push((i, j, a[(i, j)]));
            }
        }
    }
    writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(out, "{n} {n} {}", entries.len())?;
    for (i, j, v) in entries {
        writeln!(out, "{} {} {v:e}", i + 1, j + 1)?;
    }
    Ok(())
}
