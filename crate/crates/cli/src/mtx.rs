//! Matrix Market coordinate files (`real` or `integer`, `general` or
//! `symmetric`).

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use bethe_gauss_core::gmrf::SparseMatrix;

#[derive(Debug, thiserror::Error)]
pub enum MtxError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl MtxError {
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Syntax { line, .. } => Some(*line),
            Self::Io(_) => None,
        }
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> MtxError {
    MtxError::Syntax { line, msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_header(line: &str) -> Result<Symmetry, MtxError> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(syntax(1, "missing %%MatrixMarket banner"));
    }
    if tokens.len() != 5 {
        return Err(syntax(1, "banner needs object, format, field and symmetry"));
    }
    if tokens[1] != "matrix" {
        return Err(syntax(1, format!("unsupported object '{}'", tokens[1])));
    }
    if tokens[2] != "coordinate" {
        return Err(syntax(1, format!("unsupported format '{}', expected coordinate", tokens[2])));
    }
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        "pattern" => return Err(syntax(1, "pattern matrices carry no values")),
        "complex" => return Err(syntax(1, "complex matrices are not supported")),
        other => return Err(syntax(1, format!("unknown field '{other}'"))),
    }
    match tokens[4].as_str() {
        "general" => Ok(Symmetry::General),
        "symmetric" => Ok(Symmetry::Symmetric),
        other => Err(syntax(1, format!("unsupported symmetry '{other}'"))),
    }
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize, MtxError> {
    tok.parse().map_err(|_| syntax(line, format!("bad {what} '{tok}'")))
}

/// Reads a square matrix. Entries must be unique; in symmetric files either
/// triangle may be given and is mirrored.
pub fn read_mtx<R: BufRead>(reader: R) -> Result<SparseMatrix, MtxError> {
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));
    let symmetry = match lines.next() {
        Some((_, l)) => parse_header(&l?)?,
        None => return Err(syntax(1, "empty file")),
    };
    let mut size: Option<(usize, usize)> = None;
    let mut matrix = SparseMatrix::new(0);
    let mut seen = BTreeSet::new();
    let mut last_line = 1;
    for (no, line) in lines {
        let line = line?;
        last_line = no;
        let body = line.trim();
        if body.is_empty() || body.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let Some((n, nnz)) = size else {
            if tokens.len() != 3 {
                return Err(syntax(no, "size line needs rows, columns and entry count"));
            }
            let rows = parse_usize(tokens[0], no, "row count")?;
            let cols = parse_usize(tokens[1], no, "column count")?;
            if rows != cols {
                return Err(syntax(no, format!("matrix is {rows}x{cols}, not square")));
            }
            size = Some((rows, parse_usize(tokens[2], no, "entry count")?));
            matrix = SparseMatrix::new(rows);
            continue;
        };
        if seen.len() == nnz {
            return Err(syntax(no, format!("more than the declared {nnz} entries")));
        }
        if tokens.len() != 3 {
            return Err(syntax(no, "entry needs row, column and value"));
        }
        let i = parse_usize(tokens[0], no, "row index")?;
        let j = parse_usize(tokens[1], no, "column index")?;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(syntax(no, format!("index ({i}, {j}) outside 1..={n}")));
        }
        let value: f64 = tokens[2].parse().map_err(|_| syntax(no, format!("bad value '{}'", tokens[2])))?;
        if !value.is_finite() {
            return Err(syntax(no, "value is not finite"));
        }
        let (i, j) = (i - 1, j - 1);
        let key = match symmetry {
            Symmetry::General => (i, j),
            Symmetry::Symmetric => (i.max(j), i.min(j)),
        };
        if !seen.insert(key) {
            return Err(syntax(no, format!("duplicate entry ({}, {})", i + 1, j + 1)));
        }
        let added = match symmetry {
            Symmetry::General => matrix.add(i, j, value),
            Symmetry::Symmetric => matrix.add_symmetric(i, j, value),
        };
        added.map_err(|e| syntax(no, e.to_string()))?;
    }
    match size {
        None => Err(syntax(last_line, "missing size line")),
        Some((_, nnz)) if seen.len() < nnz => {
            Err(syntax(last_line, format!("expected {nnz} entries, found {}", seen.len())))
        }
        Some(_) => Ok(matrix),
    }
}

/// Writes the lower triangle of a symmetric matrix.
pub fn write_mtx<W: Write>(mut w: W, q: &SparseMatrix, comment: Option<&str>) -> io::Result<()> {
    let lower: Vec<_> = q.iter().filter(|&(i, j, _)| i >= j).collect();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "% {line}")?;
        }
    }
    writeln!(w, "{} {} {}", q.n(), q.n(), lower.len())?;
    for (i, j, v) in lower {
        writeln!(w, "{} {} {v:e}", i + 1, j + 1)?;
    }
    w.flush()
}
