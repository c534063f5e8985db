//! Models on disk: `Q` in `name.mtx`, `h` one value per line in `name.h.txt`.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use bethe_gauss_core::gmrf::{rescale_to_unit_diagonal_with_guard, validate_model_with_guard, GmrfModel, SparseMatrix};
use bethe_gauss_core::MomentMarginals;

use crate::mtx::{read_mtx, write_mtx, MtxError};

/// A problem with an input file: names the file and, when known, the line.
#[derive(Debug)]
pub struct InputError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub msg: String,
}

impl InputError {
    pub fn new(path: &Path, line: Option<usize>, msg: impl Into<String>) -> Self {
        Self { path: path.to_path_buf(), line, msg: msg.into() }
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path.display(), line, self.msg),
            None => write!(f, "{}: {}", self.path.display(), self.msg),
        }
    }
}

impl std::error::Error for InputError {}

/// `dir/name.mtx` → `dir/name.h.txt`.
pub fn h_path(mtx: &Path) -> PathBuf {
    let stem = mtx.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    mtx.with_file_name(format!("{stem}.h.txt"))
}

/// One number per line; blank lines and lines starting with `%` or `#` are
/// skipped. Errors carry 1-based line numbers.
pub fn read_h<R: BufRead>(reader: R) -> Result<Vec<f64>, (Option<usize>, String)> {
    let mut h = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| (None, e.to_string()))?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('%') || body.starts_with('#') {
            continue;
        }
        let x: f64 = body.parse().map_err(|_| (Some(k + 1), format!("bad value '{body}'")))?;
        if !x.is_finite() {
            return Err((Some(k + 1), "value is not finite".into()));
        }
        h.push(x);
    }
    Ok(h)
}

pub fn write_h<W: Write>(mut w: W, h: &[f64]) -> io::Result<()> {
    for x in h {
        writeln!(w, "{x:e}")?;
    }
    w.flush()
}

#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub path: PathBuf,
    /// Unit-diagonal model.
    pub model: GmrfModel,
    /// `√Q_ii` when the file had a non-unit diagonal.
    pub scale: Option<Vec<f64>>,
}

impl LoadedModel {
    /// Marginals in the variables of the file.
    pub fn unscale(&self, marginals: &MomentMarginals) -> MomentMarginals {
        match &self.scale {
            Some(s) => marginals.unscale(&self.model, s),
            None => marginals.clone(),
        }
    }

    /// Node means and variances in the variables of the file.
    pub fn unscale_nodes(&self, m: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match &self.scale {
            Some(s) => {
                (m.iter().zip(s).map(|(x, s)| x / s).collect(), v.iter().zip(s).map(|(x, s)| x / (s * s)).collect())
            }
            None => (m.to_vec(), v.to_vec()),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, InputError> {
    File::open(path).map(BufReader::new).map_err(|e| InputError::new(path, None, e.to_string()))
}

/// Reads `path` and its sibling `h` file, rescaling to unit diagonal when
/// needed. `guard` bounds the dense positive-definiteness check.
pub fn load_model(path: &Path, guard: usize) -> Result<LoadedModel, InputError> {
    let q = read_mtx(open(path)?).map_err(|e| match e {
        MtxError::Syntax { line, msg } => InputError::new(path, Some(line), msg),
        MtxError::Io(e) => InputError::new(path, None, e.to_string()),
    })?;
    let hp = h_path(path);
    let h = read_h(open(&hp)?).map_err(|(line, msg)| InputError::new(&hp, line, msg))?;
    if h.len() != q.n() {
        return Err(InputError::new(&hp, None, format!("{} values for a {}-node model", h.len(), q.n())));
    }
    let unit = (0..q.n()).all(|i| q.get(i, i) == 1.0);
    let invalid = |e: bethe_gauss_core::Error| InputError::new(path, None, e.to_string());
    if unit {
        let model = validate_model_with_guard(&h, &q, guard).map_err(invalid)?;
        Ok(LoadedModel { path: path.to_path_buf(), model, scale: None })
    } else {
        let (model, scale) = rescale_to_unit_diagonal_with_guard(&h, &q, guard).map_err(invalid)?;
        Ok(LoadedModel { path: path.to_path_buf(), model, scale: Some(scale) })
    }
}

/// `Q = I + R` as a sparse matrix.
pub fn model_matrix(model: &GmrfModel) -> SparseMatrix {
    let mut q = SparseMatrix::new(model.n());
    for i in 0..model.n() {
        q.add(i, i, 1.0).expect("index in range");
    }
    for e in model.edges() {
        q.add_symmetric(e.i, e.j, e.r).expect("index in range");
    }
    q
}

/// Writes `prefix.mtx` and `prefix.h.txt`; returns both paths.
pub fn save_model(prefix: &Path, model: &GmrfModel, comment: Option<&str>) -> io::Result<(PathBuf, PathBuf)> {
    let mtx = {
        let mut s = prefix.as_os_str().to_owned();
        s.push(".mtx");
        PathBuf::from(s)
    };
    let hp = h_path(&mtx);
    write_mtx(BufWriter::new(File::create(&mtx)?), &model_matrix(model), comment)?;
    write_h(BufWriter::new(File::create(&hp)?), model.h())?;
    Ok((mtx, hp))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_h_path() {
        assert_eq!(h_path(Path::new("a/b/model.mtx")), PathBuf::from("a/b/model.h.txt"));
        assert_eq!(h_path(Path::new("x.mtx")), PathBuf::from("x.h.txt"));
    }

    #[test]
    fn h_reader() {
        assert_eq!(read_h("1\n\n# c\n-2.5e-1\n".as_bytes()).unwrap(), vec![1.0, -0.25]);
        assert_eq!(read_h("1\nfoo\n".as_bytes()).unwrap_err().0, Some(2));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let model = GmrfModel::from_couplings(vec![0.5, -1.0, 0.0], &[(0, 1, 0.3), (1, 2, -0.2)]).unwrap();
        let prefix = dir.path().join("m");
        let (mtx, _) = save_model(&prefix, &model, Some("three nodes")).unwrap();
        let loaded = load_model(&mtx, 100).unwrap();
        assert_eq!(loaded.model, model);
        assert!(loaded.scale.is_none());
    }

    #[test]
    fn rescales_general_diagonal() {
        let dir = tempfile::tempdir().unwrap();
        let mtx = dir.path().join("q.mtx");
        std::fs::write(&mtx, "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 4\n2 1 1\n2 2 1\n").unwrap();
        std::fs::write(h_path(&mtx), "0\n0\n").unwrap();
        let loaded = load_model(&mtx, 100).unwrap();
        assert_eq!(loaded.scale.as_deref(), Some(&[2.0, 1.0][..]));
        assert_eq!(loaded.model.edges()[0].r, 0.5);
        let (m, v) = loaded.unscale_nodes(&[2.0, 1.0], &[4.0, 1.0]);
        assert_eq!((m, v), (vec![1.0, 1.0], vec![1.0, 1.0]));
    }

    #[test]
    fn errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let mtx = dir.path().join("bad.mtx");
        std::fs::write(&mtx, "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n").unwrap();
        std::fs::write(h_path(&mtx), "0\n0\n").unwrap();
        let e = load_model(&mtx, 100).unwrap_err();
        assert!(e.to_string().starts_with(&format!("{}:3:", mtx.display())));
        std::fs::write(&mtx, "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 1\n2 1 2\n2 2 1\n").unwrap();
        assert!(load_model(&mtx, 100).unwrap_err().msg.contains("positive definite"));
        std::fs::remove_file(h_path(&mtx)).unwrap();
        assert!(load_model(&mtx, 100).unwrap_err().path.ends_with("bad.h.txt"));
    }
}
