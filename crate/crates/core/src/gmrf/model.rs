use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Largest `n` for which dense factorizations and inverses are attempted.
pub const DEFAULT_DENSE_GUARD: usize = 2000;

const SYMMETRY_TOL: f64 = 1e-12;
const UNIT_DIAGONAL_TOL: f64 = 1e-12;

/// Square sparse matrix in coordinate form. Repeated entries are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl SparseMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, entries: BTreeMap::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::IndexOutOfRange { i, j, n: self.n });
        }
        if !value.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        *self.entries.entry((i, j)).or_insert(0.0) += value;
        Ok(())
    }

    /// Adds `value` at `(i, j)` and, off the diagonal, at `(j, i)`.
    pub fn add_symmetric(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        self.add(i, j, value)?;
        if i != j {
            self.add(j, i, value)?;
        }
        Ok(())
    }

    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut m = Self::new(n);
        for (i, j, v) in triplets {
            m.add(i, j, v)?;
        }
        Ok(m)
    }

    /// Builds from a row-major dense array of length `n * n`, skipping zeros.
    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        let mut m = Self::new(n);
        for i in 0..n {
            for j in 0..n {
                let v = data[i * n + j];
                if v != 0.0 {
                    m.add(i, j, v)?;
                }
            }
        }
        Ok(m)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0.0)
    }

    /// Stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter() {
            d[(i, j)] = v;
        }
        d
    }
}

/// Undirected edge `i < j` carrying the off-diagonal coupling `R_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub node: usize,
    pub edge: usize,
}

/// Ordering of directed edges: undirected edge `e = (i, j)`, `i < j`, owns
/// positions `2e` (for `ij`) and `2e + 1` (for `ji`); edges are sorted
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedEdgeIndex {
    undirected: Vec<(usize, usize)>,
}

impl DirectedEdgeIndex {
    fn new(edges: &[Edge]) -> Self {
        Self { undirected: edges.iter().map(|e| (e.i, e.j)).collect() }
    }

    pub fn len(&self) -> usize {
        2 * self.undirected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.undirected.is_empty()
    }

    /// Position of the directed edge `ij`.
    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        let key = if i < j { (i, j) } else { (j, i) };
        let e = self.undirected.binary_search(&key).ok()?;
        Some(if i < j { 2 * e } else { 2 * e + 1 })
    }

    /// The ordered pair at position `d`.
    pub fn pair(&self, d: usize) -> (usize, usize) {
        let (i, j) = self.undirected[d / 2];
        if d.is_multiple_of(2) {
            (i, j)
        } else {
            (j, i)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).map(move |d| self.pair(d))
    }
}

/// Gaussian model `p(x) ∝ exp(hᵀx − ½xᵀQx)` with `Q = I + R`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmrfModel {
    h: Vec<f64>,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<Neighbor>>,
    directed: DirectedEdgeIndex,
    connected: bool,
}

impl GmrfModel {
    /// Builds the graph structure from couplings without checking positive
    /// definiteness. Zero couplings are dropped.
    pub(crate) fn assemble(h: Vec<f64>, couplings: &[(usize, usize, f64)]) -> Result<Self> {
        let n = h.len();
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, r) in couplings {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { i, j, n });
            }
            if i == j {
                return Err(Error::InvalidSpec("coupling on the diagonal"));
            }
            if !r.is_finite() {
                return Err(Error::NonFiniteInput);
            }
            let key = if i < j { (i, j) } else { (j, i) };
            *map.entry(key).or_insert(0.0) += r;
        }
        let edges: Vec<Edge> = map.into_iter().filter(|&(_, r)| r != 0.0).map(|((i, j), r)| Edge { i, j, r }).collect();
        let mut neighbors = vec![Vec::new(); n];
        for (e, edge) in edges.iter().enumerate() {
            neighbors[edge.i].push(Neighbor { node: edge.j, edge: e });
            neighbors[edge.j].push(Neighbor { node: edge.i, edge: e });
        }
        for list in &mut neighbors {
            list.sort_by_key(|nb| nb.node);
        }
        let directed = DirectedEdgeIndex::new(&edges);
        let mut model = Self { h, edges, neighbors, directed, connected: false };
        model.connected = model.components().len() <= 1;
        Ok(model)
    }

    /// Builds a unit-diagonal model from `h` and couplings `(i, j, R_ij)`,
    /// verifying that `Q = I + R` is positive definite.
    pub fn from_couplings(h: Vec<f64>, couplings: &[(usize, usize, f64)]) -> Result<Self> {
        let model = Self::assemble(h, couplings)?;
        model.check_positive_definite(DEFAULT_DENSE_GUARD)?;
        Ok(model)
    }

    pub(crate) fn check_positive_definite(&self, guard: usize) -> Result<()> {
        check_dense(self.n(), guard)?;
        if linalg::is_positive_definite(&self.dense_q()) {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite)
        }
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Same couplings, different linear term.
    pub fn with_h(&self, h: Vec<f64>) -> Result<Self> {
        if h.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: h.len() });
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { h, ..self.clone() })
    }

    /// Same graph with the couplings replaced (edge order is preserved).
    /// Positive definiteness is re-checked.
    pub fn with_couplings(&self, r: &[f64]) -> Result<Self> {
        if r.len() != self.edges.len() {
            return Err(Error::DimensionMismatch { expected: self.edges.len(), found: r.len() });
        }
        let couplings: Vec<_> = self.edges.iter().zip(r).map(|(e, &r)| (e.i, e.j, r)).collect();
        Self::from_couplings(self.h.clone(), &couplings)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn directed(&self) -> &DirectedEdgeIndex {
        &self.directed
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// `R_ij` for the directed position `d`.
    pub fn coupling_of_directed(&self, d: usize) -> f64 {
        self.edges[d / 2].r
    }

    pub fn dense_q(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut q = DMatrix::identity(n, n);
        for e in &self.edges {
            q[(e.i, e.j)] = e.r;
            q[(e.j, e.i)] = e.r;
        }
        q
    }

    pub fn dense_abs_r(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for e in &self.edges {
            a[(e.i, e.j)] = e.r.abs();
            a[(e.j, e.i)] = e.r.abs();
        }
        a
    }

    /// `y = Q x`.
    pub fn q_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for e in &self.edges {
            y[e.i] += e.r * x[e.j];
            y[e.j] += e.r * x[e.i];
        }
        y
    }

    /// `y = |R| x`.
    pub fn abs_r_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for e in &self.edges {
            let a = e.r.abs();
            y[e.i] += a * x[e.j];
            y[e.j] += a * x[e.i];
        }
        y
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for nb in &self.neighbors[u] {
                    if !seen[nb.node] {
                        seen[nb.node] = true;
                        comp.push(nb.node);
                        queue.push_back(nb.node);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Restriction to `nodes` (sorted, distinct), relabelled `0..nodes.len()`.
    pub fn submodel(&self, nodes: &[usize]) -> Result<Self> {
        let mut local = vec![usize::MAX; self.n()];
        for (k, &v) in nodes.iter().enumerate() {
            if v >= self.n() {
                return Err(Error::IndexOutOfRange { i: v, j: v, n: self.n() });
            }
            local[v] = k;
        }
        let h = nodes.iter().map(|&v| self.h[v]).collect();
        let couplings: Vec<_> = self
            .edges
            .iter()
            .filter(|e| local[e.i] != usize::MAX && local[e.j] != usize::MAX)
            .map(|e| (local[e.i], local[e.j], e.r))
            .collect();
        Self::assemble(h, &couplings)
    }
}

pub(crate) fn check_dense(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::TooLarge { n, limit })
    } else {
        Ok(())
    }
}

/// Validates `(h, Q)` for a unit-diagonal `Q` and builds the model.
pub fn validate_model(h: &[f64], q: &SparseMatrix) -> Result<GmrfModel> {
    validate_model_with_guard(h, q, DEFAULT_DENSE_GUARD)
}

pub fn validate_model_with_guard(h: &[f64], q: &SparseMatrix, guard: usize) -> Result<GmrfModel> {
    let n = q.n();
    if h.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: h.len() });
    }
    let mut couplings = Vec::new();
    for (i, j, v) in q.iter() {
        if i == j {
            continue;
        }
        let t = q.get(j, i);
        if (v - t).abs() > SYMMETRY_TOL * (1.0 + v.abs().max(t.abs())) {
            return Err(Error::NotSymmetric { i, j });
        }
        if i < j {
            couplings.push((i, j, v));
        }
    }
    for i in 0..n {
        if (q.get(i, i) - 1.0).abs() > UNIT_DIAGONAL_TOL {
            return Err(Error::NonUnitDiagonal { i });
        }
    }
    let model = GmrfModel::assemble(h.to_vec(), &couplings)?;
    model.check_positive_definite(guard)?;
    Ok(model)
}

/// Rescales a general-diagonal model to unit diagonal: `Q' = D⁻¹QD⁻¹`,
/// `h' = D⁻¹h` with `D = diag(√Q_ii)`. Returns the model and `√Q_ii`.
pub fn rescale_to_unit_diagonal(h: &[f64], q: &SparseMatrix) -> Result<(GmrfModel, Vec<f64>)> {
    rescale_to_unit_diagonal_with_guard(h, q, DEFAULT_DENSE_GUARD)
}

pub fn rescale_to_unit_diagonal_with_guard(h: &[f64], q: &SparseMatrix, guard: usize) -> Result<(GmrfModel, Vec<f64>)> {
    let n = q.n();
    if h.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: h.len() });
    }
    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let d = q.get(i, i);
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NonpositiveDiagonal { i });
        }
        scale.push(crate::math::sqrt(d));
    }
    let mut scaled = SparseMatrix::new(n);
    for (i, j, v) in q.iter() {
        let value = if i == j { 1.0 } else { v / (scale[i] * scale[j]) };
        scaled.add(i, j, value)?;
    }
    let h_scaled: Vec<f64> = h.iter().zip(&scale).map(|(x, s)| x / s).collect();
    let model = validate_model_with_guard(&h_scaled, &scaled, guard)?;
    Ok((model, scale))
}
