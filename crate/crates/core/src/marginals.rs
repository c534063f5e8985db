use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gmrf::GmrfModel;

/// Node means `m`, node variances `v` and edge covariances `v_ij` (one per
/// undirected edge, in model edge order).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMarginals {
    m: Vec<f64>,
    v: Vec<f64>,
    v_edge: Vec<f64>,
}

impl MomentMarginals {
    /// Checks lengths, `v_i > 0` and `v_ij² < v_i v_j` on every edge.
    pub fn new(model: &GmrfModel, m: Vec<f64>, v: Vec<f64>, v_edge: Vec<f64>) -> Result<Self> {
        let n = model.n();
        for len in [m.len(), v.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        if v_edge.len() != model.edge_count() {
            return Err(Error::DimensionMismatch { expected: model.edge_count(), found: v_edge.len() });
        }
        check_variances(&v)?;
        for (edge, &c) in model.edges().iter().zip(&v_edge) {
            if !c.is_finite() || c * c >= v[edge.i] * v[edge.j] {
                return Err(Error::NonNormalizablePair { i: edge.i, j: edge.j });
            }
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { m, v, v_edge })
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn v_edge(&self) -> &[f64] {
        &self.v_edge
    }

    /// Maps marginals of a rescaled model back to the original variables:
    /// `m = m'/s`, `v = v'/s²`, `v_ij = v'_ij/(s_i s_j)`.
    pub fn unscale(&self, model: &GmrfModel, scale: &[f64]) -> Self {
        let m = self.m.iter().zip(scale).map(|(x, s)| x / s).collect();
        let v = self.v.iter().zip(scale).map(|(x, s)| x / (s * s)).collect();
        let v_edge = model.edges().iter().zip(&self.v_edge).map(|(e, c)| c / (scale[e.i] * scale[e.j])).collect();
        Self { m, v, v_edge }
    }
}

pub(crate) fn check_variances(v: &[f64]) -> Result<()> {
    match v.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        Some(i) => Err(Error::NonpositiveVariance { i }),
        None => Ok(()),
    }
}
