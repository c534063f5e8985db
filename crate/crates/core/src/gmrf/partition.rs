//! Splitting the node potentials across incident edges.

use alloc::vec;
use alloc::vec::Vec;

use super::model::GmrfModel;
use super::spectral::SpectralReport;
use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionStrategy {
    /// `γ_ij^i = 1/n_i`.
    Symmetric,
    /// `γ_ij^i = |R_ij| u_j / (λ_max u_i)` from the Perron pair of `|R|`.
    PairwiseNormalizable,
}

impl PartitionStrategy {
    /// Pairwise-normalizable weights when `λ_max(|R|) < 1`, symmetric otherwise.
    pub fn auto(spectral: &SpectralReport) -> Self {
        if spectral.is_pairwise_normalizable() {
            Self::PairwiseNormalizable
        } else {
            Self::Symmetric
        }
    }
}

/// Weights `γ_ij^i`, stored at the directed position of `ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePartition {
    share: Vec<f64>,
    raw_sums: Option<Vec<f64>>,
}

impl EdgePartition {
    /// Validates positivity and per-node unit sums.
    pub fn from_shares(model: &GmrfModel, share: Vec<f64>) -> Result<Self> {
        let dir = model.directed();
        if share.len() != dir.len() {
            return Err(Error::DimensionMismatch { expected: dir.len(), found: share.len() });
        }
        if share.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidSpec("partition weights must be positive"));
        }
        let sums = node_sums(model, &share);
        for (i, s) in sums.iter().enumerate() {
            if model.degree(i) > 0 && (s - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidSpec("partition weights must sum to 1 at every node"));
            }
        }
        Ok(Self { share, raw_sums: None })
    }

    /// `γ_ij^i` for the directed position `d` of `ij`.
    pub fn own(&self, d: usize) -> f64 {
        self.share[d]
    }

    /// `γ_ij^j`: the other endpoint's weight on the same edge.
    pub fn other(&self, d: usize) -> f64 {
        self.share[d ^ 1]
    }

    pub fn shares(&self) -> &[f64] {
        &self.share
    }

    /// Per-node sums before renormalization (pairwise strategy only).
    pub fn raw_sums(&self) -> Option<&[f64]> {
        self.raw_sums.as_deref()
    }
}

fn node_sums(model: &GmrfModel, share: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; model.n()];
    for (d, (i, _)) in model.directed().iter().enumerate() {
        sums[i] += share[d];
    }
    sums
}

pub fn partition_potentials(
    model: &GmrfModel,
    strategy: PartitionStrategy,
    spectral: Option<&SpectralReport>,
) -> Result<EdgePartition> {
    let dir = model.directed();
    match strategy {
        PartitionStrategy::Symmetric => {
            let share = dir.iter().map(|(i, _)| 1.0 / model.degree(i) as f64).collect();
            Ok(EdgePartition { share, raw_sums: None })
        }
        PartitionStrategy::PairwiseNormalizable => {
            let spectral = spectral.ok_or(Error::InvalidSpec("pairwise partition needs a spectral report"))?;
            if spectral.u_max.len() != model.n() {
                return Err(Error::DimensionMismatch { expected: model.n(), found: spectral.u_max.len() });
            }
            let lambda = spectral.lambda_max;
            if lambda > 1.0 {
                return Err(Error::StrategyInapplicable { lambda_max: lambda });
            }
            let u = &spectral.u_max;
            let mut share: Vec<f64> = (0..dir.len())
                .map(|d| {
                    let (i, j) = dir.pair(d);
                    model.coupling_of_directed(d).abs() * u[j] / (lambda * u[i])
                })
                .collect();
            let raw = node_sums(model, &share);
            for (d, (i, _)) in dir.iter().enumerate() {
                share[d] /= raw[i];
            }
            Ok(EdgePartition { share, raw_sums: Some(raw) })
        }
    }
}
