//! Perron pair of `|R|` and the boundedness classification built on it.

use alloc::vec;
use alloc::vec::Vec;

use super::model::{GmrfModel, DEFAULT_DENSE_GUARD};
use crate::energy::AlphaAssignment;
use crate::error::{Error, Result};
use crate::math;

/// Tolerance on `|λ_max − 1|` below which a model is treated as boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIterationOptions {
    /// Stop once `‖|R|u − λu‖∞` falls to this value.
    pub tol: f64,
    /// Iteration cap; `None` means `100 · n`.
    pub max_iters: Option<usize>,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iters: None }
    }
}

/// Largest eigenvalue of `|R|` with its unit-norm, entrywise positive vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub lambda_max: f64,
    pub u_max: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl SpectralReport {
    pub fn is_pairwise_normalizable(&self) -> bool {
        self.lambda_max < 1.0
    }
}

pub fn spectral_analysis(model: &GmrfModel) -> Result<SpectralReport> {
    spectral_analysis_with(model, PowerIterationOptions::default())
}

/// Power iteration on `|R| + sI` from the all-ones vector, with `s` half the
/// largest row sum of `|R|`. The shift leaves the Perron vector unchanged and
/// keeps bipartite graphs (where `−λ_max` is also an eigenvalue) convergent.
pub fn spectral_analysis_with(model: &GmrfModel, opts: PowerIterationOptions) -> Result<SpectralReport> {
    let n = model.n();
    if n == 0 {
        return Err(Error::InvalidSpec("empty model"));
    }
    if model.edge_count() == 0 {
        let u = vec![1.0 / math::sqrt(n as f64); n];
        return Ok(SpectralReport { lambda_max: 0.0, u_max: u, iterations: 0, residual: 0.0 });
    }
    if !model.is_connected() {
        return Err(Error::Disconnected);
    }
    let max_iters = opts.max_iters.unwrap_or(100 * n);
    let row_sums = model.abs_r_mul(&vec![1.0; n]);
    let shift = 0.5 * row_sums.iter().copied().fold(0.0, f64::max);

    let mut u = vec![1.0 / math::sqrt(n as f64); n];
    let mut iterations = 0;
    loop {
        let ru = model.abs_r_mul(&u);
        let lambda: f64 = u.iter().zip(&ru).map(|(a, b)| a * b).sum();
        let residual = ru.iter().zip(&u).fold(0.0f64, |acc, (r, x)| acc.max((r - lambda * x).abs()));
        if residual <= opts.tol {
            return Ok(SpectralReport { lambda_max: lambda, u_max: u, iterations, residual });
        }
        if iterations >= max_iters {
            return dense_perron(model, opts.tol, iterations).ok_or(Error::NoConvergence { iterations, residual });
        }
        let mut next: Vec<f64> = ru.iter().zip(&u).map(|(r, x)| r + shift * x).collect();
        let norm = math::sqrt(next.iter().map(|x| x * x).sum());
        for x in &mut next {
            *x /= norm;
        }
        u = next;
        iterations += 1;
    }
}

/// Perron pair from a dense symmetric eigensolve, for small spectral gaps
/// where the power iteration stalls. `None` above the dense guard or when
/// the result misses the tolerance.
fn dense_perron(model: &GmrfModel, tol: f64, iterations: usize) -> Option<SpectralReport> {
    if model.n() > DEFAULT_DENSE_GUARD {
        return None;
    }
    let eig = model.dense_abs_r().symmetric_eigen();
    let top = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?.0;
    let mut u: Vec<f64> = eig.eigenvectors.column(top).iter().map(|x| x.abs()).collect();
    let norm = math::sqrt(u.iter().map(|x| x * x).sum());
    u.iter_mut().for_each(|x| *x /= norm);
    let ru = model.abs_r_mul(&u);
    let lambda: f64 = u.iter().zip(&ru).map(|(a, b)| a * b).sum();
    let residual = ru.iter().zip(&u).fold(0.0f64, |acc, (r, x)| acc.max((r - lambda * x).abs()));
    (residual <= tol && u.iter().all(|&x| x > 0.0)).then_some(SpectralReport {
        lambda_max: lambda,
        u_max: u,
        iterations,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundednessClass {
    /// `λ_max(|R|) < 1`: bounded from below for every `α > 0`.
    BoundedAll,
    /// `λ_max(|R|) > 1`: unbounded from below for every `α > 0`.
    UnboundedAll,
    /// `λ_max(|R|) = 1`: bounded iff `Σ_i Σ_{j∈∂i} 1/α_ij ≥ 2n`.
    Boundary { bounded: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boundedness {
    pub class: BoundednessClass,
    /// Largest `λ_max(|R|)` over connected components.
    pub lambda_max: f64,
    /// For boundary components: `Σ_i Σ_{j∈∂i} 1/α_ij` summed over them.
    pub inverse_alpha_sum: Option<f64>,
    /// For boundary components: `2n` summed over them.
    pub two_n: Option<f64>,
}

impl Boundedness {
    pub fn is_bounded(&self) -> bool {
        match self.class {
            BoundednessClass::BoundedAll => true,
            BoundednessClass::UnboundedAll => false,
            BoundednessClass::Boundary { bounded } => bounded,
        }
    }
}

pub fn classify_boundedness(model: &GmrfModel, alpha: &AlphaAssignment) -> Result<Boundedness> {
    classify_boundedness_with_tolerance(model, alpha, BOUNDARY_TOLERANCE)
}

/// Disconnected models are classified per connected component: the energy
/// is a sum over components, so it is unbounded if any component is, and a
/// boundary component must satisfy its own inverse-α condition.
pub fn classify_boundedness_with_tolerance(
    model: &GmrfModel,
    alpha: &AlphaAssignment,
    tol: f64,
) -> Result<Boundedness> {
    alpha.validate(model)?;
    let mut component_of = vec![0usize; model.n()];
    let components = model.components();
    for (c, nodes) in components.iter().enumerate() {
        for &v in nodes {
            component_of[v] = c;
        }
    }
    let mut inv_sum = vec![0.0; components.len()];
    for (e, edge) in model.edges().iter().enumerate() {
        inv_sum[component_of[edge.i]] += 2.0 / alpha.at(e);
    }

    let mut lambda_max = 0.0f64;
    let mut unbounded = false;
    let mut boundary = false;
    let mut boundary_ok = true;
    let mut boundary_sum = 0.0;
    let mut boundary_two_n = 0.0;
    for (c, nodes) in components.iter().enumerate() {
        let lambda = if nodes.len() == 1 { 0.0 } else { spectral_analysis(&model.submodel(nodes)?)?.lambda_max };
        lambda_max = lambda_max.max(lambda);
        if lambda > 1.0 + tol {
            unbounded = true;
        } else if lambda >= 1.0 - tol {
            boundary = true;
            let two_n = 2.0 * nodes.len() as f64;
            boundary_ok &= inv_sum[c] >= two_n;
            boundary_sum += inv_sum[c];
            boundary_two_n += two_n;
        }
    }
    let class = if unbounded {
        BoundednessClass::UnboundedAll
    } else if boundary {
        BoundednessClass::Boundary { bounded: boundary_ok }
    } else {
        BoundednessClass::BoundedAll
    };
    let (inverse_alpha_sum, two_n) = match class {
        BoundednessClass::Boundary { .. } => (Some(boundary_sum), Some(boundary_two_n)),
        _ => (None, None),
    };
    Ok(Boundedness { class, lambda_max, inverse_alpha_sum, two_n })
}
