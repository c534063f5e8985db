//! Newton minimization of the constrained fractional energy over node
//! variances, and energy profiles along a fixed positive direction.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::energy::{constrained_value, grad_v_unchecked, induced_marginals, mean_energy, AlphaAssignment};
use crate::error::{Error, Result};
use crate::gmrf::{exact_means, GmrfModel, DEFAULT_DENSE_GUARD};
use crate::marginals::check_variances;
use crate::stability::hessian_schur;

#[derive(Debug, Clone, PartialEq)]
pub struct MinOptions {
    /// Starting variances; all ones when `None`.
    pub v0: Option<Vec<f64>>,
    pub tol_grad: f64,
    pub max_iters: usize,
    pub shrink: f64,
    pub max_halvings: usize,
    /// Any variance above this means divergence.
    pub v_limit: f64,
    /// An energy below this means divergence.
    pub f_limit: f64,
}

impl Default for MinOptions {
    fn default() -> Self {
        Self { v0: None, tol_grad: 1e-9, max_iters: 200, shrink: 0.5, max_halvings: 60, v_limit: 1e12, f_limit: -1e12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinStatus {
    Converged,
    Diverging,
    MaxIters,
    /// No step along the search direction lowers the energy.
    Stalled,
}

impl MinStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "Converged",
            Self::Diverging => "Diverging",
            Self::MaxIters => "MaxIters",
            Self::Stalled => "Stalled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinTraceRow {
    pub iter: usize,
    pub f: f64,
    pub grad_inf: f64,
    /// Step length that produced this iterate; 0 for the start.
    pub step_size: f64,
    pub min_v: f64,
    pub newton: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinResult {
    pub status: MinStatus,
    pub iterations: usize,
    pub v: Vec<f64>,
    pub m: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub hessian_pd: bool,
    pub trace: Vec<MinTraceRow>,
}

/// Largest step factor tried when expanding a gradient step.
const MAX_EXPANSIONS: usize = 60;

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |acc, g| acc.max(g.abs()))
}

fn hessian(model: &GmrfModel, v: &[f64], alpha: &AlphaAssignment) -> Result<DMatrix<f64>> {
    let mm = induced_marginals(model, vec![0.0; model.n()], v.to_vec(), alpha)?;
    hessian_schur(model, &mm, alpha)
}

fn newton_direction(h: DMatrix<f64>, g: &[f64]) -> Option<Vec<f64>> {
    let chol = h.cholesky()?;
    let step = chol.solve(&DVector::from_column_slice(g));
    let dir: Vec<f64> = step.iter().map(|x| -x).collect();
    dir.iter().all(|x| x.is_finite()).then_some(dir)
}

/// Minimizes `F^c_α` over `v` from `options.v0`; `m = Q⁻¹h` is solved once.
/// Newton directions come from the analytic Hessian; when it is not
/// positive definite the step falls back to steepest descent with an
/// expanding line search, so runaway descent is detected.
pub fn newton_minimize(model: &GmrfModel, alpha: &AlphaAssignment, options: &MinOptions) -> Result<MinResult> {
    alpha.validate(model)?;
    let n = model.n();
    let mut v = options.v0.clone().unwrap_or_else(|| vec![1.0; n]);
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: v.len() });
    }
    check_variances(&v)?;
    if !(options.shrink > 0.0 && options.shrink < 1.0) {
        return Err(Error::InvalidSpec("shrink factor must lie in (0, 1)"));
    }
    let m = exact_means(model, DEFAULT_DENSE_GUARD)?;
    let mean_part = mean_energy(model, &m);
    let energy = |v: &[f64]| constrained_value(model, mean_part, v, alpha);

    let mut f = energy(&v);
    let mut g = grad_v_unchecked(model, &v, alpha);
    let mut trace = Vec::new();
    let mut last_step = 0.0;
    let mut last_newton = false;
    let mut status = MinStatus::MaxIters;
    let mut iterations = 0;
    for iter in 0..=options.max_iters {
        iterations = iter;
        let grad_inf = inf_norm(&g);
        let min_v = v.iter().cloned().fold(f64::INFINITY, f64::min);
        trace.push(MinTraceRow { iter, f, grad_inf, step_size: last_step, min_v, newton: last_newton });
        if !f.is_finite() || f < options.f_limit || v.iter().any(|&x| x > options.v_limit) {
            status = MinStatus::Diverging;
            break;
        }
        if grad_inf <= options.tol_grad {
            status = MinStatus::Converged;
            break;
        }
        if iter == options.max_iters {
            break;
        }
        let newton = newton_direction(hessian(model, &v, alpha)?, &g);
        let is_newton = newton.is_some();
        let dir = newton.unwrap_or_else(|| g.iter().map(|x| -x).collect());
        let g_norm2: f64 = g.iter().map(|x| x * x).sum::<f64>();
        let trial = |t: f64| -> Option<(Vec<f64>, f64)> {
            let next: Vec<f64> = v.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            if next.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return None;
            }
            let fn_ = energy(&next);
            fn_.is_finite().then_some((next, fn_))
        };
        // Accept a strict decrease, or a change at the roundoff floor of `f`
        // that still shrinks the gradient.
        let accepts = |next: &[f64], fn_: f64| {
            if fn_ < f {
                return true;
            }
            if fn_ <= f + 8.0 * f64::EPSILON * f.abs().max(1.0) {
                let gn = grad_v_unchecked(model, next, alpha);
                return gn.iter().map(|x| x * x).sum::<f64>() < g_norm2;
            }
            false
        };
        let mut accepted: Option<(Vec<f64>, f64, f64)> = None;
        let mut t = 1.0;
        for _ in 0..=options.max_halvings {
            if let Some((next, fn_)) = trial(t) {
                if accepts(&next, fn_) {
                    accepted = Some((next, fn_, t));
                    break;
                }
            }
            t *= options.shrink;
        }
        if !is_newton {
            if let Some((_, mut best_f, mut best_t)) = accepted.clone() {
                if best_t == 1.0 {
                    for _ in 0..MAX_EXPANSIONS {
                        match trial(2.0 * best_t) {
                            Some((next, fn_)) if fn_ < best_f => {
                                best_t *= 2.0;
                                best_f = fn_;
                                accepted = Some((next, fn_, best_t));
                            }
                            _ => break,
                        }
                    }
                }
            }
        }
        match accepted {
            Some((next, fn_, step)) => {
                v = next;
                f = fn_;
                g = grad_v_unchecked(model, &v, alpha);
                last_step = step;
                last_newton = is_newton;
            }
            None => {
                status = MinStatus::Stalled;
                break;
            }
        }
    }
    let grad_norm = inf_norm(&g);
    let hessian_pd = hessian(model, &v, alpha).map(|h| h.cholesky().is_some()).unwrap_or(false);
    Ok(MinResult { status, iterations, v, m, f, grad_norm, hessian_pd, trace })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    /// `(σ, F^c_α)` with `√v = σ · direction`.
    pub points: Vec<(f64, f64)>,
    /// Grid indices that are strict interior local minima of the samples.
    pub interior_minima: Vec<usize>,
}

impl Profile {
    pub fn has_interior_minimum(&self) -> bool {
        !self.interior_minima.is_empty()
    }
}

/// Constrained energy along the ray `√v = σ u` for each `σ` in the grid;
/// the mean part is evaluated at `m = Q⁻¹h`.
pub fn symmetric_profile(
    model: &GmrfModel,
    alpha: &AlphaAssignment,
    sigma_grid: &[f64],
    direction: &[f64],
) -> Result<Profile> {
    alpha.validate(model)?;
    if direction.len() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), found: direction.len() });
    }
    if direction.iter().any(|&u| !(u > 0.0)) {
        return Err(Error::InvalidSpec("profile direction must be entrywise positive"));
    }
    if sigma_grid.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidSpec("sigma grid must be positive"));
    }
    let m = exact_means(model, DEFAULT_DENSE_GUARD)?;
    let mean_part = mean_energy(model, &m);
    let points: Vec<(f64, f64)> = sigma_grid
        .iter()
        .map(|&s| {
            let v: Vec<f64> = direction.iter().map(|u| (s * u) * (s * u)).collect();
            (s, constrained_value(model, mean_part, &v, alpha))
        })
        .collect();
    let interior_minima = (1..points.len().saturating_sub(1))
        .filter(|&k| points[k].1 < points[k - 1].1 && points[k].1 < points[k + 1].1)
        .collect();
    Ok(Profile { points, interior_minima })
}

/// `count` points spaced evenly in `log σ` between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo; count];
    }
    let (a, b) = (libm::log(lo), libm::log(hi));
    (0..count).map(|k| libm::exp(a + (b - a) * k as f64 / (count - 1) as f64)).collect()
}
