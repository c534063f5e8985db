//! Per-α convergence table: BP and Newton at each α of a grid, in parallel.

use rayon::prelude::*;

use bethe_gauss_core::bp::{run, BpOptions, BpStatus};
use bethe_gauss_core::energy::{f_alpha_constrained, AlphaAssignment};
use bethe_gauss_core::gmrf::{EdgePartition, GmrfModel};
use bethe_gauss_core::newton::{newton_minimize, MinOptions, MinStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub epsilon: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub newton: bool,
}

impl Default for SweepSettings {
    fn default() -> Self {
        let bp = BpOptions::default();
        Self { epsilon: bp.epsilon, tol: bp.tol, max_iters: bp.max_iters, newton: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub bp_status: BpStatus,
    pub bp_iterations: usize,
    /// Constrained energy at the BP fixed point, when converged.
    pub bp_f: Option<f64>,
    /// `‖√v − √v_exact‖₂` at the BP fixed point, when converged and an
    /// oracle is given.
    pub bp_sigma_err: Option<f64>,
    pub newton_status: Option<MinStatus>,
    pub newton_f: Option<f64>,
    pub newton_sigma_err: Option<f64>,
}

pub fn sigma_error(v: &[f64], exact: &[f64]) -> f64 {
    v.iter().zip(exact).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum::<f64>().sqrt()
}

fn evaluate(
    model: &GmrfModel,
    partition: &EdgePartition,
    alpha: f64,
    settings: &SweepSettings,
    exact_v: Option<&[f64]>,
) -> SweepRow {
    let opts = BpOptions {
        alpha,
        epsilon: settings.epsilon,
        tol: settings.tol,
        max_iters: settings.max_iters,
        trace_energy: false,
        ..BpOptions::default()
    };
    let a = AlphaAssignment::Uniform(alpha);
    let mut row = SweepRow {
        alpha,
        bp_status: BpStatus::Diverged,
        bp_iterations: 0,
        bp_f: None,
        bp_sigma_err: None,
        newton_status: None,
        newton_f: None,
        newton_sigma_err: None,
    };
    if let Ok(res) = run(model, partition, &opts) {
        row.bp_status = res.status;
        row.bp_iterations = res.iterations;
        if let (BpStatus::Converged, Some(mg)) = (res.status, &res.marginals) {
            row.bp_f = f_alpha_constrained(model, &mg.m, &mg.v, &a).ok().map(|e| e.value);
            row.bp_sigma_err = exact_v.map(|x| sigma_error(&mg.v, x));
        }
    }
    if settings.newton {
        if let Ok(res) = newton_minimize(model, &a, &MinOptions::default()) {
            row.newton_status = Some(res.status);
            if res.status == MinStatus::Converged {
                row.newton_f = Some(res.f);
                row.newton_sigma_err = exact_v.map(|x| sigma_error(&res.v, x));
            }
        }
    }
    row
}

/// One row per α, in the order given, whatever the completion order.
pub fn sweep_alpha(
    model: &GmrfModel,
    partition: &EdgePartition,
    alphas: &[f64],
    settings: &SweepSettings,
    exact_v: Option<&[f64]>,
) -> Vec<SweepRow> {
    alphas.par_iter().map(|&a| evaluate(model, partition, a, settings, exact_v)).collect()
}
