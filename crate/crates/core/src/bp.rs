//! Damped fractional Gaussian belief propagation in canonical message
//! parameters `(η, λ)`, indexed by directed edge, with a Jacobi schedule.

use alloc::vec;
use alloc::vec::Vec;

use crate::energy::{f_alpha_constrained, AlphaAssignment};
use crate::error::{Error, Result};
use crate::gmrf::{EdgePartition, GmrfModel};
use crate::marginals::MomentMarginals;

const ZERO_DENOMINATOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpOptions {
    pub alpha: f64,
    /// Damping in `(0, 1]`; 1 means undamped.
    pub epsilon: f64,
    /// Threshold on `max(|Δη|∞, |Δλ|∞)`.
    pub tol: f64,
    pub max_iters: usize,
    /// `|λ|∞` above this counts as divergence.
    pub divergence_limit: f64,
    /// Evaluate the constrained energy for every trace row.
    pub trace_energy: bool,
}

impl Default for BpOptions {
    fn default() -> Self {
        Self { alpha: 1.0, epsilon: 1.0, tol: 1e-10, max_iters: 10_000, divergence_limit: 1e12, trace_energy: true }
    }
}

impl BpOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::NonpositiveAlpha { edge: 0 });
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidSpec("epsilon must lie in (0, 1]"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidSpec("tolerance must be nonnegative"));
        }
        Ok(())
    }
}

/// Canonical message parameters per directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub eta: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl MessageState {
    pub fn zeros(model: &GmrfModel) -> Self {
        let len = model.directed().len();
        Self { eta: vec![0.0; len], lambda: vec![0.0; len] }
    }

    fn is_finite(&self) -> bool {
        self.eta.iter().chain(&self.lambda).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpStatus {
    Converged,
    MaxIters,
    NonNormalizable,
    Diverged,
}

impl BpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "Converged",
            Self::MaxIters => "MaxIters",
            Self::NonNormalizable => "NonNormalizable",
            Self::Diverged => "Diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpTraceRow {
    pub iter: usize,
    pub max_delta_eta: f64,
    pub max_delta_lambda: f64,
    pub f_alpha_c: Option<f64>,
    pub normalizable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    pub status: BpStatus,
    pub iterations: usize,
    pub state: MessageState,
    pub marginals: Option<BpMarginals>,
    pub trace: Vec<BpTraceRow>,
}

/// Moments of one pair marginal `q_ij`, `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMarginal {
    pub v_i: f64,
    pub v_j: f64,
    pub v_ij: f64,
    pub m_i: f64,
    pub m_j: f64,
}

/// Pair marginals in model edge order plus node marginals read off the
/// edge to each node's smallest neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct BpMarginals {
    pub pairs: Vec<PairMarginal>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl BpMarginals {
    pub fn to_moments(&self, model: &GmrfModel) -> Result<MomentMarginals> {
        let v_edge = self.pairs.iter().map(|p| p.v_ij).collect();
        MomentMarginals::new(model, self.m.clone(), self.v.clone(), v_edge)
    }
}

/// Zero messages, after checking that the initial pair precision blocks
/// `[[αγ_ij^i, αR_ij], [αR_ij, αγ_ij^j]]` are positive definite.
pub fn init_messages(model: &GmrfModel, partition: &EdgePartition, alpha: f64) -> Result<MessageState> {
    if !(alpha > 0.0) {
        return Err(Error::NonpositiveAlpha { edge: 0 });
    }
    check_partition_len(model, partition)?;
    let bad: Vec<(usize, usize)> = model
        .edges()
        .iter()
        .enumerate()
        .filter(|(e, edge)| partition.own(2 * e) * partition.other(2 * e) <= edge.r * edge.r)
        .map(|(_, edge)| (edge.i, edge.j))
        .collect();
    if bad.is_empty() {
        Ok(MessageState::zeros(model))
    } else {
        Err(Error::InitialNonNormalizable { edges: bad })
    }
}

fn check_partition_len(model: &GmrfModel, partition: &EdgePartition) -> Result<()> {
    let len = model.directed().len();
    if partition.shares().len() != len {
        return Err(Error::DimensionMismatch { expected: len, found: partition.shares().len() });
    }
    Ok(())
}

fn check_state_len(model: &GmrfModel, state: &MessageState) -> Result<()> {
    let len = model.directed().len();
    for found in [state.eta.len(), state.lambda.len()] {
        if found != len {
            return Err(Error::DimensionMismatch { expected: len, found });
        }
    }
    Ok(())
}

/// `Σ_{k∈∂j} x_jk` per node.
fn outgoing_sums(model: &GmrfModel, x: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; model.n()];
    for (d, (j, _)) in model.directed().iter().enumerate() {
        sums[j] += x[d];
    }
    sums
}

/// One synchronous damped update of every message.
pub fn sweep(
    model: &GmrfModel,
    partition: &EdgePartition,
    state: &MessageState,
    options: &BpOptions,
) -> Result<MessageState> {
    options.validate()?;
    check_partition_len(model, partition)?;
    check_state_len(model, state)?;
    let (a, eps) = (options.alpha, options.epsilon);
    let h = model.h();
    let sum_lambda = outgoing_sums(model, &state.lambda);
    let sum_eta = outgoing_sums(model, &state.eta);
    let dir = model.directed();
    let mut next = MessageState { eta: vec![0.0; dir.len()], lambda: vec![0.0; dir.len()] };
    for d in 0..dir.len() {
        let (i, j) = dir.pair(d);
        let rev = d ^ 1;
        let r = model.coupling_of_directed(d);
        let (g_i, g_j) = (partition.own(d), partition.other(d));
        let den = a * g_j + (sum_lambda[j] - state.lambda[rev]) + (1.0 - a) * state.lambda[rev];
        if den.abs() <= ZERO_DENOMINATOR {
            return Err(Error::ZeroDenominator { i, j });
        }
        let lin = a * g_j * h[j] + (sum_eta[j] - state.eta[rev]) + (1.0 - a) * state.eta[rev];
        let lambda_new = a * g_i - a * a * r * r / den;
        let eta_new = a * g_i * h[i] - a * r * lin / den;
        next.lambda[d] = (1.0 - eps) * state.lambda[d] + eps / a * lambda_new;
        next.eta[d] = (1.0 - eps) * state.eta[d] + eps / a * eta_new;
    }
    if !next.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(next)
}

/// Runs from zero messages. The initial normalizability check of
/// [`init_messages`] is not applied; call it first when that matters.
pub fn run(model: &GmrfModel, partition: &EdgePartition, options: &BpOptions) -> Result<BpResult> {
    run_from(model, partition, MessageState::zeros(model), options)
}

pub fn run_from(
    model: &GmrfModel,
    partition: &EdgePartition,
    initial: MessageState,
    options: &BpOptions,
) -> Result<BpResult> {
    options.validate()?;
    check_partition_len(model, partition)?;
    check_state_len(model, &initial)?;
    let alpha = AlphaAssignment::Uniform(options.alpha);
    let mut state = initial;
    let mut trace = Vec::new();
    for iter in 1..=options.max_iters {
        let next = match sweep(model, partition, &state, options) {
            Ok(next) => next,
            Err(Error::ZeroDenominator { .. }) | Err(Error::NonFinite) => {
                return Ok(BpResult { status: BpStatus::Diverged, iterations: iter, state, marginals: None, trace });
            }
            Err(e) => return Err(e),
        };
        let delta_eta = max_abs_diff(&next.eta, &state.eta);
        let delta_lambda = max_abs_diff(&next.lambda, &state.lambda);
        state = next;
        let marginals = marginals_from_messages(model, partition, &state, options.alpha).ok();
        let f_alpha_c = match (&marginals, options.trace_energy) {
            (Some(mg), true) => f_alpha_constrained(model, &mg.m, &mg.v, &alpha).ok().map(|e| e.value),
            _ => None,
        };
        trace.push(BpTraceRow {
            iter,
            max_delta_eta: delta_eta,
            max_delta_lambda: delta_lambda,
            f_alpha_c,
            normalizable: marginals.is_some(),
        });
        if state.lambda.iter().any(|x| x.abs() > options.divergence_limit) {
            return Ok(BpResult { status: BpStatus::Diverged, iterations: iter, state, marginals: None, trace });
        }
        if delta_eta.max(delta_lambda) <= options.tol {
            let status = if marginals.is_some() { BpStatus::Converged } else { BpStatus::NonNormalizable };
            return Ok(BpResult { status, iterations: iter, state, marginals, trace });
        }
        if iter == options.max_iters {
            let status = if marginals.is_some() { BpStatus::MaxIters } else { BpStatus::NonNormalizable };
            return Ok(BpResult { status, iterations: iter, state, marginals, trace });
        }
    }
    let marginals = marginals_from_messages(model, partition, &state, options.alpha).ok();
    let status = if marginals.is_some() { BpStatus::MaxIters } else { BpStatus::NonNormalizable };
    Ok(BpResult { status, iterations: 0, state, marginals, trace })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Inverts each pair precision block
/// `[[αγ_ij^i + Σ_{l∈∂i∖j} λ_il + (1−α)λ_ij, αR_ij], [αR_ij, αγ_ij^j + Σ_{k∈∂j∖i} λ_jk + (1−α)λ_ji]]`
/// and applies it to the matching linear terms.
pub fn marginals_from_messages(
    model: &GmrfModel,
    partition: &EdgePartition,
    state: &MessageState,
    alpha: f64,
) -> Result<BpMarginals> {
    check_partition_len(model, partition)?;
    check_state_len(model, state)?;
    let a = alpha;
    let h = model.h();
    let sum_lambda = outgoing_sums(model, &state.lambda);
    let sum_eta = outgoing_sums(model, &state.eta);
    // Precision and linear term on node i's side of the directed edge d = ij.
    let side = |d: usize, i: usize| {
        let p = a * partition.own(d) + sum_lambda[i] - a * state.lambda[d];
        let l = a * partition.own(d) * h[i] + sum_eta[i] - a * state.eta[d];
        (p, l)
    };
    let mut pairs = Vec::with_capacity(model.edge_count());
    for (e, edge) in model.edges().iter().enumerate() {
        let (p_i, l_i) = side(2 * e, edge.i);
        let (p_j, l_j) = side(2 * e + 1, edge.j);
        let off = a * edge.r;
        let det = p_i * p_j - off * off;
        if !(p_i > 0.0 && det > 0.0) || !det.is_finite() {
            return Err(Error::NonNormalizablePair { i: edge.i, j: edge.j });
        }
        let (v_i, v_j, v_ij) = (p_j / det, p_i / det, -off / det);
        pairs.push(PairMarginal { v_i, v_j, v_ij, m_i: v_i * l_i + v_ij * l_j, m_j: v_ij * l_i + v_j * l_j });
    }
    let mut m = h.to_vec();
    let mut v = vec![1.0; model.n()];
    for i in 0..model.n() {
        if let Some(first) = model.neighbors(i).first() {
            let p = &pairs[first.edge];
            if i < first.node {
                (m[i], v[i]) = (p.m_i, p.v_i);
            } else {
                (m[i], v[i]) = (p.m_j, p.v_j);
            }
        }
    }
    Ok(BpMarginals { pairs, m, v })
}

/// Largest disagreement between node moments implied by different incident
/// pair marginals: `max |v_ij^i − v_ik^i|` and the same for means.
pub fn moment_match_residual(model: &GmrfModel, marginals: &BpMarginals) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..model.n() {
        let side = |nb: &crate::gmrf::Neighbor| {
            let p = &marginals.pairs[nb.edge];
            if i < nb.node {
                (p.m_i, p.v_i)
            } else {
                (p.m_j, p.v_j)
            }
        };
        let mut it = model.neighbors(i).iter();
        if let Some(first) = it.next() {
            let (m0, v0) = side(first);
            let (mut m_lo, mut m_hi, mut v_lo, mut v_hi) = (m0, m0, v0, v0);
            for nb in it {
                let (mk, vk) = side(nb);
                m_lo = m_lo.min(mk);
                m_hi = m_hi.max(mk);
                v_lo = v_lo.min(vk);
                v_hi = v_hi.max(vk);
            }
            worst = worst.max(m_hi - m_lo).max(v_hi - v_lo);
        }
    }
    worst
}
