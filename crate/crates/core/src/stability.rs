//! Edge adjacency `M(α)`, message-passing Jacobians and their spectra, the
//! determinant identities linking them to the free-energy Hessian, and
//! local-minimum certification.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::bp::{moment_match_residual, BpMarginals, BpOptions, MessageState};
use crate::energy::{pair_covariance_star, AlphaAssignment};
use crate::error::{Error, Result};
use crate::gmrf::{check_dense, EdgePartition, GmrfModel};
use crate::linalg;
use crate::marginals::MomentMarginals;
use crate::math;

/// Largest `n` for dense spectral work in this module.
pub const STABILITY_DENSE_GUARD: usize = 500;
/// Moment-matching gate for [`jacobian_spectra`].
pub const FIXED_POINT_GATE: f64 = 1e-6;
/// Gradient gate for [`is_local_minimum`].
pub const STATIONARY_GATE: f64 = 1e-6;

/// `M(α)` over directed edges: entry `(ij, jk) = 1` for `k ∈ ∂j∖i` and
/// `(ij, ji) = 1 − α`. Zero entries are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAdjacency {
    alpha: f64,
    rows: Vec<Vec<(usize, f64)>>,
}

impl EdgeAdjacency {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Stored `(column, value)` pairs of row `d`, by column.
    pub fn row(&self, d: usize) -> &[(usize, f64)] {
        &self.rows[d]
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(c, v)| v * x[c]).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), self.len());
        for (d, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(d, c)] = v;
            }
        }
        m
    }
}

pub fn edge_adjacency(model: &GmrfModel, alpha: f64) -> EdgeAdjacency {
    let dir = model.directed();
    let rows = (0..dir.len())
        .map(|d| {
            let (i, j) = dir.pair(d);
            let mut row: Vec<(usize, f64)> = model
                .neighbors(j)
                .iter()
                .filter_map(|nb| {
                    let col = dir.index(j, nb.node).expect("neighbor edge exists");
                    if nb.node == i {
                        (alpha != 1.0).then_some((col, 1.0 - alpha))
                    } else {
                        Some((col, 1.0))
                    }
                })
                .collect();
            row.sort_unstable_by_key(|&(c, _)| c);
            row
        })
        .collect();
    EdgeAdjacency { alpha, rows }
}

/// `α⁻¹ diag(w) M(α)`, dense.
fn scaled_adjacency(model: &GmrfModel, w: &[f64], alpha: f64) -> DMatrix<f64> {
    let mut m = edge_adjacency(model, alpha).to_dense();
    for (d, &wd) in w.iter().enumerate() {
        let s = wd / alpha;
        m.row_mut(d).iter_mut().for_each(|x| *x *= s);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub rho_eta: f64,
    pub rho_lambda: f64,
    /// Some `h_i ≠ 0`. With `h = 0` the η messages stay at zero and only
    /// `J_λ` governs the iteration.
    pub eta_active: bool,
    /// `ρ_λ < 1`, and `ρ_η < 1` when `eta_active`.
    pub stable: bool,
    /// Schur complement `H^v` positive definite at `(v, v_ij*)`.
    pub hessian_pd: bool,
    pub hessian_min_eig: f64,
    pub sigma_min_m: f64,
}

/// Local correlations `c_ij = v_ij*(α, R_ij, v̂_ij, v̂_ji)/√(v̂_ij v̂_ji)` per
/// directed edge, from local variances `v̂`.
pub fn local_correlations(model: &GmrfModel, vhat: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let len = model.directed().len();
    if vhat.len() != len {
        return Err(Error::DimensionMismatch { expected: len, found: vhat.len() });
    }
    if let Some(d) = vhat.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::NonpositiveVariance { i: model.directed().pair(d).0 });
    }
    Ok((0..len)
        .map(|d| {
            let (a, b) = (vhat[d], vhat[d ^ 1]);
            pair_covariance_star(alpha, model.coupling_of_directed(d), a, b) / math::sqrt(a * b)
        })
        .collect())
}

/// Node variances spread to directed edges: `v̂_ij = v_i`.
pub fn node_to_local(model: &GmrfModel, v: &[f64]) -> Vec<f64> {
    model.directed().iter().map(|(i, _)| v[i]).collect()
}

/// Transformed Jacobians `(α⁻¹ diag(c) M(α), α⁻¹ diag(c²) M(α))` for local
/// variances `v̂`. Since `αR_ij/den_ij = −v_ij/v̂_ij`, the η block is
/// similar to `+α⁻¹ diag(c) M(α)`.
pub fn local_jacobians(model: &GmrfModel, vhat: &[f64], alpha: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_dense(model.n(), STABILITY_DENSE_GUARD)?;
    let c = local_correlations(model, vhat, alpha)?;
    let sq: Vec<f64> = c.iter().map(|x| x * x).collect();
    Ok((scaled_adjacency(model, &c, alpha), scaled_adjacency(model, &sq, alpha)))
}

/// Stability report at a BP fixed point; refuses states that are not moment
/// matched to [`FIXED_POINT_GATE`].
pub fn jacobian_spectra(model: &GmrfModel, marginals: &BpMarginals, alpha: f64) -> Result<StabilityReport> {
    let residual = moment_match_residual(model, marginals);
    if !(residual <= FIXED_POINT_GATE) {
        return Err(Error::NotAFixedPoint { residual });
    }
    jacobian_spectra_at(model, &marginals.v, alpha)
}

/// Stability report at the symmetric point `v̂_ij = v_i`, without a gate.
pub fn jacobian_spectra_at(model: &GmrfModel, v: &[f64], alpha: f64) -> Result<StabilityReport> {
    if !(alpha > 0.0) {
        return Err(Error::NonpositiveAlpha { edge: 0 });
    }
    if v.len() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), found: v.len() });
    }
    let (j_eta, j_lambda) = local_jacobians(model, &node_to_local(model, v), alpha)?;
    let rho_eta = linalg::spectral_radius(&j_eta);
    let rho_lambda = linalg::spectral_radius(&j_lambda);
    let a = AlphaAssignment::Uniform(alpha);
    let moments = crate::energy::induced_marginals(model, vec![0.0; model.n()], v.to_vec(), &a)?;
    let h = hessian_schur(model, &moments, &a)?;
    let hessian_min_eig = linalg::min_symmetric_eigenvalue(&h);
    let eta_active = model.h().iter().any(|&x| x != 0.0);
    Ok(StabilityReport {
        rho_eta,
        rho_lambda,
        eta_active,
        stable: rho_lambda < 1.0 && (!eta_active || rho_eta < 1.0),
        hessian_pd: linalg::is_positive_definite(&h),
        hessian_min_eig,
        sigma_min_m: m_alpha_singularity(model, alpha)?,
    })
}

/// `max |1 − ε + εβ|` over the eigenvalues `β` of the Jacobians at the
/// symmetric point `v̂_ij = v_i` (the η block only when some `h_i ≠ 0`).
/// Below 1 iff the damped iteration is locally stable; damping can
/// stabilize eigenvalues of modulus above 1 that lie off `[1, ∞)`.
pub fn damped_radius(model: &GmrfModel, v: &[f64], alpha: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidSpec("damping must lie in (0, 1]"));
    }
    if v.len() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), found: v.len() });
    }
    let (j_eta, j_lambda) = local_jacobians(model, &node_to_local(model, v), alpha)?;
    let mut blocks = vec![j_lambda];
    if model.h().iter().any(|&x| x != 0.0) {
        blocks.push(j_eta);
    }
    let mut worst = 0.0f64;
    for b in &blocks {
        let Some(ev) = linalg::eigenvalues(b) else {
            return Ok(f64::NAN);
        };
        for (re, im) in ev {
            worst = worst.max(math::hypot(1.0 - epsilon + epsilon * re, epsilon * im));
        }
    }
    Ok(worst)
}

/// `den_ij = αγ_ij^j + Σ_{k∈∂j∖i} λ_jk + (1−α)λ_ji` and the matching linear
/// term, per directed edge.
fn denominators(
    model: &GmrfModel,
    partition: &EdgePartition,
    state: &MessageState,
    alpha: f64,
) -> (Vec<f64>, Vec<f64>) {
    let m = edge_adjacency(model, alpha);
    let ml = m.mul(&state.lambda);
    let me = m.mul(&state.eta);
    let h = model.h();
    let dir = model.directed();
    let den = (0..dir.len()).map(|d| alpha * partition.other(d) + ml[d]).collect();
    let lin = (0..dir.len()).map(|d| alpha * partition.other(d) * h[dir.pair(d).1] + me[d]).collect();
    (den, lin)
}

/// Undamped Jacobians of the message updates in the original coordinates:
/// `J_η = −α⁻¹ diag(αR̂/den) M(α)` and `J_λ = α⁻¹ diag(α²R̂²/den²) M(α)`.
pub fn raw_jacobians(
    model: &GmrfModel,
    partition: &EdgePartition,
    state: &MessageState,
    alpha: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_dense(model.n(), STABILITY_DENSE_GUARD)?;
    let (den, _) = denominators(model, partition, state, alpha);
    let len = den.len();
    let w_eta: Vec<f64> = (0..len).map(|d| -alpha * model.coupling_of_directed(d) / den[d]).collect();
    let w_lambda: Vec<f64> = (0..len)
        .map(|d| {
            let x = alpha * model.coupling_of_directed(d) / den[d];
            x * x
        })
        .collect();
    Ok((scaled_adjacency(model, &w_eta, alpha), scaled_adjacency(model, &w_lambda, alpha)))
}

/// Full damped linearization of one sweep in the variables `(η, λ)`.
pub fn linearization(
    model: &GmrfModel,
    partition: &EdgePartition,
    state: &MessageState,
    options: &BpOptions,
) -> Result<DMatrix<f64>> {
    options.validate()?;
    check_dense(model.n(), STABILITY_DENSE_GUARD)?;
    let (a, eps) = (options.alpha, options.epsilon);
    let (den, lin) = denominators(model, partition, state, a);
    let len = den.len();
    let m = edge_adjacency(model, a).to_dense();
    let mut out = DMatrix::identity(2 * len, 2 * len) * (1.0 - eps);
    for d in 0..len {
        let r = model.coupling_of_directed(d);
        let s_ee = -eps / a * a * r / den[d];
        let s_el = eps / a * a * r * lin[d] / (den[d] * den[d]);
        let s_ll = eps / a * a * a * r * r / (den[d] * den[d]);
        for c in 0..len {
            let mv = m[(d, c)];
            if mv != 0.0 {
                out[(d, c)] += s_ee * mv;
                out[(d, len + c)] += s_el * mv;
                out[(len + d, len + c)] += s_ll * mv;
            }
        }
    }
    Ok(out)
}

/// Both sides of `det(I − α⁻¹ diag(w) M(α)) = det(I + α⁻¹ A(w)) Π_{i~j}(1 − w_ij w_ji)`
/// with `A_ii = Σ_j w_ij w_ji/(1 − w_ij w_ji)` and `A_ij = −w_ij/(1 − w_ij w_ji)`.
pub fn det_identity_check(model: &GmrfModel, w: &[f64], alpha: f64) -> Result<(f64, f64)> {
    check_dense(model.n(), STABILITY_DENSE_GUARD)?;
    let len = model.directed().len();
    if w.len() != len {
        return Err(Error::DimensionMismatch { expected: len, found: w.len() });
    }
    if !(alpha > 0.0) {
        return Err(Error::NonpositiveAlpha { edge: 0 });
    }
    let n = model.n();
    let mut a = DMatrix::identity(n, n);
    let mut product = 1.0;
    for (e, edge) in model.edges().iter().enumerate() {
        let (w_ij, w_ji) = (w[2 * e], w[2 * e + 1]);
        let p = w_ij * w_ji;
        if p == 1.0 {
            return Err(Error::DegenerateEdge { i: edge.i, j: edge.j });
        }
        let q = 1.0 - p;
        product *= q;
        a[(edge.i, edge.i)] += p / q / alpha;
        a[(edge.j, edge.j)] += p / q / alpha;
        a[(edge.i, edge.j)] -= w_ij / q / alpha;
        a[(edge.j, edge.i)] -= w_ji / q / alpha;
    }
    let lhs = linalg::determinant(&(DMatrix::identity(len, len) - scaled_adjacency(model, w, alpha)));
    Ok((lhs, linalg::determinant(&a) * product))
}

/// `c_ij = v_ij/√(v_i v_j)` per undirected edge.
fn correlations(model: &GmrfModel, marginals: &MomentMarginals) -> Vec<f64> {
    let v = marginals.v();
    model.edges().iter().zip(marginals.v_edge()).map(|(e, c)| c / math::sqrt(v[e.i] * v[e.j])).collect()
}

fn check_marginals(model: &GmrfModel, marginals: &MomentMarginals, alpha: &AlphaAssignment) -> Result<()> {
    alpha.validate(model)?;
    // Marginals built for another model of a different size.
    if marginals.v().len() != model.n() || marginals.v_edge().len() != model.edge_count() {
        return Err(Error::DimensionMismatch { expected: model.n(), found: marginals.v().len() });
    }
    Ok(())
}

/// Schur complement of the full Hessian onto the node variances:
/// `H_ii = (1 + Σ_j α_ij⁻¹ c⁴/(1 − c⁴))/(2v_i²)`,
/// `H_ij = −α_ij⁻¹ c²/((1 − c⁴) 2 v_i v_j)`. For `v_ij = v_ij*` this is also the
/// Hessian of the constrained energy in `v`.
pub fn hessian_schur(model: &GmrfModel, marginals: &MomentMarginals, alpha: &AlphaAssignment) -> Result<DMatrix<f64>> {
    check_marginals(model, marginals, alpha)?;
    check_dense(model.n(), crate::gmrf::DEFAULT_DENSE_GUARD)?;
    let v = marginals.v();
    let n = model.n();
    let mut diag_sum = vec![0.0; n];
    let mut h = DMatrix::zeros(n, n);
    for (e, (edge, c)) in model.edges().iter().zip(correlations(model, marginals)).enumerate() {
        let c2 = c * c;
        let q = 1.0 - c2 * c2;
        let inv_a = 1.0 / alpha.at(e);
        diag_sum[edge.i] += inv_a * c2 * c2 / q;
        diag_sum[edge.j] += inv_a * c2 * c2 / q;
        let off = -0.5 * inv_a * c2 / (q * v[edge.i] * v[edge.j]);
        h[(edge.i, edge.j)] = off;
        h[(edge.j, edge.i)] = off;
    }
    for i in 0..n {
        h[(i, i)] = 0.5 * (1.0 + diag_sum[i]) / (v[i] * v[i]);
    }
    Ok(h)
}

/// Hessian of `F_α` in the order `(m, v_ij, v)`.
pub fn full_hessian(model: &GmrfModel, marginals: &MomentMarginals, alpha: &AlphaAssignment) -> Result<DMatrix<f64>> {
    check_marginals(model, marginals, alpha)?;
    check_dense(model.n(), crate::gmrf::DEFAULT_DENSE_GUARD)?;
    let (n, ne) = (model.n(), model.edge_count());
    let v = marginals.v();
    let size = 2 * n + ne;
    let mut h = DMatrix::zeros(size, size);
    h.view_mut((0, 0), (n, n)).copy_from(&model.dense_q());
    let vo = n + ne;
    for i in 0..n {
        h[(vo + i, vo + i)] = 0.5 / (v[i] * v[i]);
    }
    for (e, (edge, &w)) in model.edges().iter().zip(marginals.v_edge()).enumerate() {
        let inv_a = 1.0 / alpha.at(e);
        let (vi, vj) = (v[edge.i], v[edge.j]);
        let p = vi * vj;
        let d = p - w * w;
        let d2 = d * d;
        let (ei, ej) = (vo + edge.i, vo + edge.j);
        h[(n + e, n + e)] = inv_a * (p + w * w) / d2;
        h[(n + e, ei)] = -inv_a * w * vj / d2;
        h[(ei, n + e)] = h[(n + e, ei)];
        h[(n + e, ej)] = -inv_a * w * vi / d2;
        h[(ej, n + e)] = h[(n + e, ej)];
        h[(ei, ei)] += 0.5 * inv_a * (vj * vj / d2 - 1.0 / (vi * vi));
        h[(ej, ej)] += 0.5 * inv_a * (vi * vi / d2 - 1.0 / (vj * vj));
        h[(ei, ej)] += 0.5 * inv_a * w * w / d2;
        h[(ej, ei)] += 0.5 * inv_a * w * w / d2;
    }
    Ok(h)
}

/// Both sides of `det(I − α⁻¹ diag(c²) M(α)) = f(V) det H[F_α](V)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianDetIdentity {
    pub lhs: f64,
    /// `f(V) = 2ⁿ α^{#edges} det(Q)⁻¹ Π_k v_k² Π_{i~j} (v_iv_j − v_ij²)²/(v_iv_j + v_ij²) (1 − c_ij⁴)`.
    pub rhs: f64,
    /// Same with `α` raised to the number of directed edges and `(1 − c_ij²)`
    /// in place of `(1 − c_ij⁴)`.
    pub rhs_printed: f64,
}

pub fn hessian_det_identity(model: &GmrfModel, marginals: &MomentMarginals, alpha: f64) -> Result<HessianDetIdentity> {
    let a = AlphaAssignment::Uniform(alpha);
    check_marginals(model, marginals, &a)?;
    check_dense(model.n(), STABILITY_DENSE_GUARD)?;
    let v = marginals.v();
    let c = correlations(model, marginals);
    let w: Vec<f64> = (0..model.directed().len()).map(|d| c[d / 2] * c[d / 2]).collect();
    let len = w.len();
    let lhs = linalg::determinant(&(DMatrix::identity(len, len) - scaled_adjacency(model, &w, alpha)));
    let det_h = linalg::determinant(&full_hessian(model, marginals, &a)?);
    let det_q = linalg::determinant(&model.dense_q());
    let mut common = libm::pow(2.0, model.n() as f64) / det_q;
    for &vk in v {
        common *= vk * vk;
    }
    let (mut edge_fix, mut edge_printed) = (1.0, 1.0);
    for (edge, (&vij, &ce)) in model.edges().iter().zip(marginals.v_edge().iter().zip(&c)) {
        let p = v[edge.i] * v[edge.j];
        let base = (p - vij * vij) * (p - vij * vij) / (p + vij * vij);
        let c2 = ce * ce;
        edge_fix *= base * (1.0 - c2 * c2);
        edge_printed *= base * (1.0 - c2);
    }
    let ne = model.edge_count() as f64;
    let f = common * libm::pow(alpha, ne) * edge_fix;
    let f_printed = common * libm::pow(alpha, 2.0 * ne) * edge_printed;
    Ok(HessianDetIdentity { lhs, rhs: f * det_h, rhs_printed: f_printed * det_h })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimumVerdict {
    Minimum,
    SaddleOrMax,
    /// Smallest eigenvalue within roundoff of zero.
    Indeterminate,
}

/// Gradient of `F_α` in `(m, v_ij, v)`, infinity norm.
fn gradient_norm(model: &GmrfModel, marginals: &MomentMarginals, alpha: &AlphaAssignment) -> f64 {
    let (m, v) = (marginals.m(), marginals.v());
    let qm = model.q_mul(m);
    let mut norm = qm.iter().zip(model.h()).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    let mut gv: Vec<f64> = v.iter().map(|&x| 0.5 - 0.5 / x).collect();
    for (e, (edge, &w)) in model.edges().iter().zip(marginals.v_edge()).enumerate() {
        let inv_a = 1.0 / alpha.at(e);
        let (vi, vj) = (v[edge.i], v[edge.j]);
        let d = vi * vj - w * w;
        norm = norm.max((edge.r + inv_a * w / d).abs());
        gv[edge.i] += 0.5 * inv_a * (1.0 / vi - vj / d);
        gv[edge.j] += 0.5 * inv_a * (1.0 / vj - vi / d);
    }
    gv.iter().fold(norm, |acc, g| acc.max(g.abs()))
}

/// Second-order check at a stationary point of `F_α`: the full Hessian is
/// positive definite iff `H^v` is.
pub fn is_local_minimum(
    model: &GmrfModel,
    marginals: &MomentMarginals,
    alpha: &AlphaAssignment,
) -> Result<MinimumVerdict> {
    check_marginals(model, marginals, alpha)?;
    let grad_norm = gradient_norm(model, marginals, alpha);
    if !(grad_norm <= STATIONARY_GATE) {
        return Err(Error::NotStationary { grad_norm });
    }
    let h = hessian_schur(model, marginals, alpha)?;
    let min = linalg::min_symmetric_eigenvalue(&h);
    let scale = h.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    Ok(if min.abs() <= 1e-12 * scale {
        MinimumVerdict::Indeterminate
    } else if min > 0.0 {
        MinimumVerdict::Minimum
    } else {
        MinimumVerdict::SaddleOrMax
    })
}

/// `σ_min(M(α))` by dense SVD.
pub fn m_alpha_singularity(model: &GmrfModel, alpha: f64) -> Result<f64> {
    check_dense(model.n(), STABILITY_DENSE_GUARD)?;
    if model.edge_count() == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(linalg::smallest_singular_value(&edge_adjacency(model, alpha).to_dense()))
}

/// `max_ij α⁻¹ |c_ij| ((n_j − 1) + |1 − α|)`: a row-sum bound on both
/// transformed Jacobians built from the same `v̂`.
pub fn gershgorin_bound(model: &GmrfModel, vhat: &[f64], alpha: f64) -> Result<f64> {
    let c = local_correlations(model, vhat, alpha)?;
    let dir = model.directed();
    Ok((0..dir.len()).fold(0.0f64, |acc, d| {
        let j = dir.pair(d).1;
        acc.max(c[d].abs() / alpha * ((model.degree(j) - 1) as f64 + (1.0 - alpha).abs()))
    }))
}

/// Distinct positive node degrees. `M(α)` is singular at each of them: with
/// `x_jk = 1` on the edges leaving `j` and 0 elsewhere, `M(n_j) x = 0`.
pub fn singular_alphas(model: &GmrfModel) -> Vec<usize> {
    let mut d = model.degrees();
    d.sort_unstable();
    d.dedup();
    d.retain(|&k| k > 0);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bp::{run, BpStatus};
    use crate::gmrf::{partition_potentials, PartitionStrategy};
    use crate::kregular::{build_k_regular, KRegularSpec};

    fn two_node() -> GmrfModel {
        GmrfModel::from_couplings(vec![1.0, 0.0], &[(0, 1, 0.5)]).unwrap()
    }

    fn triangle() -> GmrfModel {
        GmrfModel::from_couplings(vec![0.0; 3], &[(0, 1, 0.2), (1, 2, 0.2), (0, 2, 0.2)]).unwrap()
    }

    #[test]
    fn adjacency_small_cases() {
        let m = two_node();
        assert_eq!(edge_adjacency(&m, 1.0).to_dense(), DMatrix::zeros(2, 2));
        let d = edge_adjacency(&m, 2.0).to_dense();
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
        let t = triangle();
        let adj = edge_adjacency(&t, 1.0);
        // (0,1) -> (1,2)
        let d01 = t.directed().index(0, 1).unwrap();
        let d12 = t.directed().index(1, 2).unwrap();
        assert_eq!(adj.row(d01), &[(d12, 1.0)]);
    }

    #[test]
    fn adjacency_row_sums_and_counts() {
        let m =
            GmrfModel::from_couplings(vec![0.0; 5], &[(0, 1, 0.1), (0, 2, 0.1), (1, 2, 0.1), (2, 3, 0.1), (3, 4, 0.1)])
                .unwrap();
        for alpha in [0.3, 1.0, 2.5] {
            let adj = edge_adjacency(&m, alpha);
            for d in 0..adj.len() {
                let j = m.directed().pair(d).1;
                let sum: f64 = adj.row(d).iter().map(|x| x.1).sum();
                assert!((sum - (m.degree(j) as f64 - alpha)).abs() < 1e-15);
                let expected = if alpha == 1.0 { m.degree(j) - 1 } else { m.degree(j) };
                assert_eq!(adj.row(d).len(), expected);
            }
        }
    }

    #[test]
    fn two_node_determinant_identity() {
        let m = two_node();
        let (lhs, rhs) = det_identity_check(&m, &[0.3, 0.5], 2.0).unwrap();
        assert!((lhs - 0.9625).abs() < 1e-14);
        assert!((rhs - 0.9625).abs() < 1e-14);
        let (lhs, rhs) = det_identity_check(&m, &[0.0, 0.0], 0.7).unwrap();
        assert_eq!((lhs, rhs), (1.0, 1.0));
        assert_eq!(det_identity_check(&m, &[2.0, 0.5], 1.0), Err(Error::DegenerateEdge { i: 0, j: 1 }));
    }

    #[test]
    fn determinant_identity_on_a_loopy_graph() {
        let m =
            GmrfModel::from_couplings(vec![0.0; 4], &[(0, 1, 0.1), (1, 2, 0.1), (2, 3, 0.1), (0, 3, 0.1), (0, 2, 0.1)])
                .unwrap();
        let w: Vec<f64> = (0..10).map(|k| 0.1 * k as f64 - 0.45).collect();
        for alpha in [0.2, 1.0, 3.7] {
            let (lhs, rhs) = det_identity_check(&m, &w, alpha).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{lhs} {rhs}");
        }
    }

    #[test]
    fn schur_two_node_values() {
        let m = two_node();
        let mm = MomentMarginals::new(&m, vec![0.0; 2], vec![1.0; 2], vec![0.5]).unwrap();
        let h = hessian_schur(&m, &mm, &AlphaAssignment::Uniform(1.0)).unwrap();
        assert!((h[(0, 0)] - 0.533333).abs() < 1e-6);
        assert!((h[(0, 1)] + 0.133333).abs() < 1e-6);
        let edgeless = GmrfModel::from_couplings(vec![0.0; 2], &[]).unwrap();
        let mm = MomentMarginals::new(&edgeless, vec![0.0; 2], vec![2.0, 0.5], vec![]).unwrap();
        let h = hessian_schur(&edgeless, &mm, &AlphaAssignment::Uniform(1.0)).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[0.125, 0.0, 0.0, 2.0]));
    }

    #[test]
    fn schur_complement_of_full_hessian() {
        let m = triangle();
        let mm = MomentMarginals::new(&m, vec![0.1, 0.2, 0.3], vec![1.2, 0.8, 1.5], vec![0.3, -0.2, 0.4]).unwrap();
        let a = AlphaAssignment::PerEdge(vec![0.5, 1.0, 2.0]);
        let full = full_hessian(&m, &mm, &a).unwrap();
        let (n, ne) = (3, 3);
        let b = full.view((n, n), (ne, ne)).into_owned();
        let c = full.view((n, n + ne), (ne, n)).into_owned();
        let d = full.view((n + ne, n + ne), (n, n)).into_owned();
        let schur = d - c.transpose() * b.try_inverse().unwrap() * c;
        let h = hessian_schur(&m, &mm, &a).unwrap();
        assert!((schur - h).abs().max() < 1e-12);
    }

    #[test]
    fn hessian_identity_corrected_and_printed() {
        let m = triangle();
        let mm = MomentMarginals::new(&m, vec![0.0; 3], vec![1.2, 0.8, 1.5], vec![0.3, -0.2, 0.4]).unwrap();
        let id = hessian_det_identity(&m, &mm, 1.7).unwrap();
        assert!((id.lhs - id.rhs).abs() < 1e-10 * id.lhs.abs());
        assert!((id.lhs - id.rhs_printed).abs() > 1e-3 * id.lhs.abs());
        let zero = MomentMarginals::new(&m, vec![0.0; 3], vec![1.2, 0.8, 1.5], vec![0.0; 3]).unwrap();
        let id = hessian_det_identity(&m, &zero, 1.7).unwrap();
        assert_eq!(id.lhs, 1.0);
        assert!((id.rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_node_tree_is_stable() {
        let m = two_node();
        let p = partition_potentials(&m, PartitionStrategy::Symmetric, None).unwrap();
        let res = run(&m, &p, &BpOptions::default()).unwrap();
        let report = jacobian_spectra(&m, res.marginals.as_ref().unwrap(), 1.0).unwrap();
        assert_eq!((report.rho_eta, report.rho_lambda), (0.0, 0.0));
        assert!(report.stable && report.hessian_pd);
        assert_eq!(gershgorin_bound(&m, &node_to_local(&m, &res.marginals.unwrap().v), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn damping_stabilizes_a_negative_eta_mode() {
        let m = build_k_regular(&KRegularSpec { n: 8, k: 4, r: 0.27 }).unwrap();
        let p = partition_potentials(&m, PartitionStrategy::Symmetric, None).unwrap();
        let res = run(&m, &p, &BpOptions { epsilon: 0.5, ..Default::default() }).unwrap();
        let mg = res.marginals.unwrap();
        let report = jacobian_spectra(&m, &mg, 1.0).unwrap();
        assert!(report.rho_eta > 1.19 && report.rho_lambda < 0.5);
        assert!(!report.eta_active && report.stable);

        let with_h = m.with_h(vec![0.3, -0.1, 0.5, 0.0, 0.2, 0.9, -0.4, 0.1]).unwrap();
        assert!(!jacobian_spectra_at(&with_h, &mg.v, 1.0).unwrap().stable);
        let undamped = damped_radius(&with_h, &mg.v, 1.0, 1.0).unwrap();
        assert!((undamped - report.rho_eta).abs() < 1e-9);
        assert!(damped_radius(&with_h, &mg.v, 1.0, 0.5).unwrap() < 0.8);
        assert!((damped_radius(&m, &mg.v, 1.0, 1.0).unwrap() - report.rho_lambda).abs() < 1e-9);
    }

    #[test]
    fn fixed_point_gate() {
        let m = triangle();
        let p = partition_potentials(&m, PartitionStrategy::Symmetric, None).unwrap();
        let res = run(&m, &p, &BpOptions { max_iters: 1, ..Default::default() }).unwrap();
        let mut mg = res.marginals.unwrap();
        mg.pairs[0].v_i += 1e-3;
        assert!(matches!(jacobian_spectra(&m, &mg, 1.0), Err(Error::NotAFixedPoint { .. })));
    }

    #[test]
    fn raw_and_transformed_spectra_agree_at_a_fixed_point() {
        let m = build_k_regular(&KRegularSpec { n: 8, k: 4, r: 0.2 }).unwrap().with_h(vec![0.3; 8]).unwrap();
        let p = partition_potentials(&m, PartitionStrategy::Symmetric, None).unwrap();
        let opts = BpOptions { alpha: 0.7, tol: 1e-14, ..Default::default() };
        let res = run(&m, &p, &opts).unwrap();
        assert_eq!(res.status, BpStatus::Converged);
        let (re, rl) = raw_jacobians(&m, &p, &res.state, 0.7).unwrap();
        let report = jacobian_spectra(&m, res.marginals.as_ref().unwrap(), 0.7).unwrap();
        assert!((linalg::spectral_radius(&re) - report.rho_eta).abs() < 1e-8);
        assert!((linalg::spectral_radius(&rl) - report.rho_lambda).abs() < 1e-8);
        assert!(report.stable && report.hessian_pd);
        let (te, tl) = local_jacobians(&m, &node_to_local(&m, &res.marginals.unwrap().v), 0.7).unwrap();
        for (raw, tr) in [(re, te), (rl, tl)] {
            let (a, b) = (linalg::eigenvalues(&raw).unwrap(), linalg::eigenvalues(&tr).unwrap());
            for (x, y) in a.iter().zip(&b) {
                assert!((x.0 - y.0).abs() < 1e-7 && (x.1 - y.1).abs() < 1e-7, "{x:?} {y:?}");
            }
        }
    }

    #[test]
    fn linearization_matches_finite_differences() {
        let m = GmrfModel::from_couplings(
            vec![0.5, -0.2, 1.0, 0.1],
            &[(0, 1, 0.3), (1, 2, -0.25), (2, 3, 0.2), (0, 2, 0.15)],
        )
        .unwrap();
        let p = partition_potentials(&m, PartitionStrategy::Symmetric, None).unwrap();
        let opts = BpOptions { alpha: 1.6, epsilon: 0.7, ..Default::default() };
        let len = m.directed().len();
        let state = MessageState {
            eta: (0..len).map(|k| 0.05 * k as f64 - 0.2).collect(),
            lambda: (0..len).map(|k| 0.02 * k as f64).collect(),
        };
        let jac = linearization(&m, &p, &state, &opts).unwrap();
        let step = 1e-6;
        for col in 0..2 * len {
            let mut plus = state.clone();
            let mut minus = state.clone();
            if col < len {
                plus.eta[col] += step;
                minus.eta[col] -= step;
            } else {
                plus.lambda[col - len] += step;
                minus.lambda[col - len] -= step;
            }
            let sp = crate::bp::sweep(&m, &p, &plus, &opts).unwrap();
            let sm = crate::bp::sweep(&m, &p, &minus, &opts).unwrap();
            for row in 0..2 * len {
                let (a, b) =
                    if row < len { (sp.eta[row], sm.eta[row]) } else { (sp.lambda[row - len], sm.lambda[row - len]) };
                let fd = (a - b) / (2.0 * step);
                assert!((fd - jac[(row, col)]).abs() < 1e-7, "({row},{col}) {fd} {}", jac[(row, col)]);
            }
        }
    }

    #[test]
    fn m_alpha_singular_at_regular_degree() {
        let k4 = build_k_regular(&KRegularSpec { n: 8, k: 4, r: 0.1 }).unwrap();
        assert!(m_alpha_singularity(&k4, 4.0).unwrap() <= 1e-10);
        assert!(m_alpha_singularity(&k4, 1.0).unwrap() > 1e-3);
        assert_eq!(singular_alphas(&k4), vec![4]);
    }

    #[test]
    fn m_alpha_is_singular_at_every_degree() {
        // Irregular graphs are singular at each node degree too.
        let star = GmrfModel::from_couplings(vec![0.0; 4], &[(0, 1, 0.1), (0, 2, 0.1), (0, 3, 0.1)]).unwrap();
        for alpha in [1.0, 3.0] {
            assert!(m_alpha_singularity(&star, alpha).unwrap() < 1e-10);
        }
        assert!(m_alpha_singularity(&star, 2.0).unwrap() > 1e-3);
    }

    #[test]
    fn gershgorin_bounds_both_radii() {
        let m = GmrfModel::from_couplings(
            vec![0.0; 5],
            &[(0, 1, 0.3), (1, 2, 0.2), (2, 0, -0.25), (2, 3, 0.3), (3, 4, 0.1)],
        )
        .unwrap();
        let len = m.directed().len();
        for alpha in [0.3, 1.0, 2.0] {
            let vhat: Vec<f64> = (0..len).map(|k| 0.5 + 0.1 * k as f64).collect();
            let bound = gershgorin_bound(&m, &vhat, alpha).unwrap();
            let (je, jl) = local_jacobians(&m, &vhat, alpha).unwrap();
            assert!(bound + 1e-12 >= linalg::spectral_radius(&je));
            assert!(bound + 1e-12 >= linalg::spectral_radius(&jl));
        }
    }

    #[test]
    fn small_alpha_shrinks_the_lambda_jacobian() {
        let m = build_k_regular(&KRegularSpec { n: 8, k: 4, r: 0.27 }).unwrap();
        let vhat = vec![1.0; m.directed().len()];
        let c = local_correlations(&m, &vhat, 1e-6).unwrap();
        assert!(c.iter().all(|x| x * x / 1e-6 <= 1e-5));
    }

    #[test]
    fn verdicts() {
        let edgeless = GmrfModel::from_couplings(vec![0.5, -1.0], &[]).unwrap();
        let mm = MomentMarginals::new(&edgeless, vec![0.5, -1.0], vec![1.0; 2], vec![]).unwrap();
        assert_eq!(is_local_minimum(&edgeless, &mm, &AlphaAssignment::Uniform(1.0)).unwrap(), MinimumVerdict::Minimum);
        let mm = MomentMarginals::new(&edgeless, vec![0.0, -1.0], vec![1.0; 2], vec![]).unwrap();
        assert!(matches!(
            is_local_minimum(&edgeless, &mm, &AlphaAssignment::Uniform(1.0)),
            Err(Error::NotStationary { .. })
        ));
    }
}
