//! Mean-field, fractional Bethe and constrained fractional Bethe energies in
//! moment parameters, with their closed-form inner minimizer and gradient.
//!
//! Additive constants are dropped throughout: only differences and the
//! locations of minima are meaningful.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gmrf::{exact_means, GmrfModel, DEFAULT_DENSE_GUARD};
use crate::marginals::{check_variances, MomentMarginals};
use crate::math;

/// Fractional parameters `α_ij > 0`, one per undirected edge.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaAssignment {
    Uniform(f64),
    PerEdge(Vec<f64>),
}

impl AlphaAssignment {
    pub fn at(&self, edge: usize) -> f64 {
        match self {
            Self::Uniform(a) => *a,
            Self::PerEdge(a) => a[edge],
        }
    }

    pub fn validate(&self, model: &GmrfModel) -> Result<()> {
        match self {
            Self::Uniform(a) => {
                if !(*a > 0.0) || !a.is_finite() {
                    return Err(Error::NonpositiveAlpha { edge: 0 });
                }
            }
            Self::PerEdge(a) => {
                if a.len() != model.edge_count() {
                    return Err(Error::DimensionMismatch { expected: model.edge_count(), found: a.len() });
                }
                if let Some(edge) = a.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(Error::NonpositiveAlpha { edge });
                }
            }
        }
        Ok(())
    }
}

impl From<f64> for AlphaAssignment {
    fn from(a: f64) -> Self {
        Self::Uniform(a)
    }
}

/// Named parts of an energy; `value` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyComponents {
    /// `−hᵀm + ½mᵀQm`.
    pub mean: f64,
    /// `½tr(QᵀV)`; for the constrained energy, evaluated at `v_ij*`.
    pub trace: f64,
    /// `−½ Σ_{i~j} α_ij⁻¹ log(1 − v_ij²/(v_i v_j))`.
    pub edge_log: f64,
    /// `−½ Σ_k log v_k`.
    pub node_log: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyValue {
    pub value: f64,
    pub components: EnergyComponents,
}

impl EnergyValue {
    fn from_components(components: EnergyComponents) -> Self {
        let c = components;
        Self { value: c.mean + c.trace + c.edge_log + c.node_log, components }
    }
}

fn check_lengths(model: &GmrfModel, m: &[f64], v: &[f64]) -> Result<()> {
    for len in [m.len(), v.len()] {
        if len != model.n() {
            return Err(Error::DimensionMismatch { expected: model.n(), found: len });
        }
    }
    check_variances(v)
}

fn mean_term(model: &GmrfModel, m: &[f64]) -> f64 {
    let qm = model.q_mul(m);
    m.iter().zip(model.h()).zip(&qm).map(|((mi, hi), qi)| -hi * mi + 0.5 * mi * qi).sum()
}

fn node_log_term(v: &[f64]) -> f64 {
    -0.5 * v.iter().map(|&x| math::ln(x)).sum::<f64>()
}

/// `F_MF(m, v) = −hᵀm + ½mᵀQm + ½Σ_k v_k − ½Σ_k log v_k`.
pub fn f_mf(model: &GmrfModel, m: &[f64], v: &[f64]) -> Result<EnergyValue> {
    check_lengths(model, m, v)?;
    Ok(EnergyValue::from_components(EnergyComponents {
        mean: mean_term(model, m),
        trace: 0.5 * v.iter().sum::<f64>(),
        edge_log: 0.0,
        node_log: node_log_term(v),
    }))
}

/// Minimizer of [`f_mf`]: `m = Q⁻¹h`, `v_k = 1/Q_kk = 1`.
pub fn mf_minimum(model: &GmrfModel) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = exact_means(model, DEFAULT_DENSE_GUARD)?;
    Ok((m, vec![1.0; model.n()]))
}

/// Stationary edge covariance of the fractional energy for fixed `v_i, v_j`:
/// `v_ij* = −sign(R)(√(1 + (2αR)² v_i v_j) − 1)/(2α|R|)`, evaluated in the
/// cancellation-free form `−2αR v_i v_j / (1 + √(1 + (2αR)² v_i v_j))`.
pub fn pair_covariance_star(alpha: f64, r: f64, v_i: f64, v_j: f64) -> f64 {
    let p = v_i * v_j;
    let s = math::sqrt(1.0 + 4.0 * alpha * alpha * r * r * p);
    -2.0 * alpha * r * p / (1.0 + s)
}

/// `(s − 1, s)` with `s = √(1 + (2αR)² v_i v_j)`, `s − 1` without cancellation.
fn edge_root(alpha: f64, r: f64, p: f64) -> (f64, f64) {
    let x2 = 4.0 * alpha * alpha * r * r * p;
    let s = math::sqrt(1.0 + x2);
    (x2 / (1.0 + s), s)
}

/// `F_α(m, V)` for general (normalizable) moment parameters.
pub fn f_alpha(model: &GmrfModel, marginals: &MomentMarginals, alpha: &AlphaAssignment) -> Result<EnergyValue> {
    alpha.validate(model)?;
    let (m, v, v_edge) = (marginals.m(), marginals.v(), marginals.v_edge());
    check_lengths(model, m, v)?;
    let mut trace = 0.5 * v.iter().sum::<f64>();
    let mut edge_log = 0.0;
    for (e, (edge, &c)) in model.edges().iter().zip(v_edge).enumerate() {
        let p = v[edge.i] * v[edge.j];
        if c * c >= p {
            return Err(Error::NonNormalizablePair { i: edge.i, j: edge.j });
        }
        trace += edge.r * c;
        edge_log -= 0.5 / alpha.at(e) * math::ln_1p(-c * c / p);
    }
    Ok(EnergyValue::from_components(EnergyComponents {
        mean: mean_term(model, m),
        trace,
        edge_log,
        node_log: node_log_term(v),
    }))
}

/// `F^c_α(m, v) = min over edge covariances of F_α`, i.e. `F_α` at `v_ij*`.
pub fn f_alpha_constrained(model: &GmrfModel, m: &[f64], v: &[f64], alpha: &AlphaAssignment) -> Result<EnergyValue> {
    alpha.validate(model)?;
    check_lengths(model, m, v)?;
    let mut trace = 0.5 * v.iter().sum::<f64>();
    let mut edge_log = 0.0;
    for (e, edge) in model.edges().iter().enumerate() {
        let a = alpha.at(e);
        let (s_minus_1, _) = edge_root(a, edge.r, v[edge.i] * v[edge.j]);
        trace -= 0.5 / a * s_minus_1;
        // log(1 − c*²) = log(2/(1 + s)) = −log1p((s − 1)/2)
        edge_log += 0.5 / a * math::ln_1p(0.5 * s_minus_1);
    }
    Ok(EnergyValue::from_components(EnergyComponents {
        mean: mean_term(model, m),
        trace,
        edge_log,
        node_log: node_log_term(v),
    }))
}

/// `F_MF(m, v) − ½ √vᵀ|R| √v`, the `α → ∞` limit of the constrained energy.
pub fn lower_bound(model: &GmrfModel, m: &[f64], v: &[f64]) -> Result<EnergyValue> {
    let mut value = f_mf(model, m, v)?;
    let coupling: f64 = model.edges().iter().map(|e| e.r.abs() * math::sqrt(v[e.i] * v[e.j])).sum();
    value.components.trace -= coupling;
    value.value -= coupling;
    Ok(value)
}

/// Gradient of [`f_alpha_constrained`]: `∂/∂m = Qm − h` and
/// `∂/∂v_i = ½ − 1/(2v_i) − Σ_{j∈∂i} α R_ij² v_j / (1 + s_ij)`.
pub fn grad_f_alpha_constrained(
    model: &GmrfModel,
    m: &[f64],
    v: &[f64],
    alpha: &AlphaAssignment,
) -> Result<(Vec<f64>, Vec<f64>)> {
    alpha.validate(model)?;
    check_lengths(model, m, v)?;
    let grad_m = model.q_mul(m).iter().zip(model.h()).map(|(a, b)| a - b).collect();
    Ok((grad_m, grad_v_unchecked(model, v, alpha)))
}

pub(crate) fn grad_v_unchecked(model: &GmrfModel, v: &[f64], alpha: &AlphaAssignment) -> Vec<f64> {
    let mut g: Vec<f64> = v.iter().map(|&x| 0.5 - 0.5 / x).collect();
    for (e, edge) in model.edges().iter().enumerate() {
        let a = alpha.at(e);
        let (_, s) = edge_root(a, edge.r, v[edge.i] * v[edge.j]);
        let w = a * edge.r * edge.r / (1.0 + s);
        g[edge.i] -= w * v[edge.j];
        g[edge.j] -= w * v[edge.i];
    }
    g
}

/// `F^c_α` with the mean part evaluated at `m`; `v`-only convenience used by
/// the minimizer and the profiles.
pub(crate) fn constrained_value(model: &GmrfModel, mean_part: f64, v: &[f64], alpha: &AlphaAssignment) -> f64 {
    let mut value = 0.5 * v.iter().sum::<f64>() + node_log_term(v) + mean_part;
    for (e, edge) in model.edges().iter().enumerate() {
        let a = alpha.at(e);
        let (s_minus_1, _) = edge_root(a, edge.r, v[edge.i] * v[edge.j]);
        value += 0.5 / a * (math::ln_1p(0.5 * s_minus_1) - s_minus_1);
    }
    value
}

pub(crate) fn mean_energy(model: &GmrfModel, m: &[f64]) -> f64 {
    mean_term(model, m)
}

/// Moment marginals `(m, v, {v_ij*})` induced by node variances.
pub fn induced_marginals(
    model: &GmrfModel,
    m: Vec<f64>,
    v: Vec<f64>,
    alpha: &AlphaAssignment,
) -> Result<MomentMarginals> {
    alpha.validate(model)?;
    check_lengths(model, &m, &v)?;
    let v_edge = model
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| pair_covariance_star(alpha.at(e), edge.r, v[edge.i], v[edge.j]))
        .collect();
    MomentMarginals::new(model, m, v, v_edge)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> GmrfModel {
        GmrfModel::from_couplings(vec![0.0, 0.0], &[(0, 1, 0.5)]).unwrap()
    }

    #[test]
    fn f_mf_two_node_origin() {
        let e = f_mf(&two_node(), &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((e.value - 1.0).abs() < 1e-15);
        assert!(matches!(f_mf(&two_node(), &[0.0, 0.0], &[1.0, 0.0]), Err(Error::NonpositiveVariance { i: 1 })));
    }

    #[test]
    fn mf_minimum_two_node() {
        let model = GmrfModel::from_couplings(vec![1.0, 0.0], &[(0, 1, 0.5)]).unwrap();
        let (m, v) = mf_minimum(&model).unwrap();
        assert!((m[0] - 4.0 / 3.0).abs() < 1e-14 && (m[1] + 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(v, vec![1.0, 1.0]);
        let (m, v) = mf_minimum(&two_node()).unwrap();
        assert_eq!((m, v), (vec![0.0, 0.0], vec![1.0, 1.0]));
    }

    #[test]
    fn pair_covariance_values() {
        let sqrt2m1 = 2f64.sqrt() - 1.0;
        assert!((pair_covariance_star(1.0, -0.5, 1.0, 1.0) - sqrt2m1).abs() < 1e-15);
        assert!((pair_covariance_star(1.0, 0.5, 1.0, 1.0) + sqrt2m1).abs() < 1e-15);
        assert_eq!(pair_covariance_star(3.0, 0.0, 2.0, 5.0), 0.0);
        let c = pair_covariance_star(1.0, 0.5, 1.0, 1.0);
        assert!((0.5 + c / (1.0 - c * c)).abs() < 1e-12);
    }

    #[test]
    fn f_alpha_two_node_value() {
        let model = two_node();
        let c = 1.0 - 2f64.sqrt();
        let mm = MomentMarginals::new(&model, vec![0.0; 2], vec![1.0; 2], vec![c]).unwrap();
        let e = f_alpha(&model, &mm, &AlphaAssignment::Uniform(1.0)).unwrap();
        let expected = 1.0 + c * 0.5 - 0.5 * (1.0 - c * c).ln();
        assert!((e.value - expected).abs() < 1e-15);
        assert!((e.value - 0.887006422).abs() < 1e-8);
        let c = &e.components;
        assert!((c.mean + c.trace + c.edge_log + c.node_log - e.value).abs() < 1e-12);
    }

    #[test]
    fn constrained_matches_substitution() {
        let model = two_node();
        let e = f_alpha_constrained(&model, &[0.0; 2], &[1.0; 2], &AlphaAssignment::Uniform(1.0)).unwrap();
        assert!((e.value - 0.887006422).abs() < 1e-8);
    }

    #[test]
    fn no_edges_reduces_to_mean_field() {
        let model = GmrfModel::from_couplings(vec![0.3, -0.2, 1.0], &[]).unwrap();
        let (m, v) = ([0.1, 0.2, -0.4], [0.5, 2.0, 1.3]);
        let mf = f_mf(&model, &m, &v).unwrap().value;
        for a in [0.1, 1.0, 10.0] {
            let alpha = AlphaAssignment::Uniform(a);
            assert_eq!(f_alpha_constrained(&model, &m, &v, &alpha).unwrap().value, mf);
        }
        assert_eq!(lower_bound(&model, &m, &v).unwrap().value, mf);
        let mm = MomentMarginals::new(&model, m.to_vec(), v.to_vec(), vec![]).unwrap();
        assert_eq!(f_alpha(&model, &mm, &AlphaAssignment::Uniform(2.0)).unwrap().value, mf);
    }

    #[test]
    fn zero_covariances_give_mean_field() {
        let model = GmrfModel::from_couplings(vec![1.0, 0.0, 0.5], &[(0, 1, 0.3), (1, 2, -0.4)]).unwrap();
        let (m, v) = (vec![0.2, -0.1, 0.7], vec![0.9, 1.4, 0.6]);
        let mf = f_mf(&model, &m, &v).unwrap().value;
        let mm = MomentMarginals::new(&model, m, v, vec![0.0, 0.0]).unwrap();
        for a in [0.01, 1.0, 50.0] {
            let e = f_alpha(&model, &mm, &AlphaAssignment::Uniform(a)).unwrap().value;
            assert!((e - mf).abs() < 1e-15);
        }
    }

    #[test]
    fn f_alpha_rejects_non_normalizable() {
        let model = two_node();
        assert!(MomentMarginals::new(&model, vec![0.0; 2], vec![1.0; 2], vec![1.0]).is_err());
    }

    #[test]
    fn gradient_vanishes_at_edgeless_minimum() {
        let model = GmrfModel::from_couplings(vec![0.4, -1.0], &[]).unwrap();
        let (m, v) = mf_minimum(&model).unwrap();
        let (gm, gv) = grad_f_alpha_constrained(&model, &m, &v, &AlphaAssignment::Uniform(1.0)).unwrap();
        assert!(gm.iter().chain(&gv).all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn alpha_validation() {
        let model = two_node();
        let bad = AlphaAssignment::Uniform(-1.0);
        assert!(matches!(f_alpha_constrained(&model, &[0.0; 2], &[1.0; 2], &bad), Err(Error::NonpositiveAlpha { .. })));
        let bad = AlphaAssignment::PerEdge(vec![1.0, 2.0]);
        assert!(matches!(bad.validate(&model), Err(Error::DimensionMismatch { .. })));
    }
}
