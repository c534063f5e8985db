//! Symmetric K-regular models on the circulant `C_n(1, …, K/2)` and their
//! closed-form critical constants.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gmrf::GmrfModel;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KRegularSpec {
    pub n: usize,
    /// Even degree, `k < n`.
    pub k: usize,
    /// Common coupling `R_ij = r`.
    pub r: f64,
}

fn check_shape(n: usize, k: usize) -> Result<()> {
    if k == 0 || !k.is_multiple_of(2) {
        return Err(Error::InvalidSpec("degree must be even and positive"));
    }
    if k >= n {
        return Err(Error::InvalidSpec("degree must be below n"));
    }
    Ok(())
}

/// Edge list of `C_n(1, …, K/2)`.
pub fn circulant_edges(n: usize, k: usize) -> Result<Vec<(usize, usize)>> {
    check_shape(n, k)?;
    let mut edges = Vec::with_capacity(n * k / 2);
    for i in 0..n {
        for d in 1..=k / 2 {
            let j = (i + d) % n;
            edges.push((i.min(j), i.max(j)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

/// Circulant model with `h = 0` and every coupling equal to `r`.
pub fn build_k_regular(spec: &KRegularSpec) -> Result<GmrfModel> {
    if !spec.r.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let couplings: Vec<_> = circulant_edges(spec.n, spec.k)?.into_iter().map(|(i, j)| (i, j, spec.r)).collect();
    let model = GmrfModel::from_couplings(vec![0.0; spec.n], &couplings)?;
    if model.degrees().iter().any(|&d| d != spec.k) {
        return Err(Error::InvalidSpec("circulant is not K-regular for this n"));
    }
    Ok(model)
}

/// `r_c(K, α) = 1/(2√(α(K − α)))`, for `0 < α < K`.
pub fn critical_r(k: usize, alpha: f64) -> Result<f64> {
    let kf = k as f64;
    if !(alpha > 0.0 && alpha < kf) {
        return Err(Error::AlphaOutOfRange { alpha, k: kf });
    }
    Ok(0.5 / math::sqrt(alpha * (kf - alpha)))
}

/// `α_c(K, r) = ½K(1 − √(1 − 1/(Kr)²))`, for `K|r| > 1`.
pub fn critical_alpha(k: usize, r: f64) -> Result<f64> {
    let kf = k as f64;
    let kr = kf * r.abs();
    if !(kr > 1.0) {
        return Err(Error::RegimeMismatch { kr });
    }
    let t = 1.0 / (kr * kr);
    // 1 − √(1 − t) = t / (1 + √(1 − t))
    Ok(0.5 * kf * t / (1.0 + math::sqrt(1.0 - t)))
}

/// Supremum of `r > 0` with `I + rA` positive definite, `A` the adjacency of
/// `C_n(1, …, K/2)`: `1/|min_θ Σ_d 2cos(dθ)|` over `θ = 2πk/n`.
pub fn r_valid(n: usize, k: usize) -> Result<f64> {
    check_shape(n, k)?;
    let min = (0..n)
        .map(|t| {
            let theta = 2.0 * PI * t as f64 / n as f64;
            (1..=k / 2).map(|d| 2.0 * libm::cos(d as f64 * theta)).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(1.0 / min.abs())
}
