//! Seeded random model generation at a prescribed `λ_max(|R|)`.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{GmrfModel, DEFAULT_DENSE_GUARD};
use super::spectral::spectral_analysis;
use crate::error::{Error, Result};

/// Sign or weight resamplings before giving up on positive definiteness.
pub const MAX_RESAMPLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Structure {
    /// Random spanning tree plus each remaining pair with probability `density`.
    Random {
        density: f64,
    },
    Ring,
    Path,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    Positive,
    Negative,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearTerm {
    Zero,
    /// Entries uniform in `[-1, 1]`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub n: usize,
    pub structure: Structure,
    pub target_lambda_max: f64,
    pub sign_mode: SignMode,
    pub linear_term: LinearTerm,
    pub seed: u64,
}

impl ModelSpec {
    pub fn random(n: usize, density: f64, target_lambda_max: f64, seed: u64) -> Self {
        Self {
            n,
            structure: Structure::Random { density },
            target_lambda_max,
            sign_mode: SignMode::Mixed,
            linear_term: LinearTerm::Uniform,
            seed,
        }
    }
}

fn pattern(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    let n = spec.n;
    let mut edges = Vec::new();
    match spec.structure {
        Structure::Random { density } => {
            if !(0.0..=1.0).contains(&density) {
                return Err(Error::InvalidSpec("density must lie in [0, 1]"));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            for k in 1..n {
                let parent = order[rng.random_range(0..k)];
                let child = order[k];
                edges.push((parent.min(child), parent.max(child)));
            }
            edges.sort_unstable();
            let tree_len = edges.len();
            for i in 0..n {
                for j in i + 1..n {
                    if edges[..tree_len].binary_search(&(i, j)).is_err() && rng.random::<f64>() < density {
                        edges.push((i, j));
                    }
                }
            }
            edges.sort_unstable();
        }
        Structure::Path => edges.extend((1..n).map(|i| (i - 1, i))),
        Structure::Ring => {
            edges.extend((1..n).map(|i| (i - 1, i)));
            if n > 2 {
                edges.push((0, n - 1));
            }
        }
        Structure::Complete => {
            for i in 0..n {
                for j in i + 1..n {
                    edges.push((i, j));
                }
            }
        }
    }
    Ok(edges)
}

fn sign(mode: SignMode, rng: &mut ChaCha8Rng) -> f64 {
    match mode {
        SignMode::Positive => 1.0,
        SignMode::Negative => -1.0,
        SignMode::Mixed => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// Draws a connected model with `λ_max(|R|) = target` and `Q = I + R`
/// positive definite. When a draw is not positive definite the signs are
/// resampled (mixed mode) or the magnitudes are (fixed-sign modes), up to
/// [`MAX_RESAMPLES`] times.
pub fn generate_model(spec: &ModelSpec) -> Result<GmrfModel> {
    if spec.n < 2 {
        return Err(Error::InvalidSpec("need at least two nodes"));
    }
    if !(spec.target_lambda_max > 0.0) || !spec.target_lambda_max.is_finite() {
        return Err(Error::InvalidSpec("target lambda_max must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let edges = pattern(spec, &mut rng)?;
    let h: Vec<f64> = match spec.linear_term {
        LinearTerm::Zero => alloc::vec![0.0; spec.n],
        LinearTerm::Uniform => (0..spec.n).map(|_| rng.random_range(-1.0..=1.0)).collect(),
    };
    let mut magnitudes: Vec<f64> = edges.iter().map(|_| rng.random_range(0.2..=1.0)).collect();
    let mut signs: Vec<f64> = edges.iter().map(|_| sign(spec.sign_mode, &mut rng)).collect();

    for attempt in 0..=MAX_RESAMPLES {
        if attempt > 0 {
            if spec.sign_mode == SignMode::Mixed {
                signs = edges.iter().map(|_| sign(spec.sign_mode, &mut rng)).collect();
            } else {
                magnitudes = edges.iter().map(|_| rng.random_range(0.2..=1.0)).collect();
            }
        }
        let couplings: Vec<_> =
            edges.iter().zip(magnitudes.iter().zip(&signs)).map(|(&(i, j), (m, s))| (i, j, m * s)).collect();
        let unscaled = GmrfModel::assemble(h.clone(), &couplings)?;
        let lambda = spectral_analysis(&unscaled)?.lambda_max;
        let factor = spec.target_lambda_max / lambda;
        let scaled: Vec<_> = couplings.iter().map(|&(i, j, r)| (i, j, r * factor)).collect();
        let model = GmrfModel::assemble(h.clone(), &scaled)?;
        match model.check_positive_definite(DEFAULT_DENSE_GUARD) {
            Ok(()) => return Ok(model),
            Err(Error::NotPositiveDefinite) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::CannotSatisfy { attempts: MAX_RESAMPLES })
}
