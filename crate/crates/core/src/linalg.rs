//! Dense linear algebra used by the oracle and the spectral diagnostics.

use nalgebra::{DMatrix, DVector, Schur};

use crate::math;

/// Returns true if `a` admits a Cholesky factorization.
pub fn is_positive_definite(a: &DMatrix<f64>) -> bool {
    a.clone().cholesky().is_some()
}

/// Largest modulus among the (complex) eigenvalues of a square matrix.
///
/// Uses a real Schur form with a bounded number of sweeps; if that does not
/// converge, falls back to Gelfand's formula `ρ = lim ‖A^(2^k)‖^(1/2^k)` by
/// repeated squaring in log scale.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    if let Some(schur) = Schur::try_new(a.clone(), f64::EPSILON, 200 * n) {
        return schur.complex_eigenvalues().iter().map(|z| math::hypot(z.re, z.im)).fold(0.0, f64::max);
    }
    gelfand_radius(a)
}

fn gelfand_radius(a: &DMatrix<f64>) -> f64 {
    let mut p = a.clone();
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..48 {
        let norm = p.amax();
        if norm == 0.0 {
            return 0.0;
        }
        p /= norm;
        log_scale += libm::log(norm) / power;
        p = &p * &p;
        power *= 2.0;
    }
    libm::exp(log_scale + libm::log(p.amax().max(f64::MIN_POSITIVE)) / power)
}

/// Eigenvalues as `(re, im)`, sorted by real then imaginary part; `None`
/// if the Schur iteration does not converge.
pub fn eigenvalues(a: &DMatrix<f64>) -> Option<alloc::vec::Vec<(f64, f64)>> {
    let n = a.nrows();
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 200 * n.max(1))?;
    let mut ev: alloc::vec::Vec<(f64, f64)> = schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    ev.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    Some(ev)
}

pub fn determinant(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    a.clone().lu().determinant()
}

pub fn smallest_singular_value(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let Some(svd) = a.clone().try_svd(false, false, f64::EPSILON, 200 * a.nrows()) else {
        return f64::NAN;
    };
    svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    a.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &DMatrix<f64>, b: &[f64]) -> Option<DVector<f64>> {
    let chol = a.clone().cholesky()?;
    Some(chol.solve(&DVector::from_column_slice(b)))
}
