//! Dense exact inference, used as the reference for every approximate route.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::model::{check_dense, GmrfModel, DEFAULT_DENSE_GUARD};
use crate::error::{Error, Result};
use crate::marginals::MomentMarginals;

/// Exact means, variances and edge covariances from the dense inverse of `Q`.
pub fn exact_marginals(model: &GmrfModel) -> Result<MomentMarginals> {
    exact_marginals_with_guard(model, DEFAULT_DENSE_GUARD)
}

pub fn exact_marginals_with_guard(model: &GmrfModel, guard: usize) -> Result<MomentMarginals> {
    let n = model.n();
    check_dense(n, guard)?;
    let chol = model.dense_q().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let cov = chol.inverse();
    let m = chol.solve(&DVector::from_column_slice(model.h()));
    let v = (0..n).map(|i| cov[(i, i)]).collect();
    let v_edge = model.edges().iter().map(|e| cov[(e.i, e.j)]).collect();
    MomentMarginals::new(model, m.iter().copied().collect(), v, v_edge)
}

/// `Q⁻¹` as a dense matrix.
pub fn exact_covariance(model: &GmrfModel, guard: usize) -> Result<DMatrix<f64>> {
    check_dense(model.n(), guard)?;
    let chol = model.dense_q().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.inverse())
}

/// Solves `Q m = h`.
pub fn exact_means(model: &GmrfModel, guard: usize) -> Result<Vec<f64>> {
    check_dense(model.n(), guard)?;
    let chol = model.dense_q().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(&DVector::from_column_slice(model.h())).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmrf::rescale_to_unit_diagonal;
    use crate::gmrf::SparseMatrix;
    use alloc::vec;

    #[test]
    fn two_node_inverse() {
        let model = GmrfModel::from_couplings(vec![1.0, 0.0], &[(0, 1, 0.5)]).unwrap();
        let mm = exact_marginals(&model).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-14;
        assert!(close(mm.m()[0], 4.0 / 3.0) && close(mm.m()[1], -2.0 / 3.0));
        assert!(close(mm.v()[0], 4.0 / 3.0) && close(mm.v()[1], 4.0 / 3.0));
        assert!(close(mm.v_edge()[0], -2.0 / 3.0));
    }

    #[test]
    fn edgeless_model_is_its_own_marginal() {
        let model = GmrfModel::from_couplings(vec![0.5, -2.0, 3.0], &[]).unwrap();
        let mm = exact_marginals(&model).unwrap();
        assert_eq!(mm.m(), model.h());
        assert_eq!(mm.v(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn residual_on_chain() {
        let couplings: Vec<_> = (0..9).map(|i| (i, i + 1, 0.3 - 0.05 * i as f64)).collect();
        let h: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let model = GmrfModel::from_couplings(h.clone(), &couplings).unwrap();
        let mm = exact_marginals(&model).unwrap();
        let qm = model.q_mul(mm.m());
        for (a, b) in qm.iter().zip(&h) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rescaled_marginals_map_back() {
        let q = SparseMatrix::from_row_major(3, &[4.0, 1.0, 0.0, 1.0, 2.0, -0.5, 0.0, -0.5, 9.0]).unwrap();
        let h = [1.0, -2.0, 0.5];
        let (model, scale) = rescale_to_unit_diagonal(&h, &q).unwrap();
        let back = exact_marginals(&model).unwrap().unscale(&model, &scale);
        let cov = q.to_dense().try_inverse().unwrap();
        let mean = &cov * DVector::from_column_slice(&h);
        for i in 0..3 {
            assert!((back.m()[i] - mean[i]).abs() < 1e-12);
            assert!((back.v()[i] - cov[(i, i)]).abs() < 1e-12);
        }
        for (e, c) in model.edges().iter().zip(back.v_edge()) {
            assert!((c - cov[(e.i, e.j)]).abs() < 1e-12);
        }
    }
}
