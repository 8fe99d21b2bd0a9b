//! Estimators that do not use variational inference.

use nalgebra::{DMatrix, DVector};
use nomix::gls::GlsProblem;
use nomix::linalg::truncated_svd;

use crate::{Result, SimError};

pub fn baseline_raw(problem: &GlsProblem) -> DVector<f64> {
    problem.beta_hat().clone()
}

/// `X⁻¹β̂` through a Cholesky solve.
pub fn baseline_mle(problem: &GlsProblem) -> Result<DVector<f64>> {
    let chol = problem.corr().clone().cholesky().ok_or(nomix::Error::SingularMatrix)?;
    let solution = chol.solve(problem.beta_hat());
    if solution.iter().all(|v| v.is_finite()) {
        Ok(solution)
    } else {
        Err(nomix::Error::SingularMatrix.into())
    }
}

/// `scores · loadingsᵀ` is the rank-`k` approximation of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaFit {
    /// `N × K`, left singular vectors scaled by the singular values.
    pub scores: DMatrix<f64>,
    /// `P × K`, orthonormal columns.
    pub loadings: DMatrix<f64>,
}

impl PcaFit {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.scores * self.loadings.transpose()
    }
}

pub fn classical_pca(data: &DMatrix<f64>, k: usize) -> Result<PcaFit> {
    let svd = truncated_svd(data, k)?;
    let mut scores = svd.u;
    for (j, s) in svd.singular_values.iter().enumerate() {
        scores.column_mut(j).scale_mut(*s);
    }
    Ok(PcaFit {
        scores,
        loadings: svd.v,
    })
}

/// PCA restricted to the columns known to carry signal; loadings of every
/// other column are exactly zero.
pub fn oracle_pca(data: &DMatrix<f64>, k: usize, active_dims: &[usize]) -> Result<PcaFit> {
    if let Some(&j) = active_dims.iter().find(|&&j| j >= data.ncols()) {
        return Err(SimError::DimensionMismatch(format!(
            "active column {j} out of range for {} columns",
            data.ncols()
        )));
    }
    let sub = data.select_columns(active_dims);
    let fit = classical_pca(&sub, k)?;
    let mut loadings = DMatrix::zeros(data.ncols(), k);
    for (row, &j) in active_dims.iter().enumerate() {
        loadings.row_mut(j).copy_from(&fit.loadings.row(row));
    }
    Ok(PcaFit {
        scores: fit.scores,
        loadings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn raw_is_identity() {
        let problem = GlsProblem::new(
            DVector::from_vec(vec![0.5, -1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]),
            1.0,
            1.0,
            0.5,
        )
        .unwrap();
        assert_eq!(baseline_raw(&problem), *problem.beta_hat());
    }

    #[test]
    fn mle_inverts_diagonal() {
        let problem = GlsProblem::new(
            DVector::from_vec(vec![1.0, 3.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5])),
            1.0,
            1.0,
            0.5,
        )
        .unwrap();
        assert_relative_eq!(baseline_mle(&problem).unwrap(), DVector::from_vec(vec![0.5, 6.0]));
    }

    #[test]
    fn mle_rejects_singular() {
        let problem = GlsProblem::new(
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_element(2, 2, 1.0),
            1.0,
            1.0,
            0.5,
        )
        .unwrap();
        assert_eq!(
            baseline_mle(&problem).unwrap_err(),
            SimError::Model(nomix::Error::SingularMatrix)
        );
    }

    #[test]
    fn oracle_on_all_columns_is_classical() {
        let data = DMatrix::from_fn(7, 5, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0 + 0.1 * j as f64);
        let all: Vec<usize> = (0..5).collect();
        let a = classical_pca(&data, 2).unwrap();
        let b = oracle_pca(&data, 2, &all).unwrap();
        assert_relative_eq!(a.scores, b.scores, epsilon = 1e-12);
        assert_relative_eq!(a.loadings, b.loadings, epsilon = 1e-12);
    }
}
