//! Dense linear-algebra helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-6;

/// Leading `k` singular triplets of a matrix, `A ≈ U diag(σ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl TruncatedSvd {
    /// `U diag(σ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

/// Rank-`k` SVD through the eigendecomposition of the smaller Gram matrix.
///
/// Each left singular vector is oriented so that its largest-magnitude
/// entry is positive, and the matching right vector is flipped with it.
pub fn truncated_svd(a: &DMatrix<f64>, k: usize) -> Result<TruncatedSvd> {
    let (n, p) = a.shape();
    if k == 0 || k > n.min(p) {
        return Err(Error::InvalidParameter(format!(
            "rank {k} is not in 1..={} for a {n}x{p} matrix",
            n.min(p)
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let wide = n <= p;
    let gram = if wide { a * a.transpose() } else { a.transpose() * a };
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let top = eig.eigenvalues[order[0]].max(0.0).sqrt();
    let sigma: Vec<f64> = order[..k].iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    if top == 0.0 || sigma[k - 1] <= RANK_TOL * top {
        return Err(Error::RankDeficient { k });
    }
    let basis = DMatrix::from_fn(eig.eigenvectors.nrows(), k, |r, c| eig.eigenvectors[(r, order[c])]);
    // the other side: A v / σ or Aᵀ u / σ
    let mut other = if wide { a.transpose() * &basis } else { a * &basis };
    for (j, s) in sigma.iter().enumerate() {
        other.column_mut(j).unscale_mut(*s);
    }
    let (mut u, mut v) = if wide { (basis, other) } else { (other, basis) };
    for j in 0..k {
        let col = u.column(j);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    Ok(TruncatedSvd {
        u,
        singular_values: DVector::from_vec(sigma),
        v,
    })
}

pub fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(Error::InvalidParameter(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// Inverse of a small symmetric positive definite matrix.
pub fn spd_inverse(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.cholesky().map(|c| c.inverse()).ok_or(Error::SingularMatrix)
}

/// `log det` of a small symmetric positive definite matrix.
pub fn spd_log_det(m: &DMatrix<f64>) -> Result<f64> {
    let c = m.clone().cholesky().ok_or(Error::SingularMatrix)?;
    Ok(2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_matrix_is_rank_deficient() {
        let z = DMatrix::<f64>::zeros(5, 4);
        assert_eq!(truncated_svd(&z, 1).unwrap_err(), Error::RankDeficient { k: 1 });
    }

    #[test]
    fn rank_one_matrix_rejects_rank_two() {
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let v = DVector::from_vec(vec![1.0, -1.0, 0.5, 2.0]);
        let a = &u * v.transpose();
        assert!(truncated_svd(&a, 1).is_ok());
        assert_eq!(truncated_svd(&a, 2).unwrap_err(), Error::RankDeficient { k: 2 });
    }

    #[test]
    fn matches_full_svd_on_both_orientations() {
        let a = DMatrix::from_fn(6, 9, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + 0.1 * (i as f64));
        for m in [a.clone(), a.transpose()] {
            let t = truncated_svd(&m, 3).unwrap();
            let mut full: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
            full.sort_by(|x, y| y.total_cmp(x));
            for (s, f) in t.singular_values.iter().zip(&full) {
                assert_relative_eq!(*s, *f, max_relative = 1e-9);
            }
            let utu = t.u.transpose() * &t.u;
            let vtv = t.v.transpose() * &t.v;
            assert_relative_eq!(utu, DMatrix::identity(3, 3), epsilon = 1e-9);
            assert_relative_eq!(vtv, DMatrix::identity(3, 3), epsilon = 1e-9);
        }
    }

    #[test]
    fn sign_convention() {
        let a = DMatrix::from_fn(5, 5, |i, j| if i == j { -(i as f64 + 1.0) } else { 0.0 });
        let t = truncated_svd(&a, 2).unwrap();
        for j in 0..2 {
            let col = t.u.column(j);
            let big = col
                .iter()
                .copied()
                .fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            assert!(big > 0.0);
        }
        assert_relative_eq!(t.singular_values[0], 5.0, max_relative = 1e-12);
    }

    #[test]
    fn spd_helpers() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let inv = spd_inverse(m.clone()).unwrap();
        assert_relative_eq!(&m * inv, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert_relative_eq!(spd_log_det(&m).unwrap(), 1.75f64.ln(), max_relative = 1e-12);
    }
}
