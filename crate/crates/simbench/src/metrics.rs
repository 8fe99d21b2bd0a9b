use nalgebra::{DMatrix, DVector};

use crate::{Result, SimError};

fn check_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(SimError::DimensionMismatch(format!("lengths {a} and {b} differ")))
    }
}

pub fn metric_mse(est: &DVector<f64>, truth: &DVector<f64>) -> Result<f64> {
    check_len(est.len(), truth.len())?;
    Ok((est - truth).norm_squared() / est.len() as f64)
}

/// Pearson correlation.
pub fn metric_corr(est: &DVector<f64>, truth: &DVector<f64>) -> Result<f64> {
    check_len(est.len(), truth.len())?;
    let (me, mt) = (est.mean(), truth.mean());
    let de = est.add_scalar(-me);
    let dt = truth.add_scalar(-mt);
    let (vee, vtt) = (de.norm_squared(), dt.norm_squared());
    if vee == 0.0 || vtt == 0.0 {
        return Err(SimError::CorrelationUndefined);
    }
    Ok((de.dot(&dt) / (vee * vtt).sqrt()).clamp(-1.0, 1.0))
}

/// Squared Frobenius distance.
pub fn metric_reconstruction(reconstruction: &DMatrix<f64>, signal: &DMatrix<f64>) -> Result<f64> {
    if reconstruction.shape() != signal.shape() {
        return Err(SimError::DimensionMismatch(format!(
            "shapes {:?} and {:?} differ",
            reconstruction.shape(),
            signal.shape()
        )));
    }
    Ok((reconstruction - signal).norm_squared())
}

/// Fraction of entries with absolute value below `threshold`.
pub fn fraction_below(m: &DMatrix<f64>, threshold: f64) -> f64 {
    m.iter().filter(|v| v.abs() < threshold).count() as f64 / m.len() as f64
}

/// Absolute correlation of matching score columns; sign flips between
/// methods do not matter.
pub fn score_alignment(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(SimError::DimensionMismatch(format!(
            "shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    (0..a.ncols())
        .map(|k| metric_corr(&a.column(k).into_owned(), &b.column(k).into_owned()).map(f64::abs))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_reversed() {
        let t = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        assert_eq!(metric_mse(&t, &t).unwrap(), 0.0);
        assert!((metric_corr(&t, &t).unwrap() - 1.0).abs() < 1e-15);
        assert!((metric_corr(&-&t, &t).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_input_has_no_correlation() {
        let t = DVector::from_vec(vec![1.0, 2.0]);
        let c = DVector::from_vec(vec![0.0, 0.0]);
        assert_eq!(metric_corr(&c, &t).unwrap_err(), SimError::CorrelationUndefined);
    }

    #[test]
    fn reconstruction_by_hand() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 7.0]);
        // 1 + 0 + 4 + 9
        assert_eq!(metric_reconstruction(&r, &s).unwrap(), 14.0);
        assert_eq!(metric_reconstruction(&r, &DMatrix::zeros(2, 2)).unwrap(), 30.0);
        assert!(metric_reconstruction(&r, &DMatrix::zeros(2, 3)).is_err());
    }
}
