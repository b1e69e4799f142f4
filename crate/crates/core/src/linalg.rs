//! Least squares and covariance helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Result of an ordinary least-squares fit.
pub(crate) struct OlsFit {
    pub coef: DVector<f64>,
    pub rss: f64,
    /// (XᵀX)⁻¹, used for coefficient standard errors.
    pub xtx_inv: DMatrix<f64>,
}

/// Relative eigenvalue floor below which a design is treated as rank deficient.
const COLLINEAR_TOL: f64 = 1e-10;

/// Fits `y ~ X` by the normal equations. On rank deficiency returns the indices
/// of the design columns involved in the near-null direction.
pub(crate) fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit, Vec<usize>> {
    let p = x.ncols();
    let xtx = x.transpose() * x;
    let scale: Vec<f64> = (0..p).map(|i| xtx[(i, i)].sqrt()).collect();
    if let Some(i) = scale.iter().position(|s| *s == 0.0 || !s.is_finite()) {
        return Err(vec![i]);
    }
    let scaled = DMatrix::from_fn(p, p, |i, j| xtx[(i, j)] / (scale[i] * scale[j]));
    let eig = scaled.clone().symmetric_eigen();
    let (imin, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty design");
    if lmin < COLLINEAR_TOL * p as f64 {
        let v = eig.eigenvectors.column(imin);
        let culprits = (0..p).filter(|&i| v[i].abs() > 0.1).collect();
        return Err(culprits);
    }
    let chol = match scaled.cholesky() {
        Some(c) => c,
        None => return Err((0..p).collect()),
    };
    let inv_scaled = chol.inverse();
    let xtx_inv = DMatrix::from_fn(p, p, |i, j| inv_scaled[(i, j)] / (scale[i] * scale[j]));
    let coef = &xtx_inv * (x.transpose() * y);
    let resid = y - x * &coef;
    Ok(OlsFit {
        coef,
        rss: resid.norm_squared(),
        xtx_inv,
    })
}

/// Column means and the population covariance matrix of a row-major sample.
pub(crate) fn mean_and_covariance(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows() as f64;
    let mean = DVector::from_fn(x.ncols(), |j, _| x.column(j).sum() / n);
    let mut centered = x.clone();
    for j in 0..x.ncols() {
        let m = mean[j];
        centered.column_mut(j).iter_mut().for_each(|v| *v -= m);
    }
    let cov = centered.transpose() * &centered / n;
    (mean, cov)
}

/// Correlation matrix from a covariance matrix.
pub(crate) fn correlation_from_covariance(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    let sd: Vec<f64> = (0..d).map(|i| cov[(i, i)].sqrt()).collect();
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (sd[i] * sd[j])
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_exact_line() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coef[0] - 1.0).abs() < 1e-12);
        assert!((fit.coef[1] - 2.0).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn ols_flags_duplicate_columns() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 2.0, 1.0, 5.0, 5.0, 1.0, 7.0, 7.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let culprits = ols(&x, &y).err().unwrap();
        assert!(culprits.contains(&1) && culprits.contains(&2));
    }
}
