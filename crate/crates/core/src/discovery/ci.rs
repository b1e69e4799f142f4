use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data_matrix;
use crate::data::Dataset;
use crate::linalg::{correlation_from_covariance, mean_and_covariance};
use crate::stats::std_normal_cdf;
use crate::{Error, Result};

const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub statistic: f64,
    pub p_value: f64,
    pub independent: bool,
}

/// Fisher-z partial-correlation test over a precomputed correlation matrix.
#[derive(Debug, Clone)]
pub struct FisherZ {
    n: usize,
    corr: DMatrix<f64>,
    names: Vec<String>,
}

impl FisherZ {
    pub fn new(ds: &Dataset) -> Result<Self> {
        let x = data_matrix(ds, 1)?;
        let (_, cov) = mean_and_covariance(&x);
        Ok(Self {
            n: x.nrows(),
            corr: correlation_from_covariance(&cov),
            names: ds.names(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Partial correlation of `(i, j)` given `s`, read off the inverse of the
    /// correlation submatrix through its Schur complement on `s`.
    pub fn partial_correlation(&self, i: usize, j: usize, s: &[usize]) -> Result<f64> {
        let singular = || {
            let set: Vec<&str> = s.iter().map(|&k| self.names[k].as_str()).collect();
            Error::Numeric(format!(
                "singular correlation submatrix over {{{}}}",
                set.join(", ")
            ))
        };
        let (rij, rii, rjj) = if s.is_empty() {
            (self.corr[(i, j)], 1.0, 1.0)
        } else {
            let sub = DMatrix::from_fn(s.len(), s.len(), |a, b| self.corr[(s[a], s[b])]);
            if sub.iter().any(|v| !v.is_finite())
                || sub.symmetric_eigenvalues().min() < SINGULAR_TOL
            {
                return Err(singular());
            }
            let inv = sub.try_inverse().ok_or_else(singular)?;
            let ci = DVector::from_fn(s.len(), |a, _| self.corr[(i, s[a])]);
            let cj = DVector::from_fn(s.len(), |a, _| self.corr[(j, s[a])]);
            (
                self.corr[(i, j)] - ci.dot(&(&inv * &cj)),
                1.0 - ci.dot(&(&inv * &ci)),
                1.0 - cj.dot(&(&inv * &cj)),
            )
        };
        let r = rij / (rii * rjj).sqrt();
        if !r.is_finite() {
            return Err(singular());
        }
        Ok(r.clamp(-1.0, 1.0))
    }

    pub fn test(&self, i: usize, j: usize, s: &[usize], alpha: f64) -> Result<CiResult> {
        let required = s.len() + 4;
        if self.n < required {
            return Err(Error::SampleSize {
                n: self.n,
                required,
            });
        }
        let r = self.partial_correlation(i, j, s)?;
        let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln();
        let statistic = ((self.n - s.len() - 3) as f64).sqrt() * z.abs();
        let p_value = if statistic.is_finite() {
            (2.0 * (1.0 - std_normal_cdf(statistic))).clamp(0.0, 1.0)
        } else {
            0.0
        };
        Ok(CiResult {
            statistic,
            p_value,
            independent: p_value > alpha,
        })
    }
}

pub fn fisher_z_test(
    ds: &Dataset,
    i: usize,
    j: usize,
    s: &[usize],
    alpha: f64,
) -> Result<CiResult> {
    FisherZ::new(ds)?.test(i, j, s, alpha)
}
