use nalgebra::DMatrix;

use super::lbfgs::{self, Options};
use super::{data_matrix, DiscoveryParams, WeightedDag};
use crate::data::Dataset;
use crate::linalg::mean_and_covariance;
use crate::{Error, Result};

const H_TOL: f64 = 1e-8;
const H_FAIL: f64 = 1e-6;
const RHO_MAX: f64 = 1e16;
const MAX_OUTER: usize = 100;

/// `h(W) = tr(exp(W∘W)) - d` and its gradient `exp(W∘W)ᵀ ∘ 2W`.
pub fn acyclicity(w: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let e = w.component_mul(w).exp();
    let h = e.trace() - w.nrows() as f64;
    let grad = e.transpose().component_mul(w) * 2.0;
    (h, grad)
}

/// Augmented-Lagrangian objective over `[W⁺, W⁻]` (row-major blocks), with
/// `W = W⁺ - W⁻` so the L1 term is linear.
#[derive(Debug, Clone)]
pub struct NotearsObjective {
    d: usize,
    /// `XᵀX / n` of the centered data.
    gram: DMatrix<f64>,
    lambda1: f64,
}

impl NotearsObjective {
    pub fn new(ds: &Dataset, lambda1: f64) -> Result<Self> {
        let x = data_matrix(ds, 2)?;
        let (_, gram) = mean_and_covariance(&x);
        Ok(Self {
            d: x.ncols(),
            gram,
            lambda1,
        })
    }

    pub fn n_params(&self) -> usize {
        2 * self.d * self.d
    }

    pub fn weights(&self, p: &[f64]) -> DMatrix<f64> {
        let dd = self.d * self.d;
        DMatrix::from_fn(self.d, self.d, |i, j| {
            p[i * self.d + j] - p[dd + i * self.d + j]
        })
    }

    /// `(1/2n)‖X - XW‖²` and its gradient.
    pub fn loss(&self, w: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let r = DMatrix::identity(self.d, self.d) - w;
        let cr = &self.gram * &r;
        let loss = 0.5 * r.component_mul(&cr).sum();
        (loss, -cr)
    }

    /// `F(W) + (ρ/2)h² + αh` and its gradient with respect to the parameters.
    pub fn value_grad(&self, p: &[f64], rho: f64, alpha: f64) -> (f64, Vec<f64>) {
        let w = self.weights(p);
        let (loss, gl) = self.loss(&w);
        let (h, gh) = acyclicity(&w);
        let l1: f64 = p.iter().sum::<f64>() * self.lambda1;
        let value = loss + 0.5 * rho * h * h + alpha * h + l1;
        let g = gl + gh * (rho * h + alpha);
        let dd = self.d * self.d;
        let mut grad = vec![0.0; 2 * dd];
        for i in 0..self.d {
            for j in 0..self.d {
                let k = i * self.d + j;
                grad[k] = g[(i, j)] + self.lambda1;
                grad[dd + k] = -g[(i, j)] + self.lambda1;
            }
        }
        (value, grad)
    }
}

/// Drops the weakest remaining edges until the support is acyclic.
fn break_cycles(w: &mut DMatrix<f64>) {
    loop {
        let (h, _) = acyclicity(&w.map(|v| if v != 0.0 { 1.0 } else { 0.0 }));
        if h.abs() < 1e-9 {
            return;
        }
        let (mut bi, mut bj, mut bv) = (0, 0, f64::INFINITY);
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                let v = w[(i, j)].abs();
                if v != 0.0 && v < bv {
                    (bi, bj, bv) = (i, j, v);
                }
            }
        }
        w[(bi, bj)] = 0.0;
    }
}

/// Linear NOTEARS: least squares with L1 under the trace-exponential
/// acyclicity constraint, solved by augmented Lagrangian.
pub fn notears_linear(ds: &Dataset, params: &DiscoveryParams) -> Result<WeightedDag> {
    params.validate()?;
    let obj = NotearsObjective::new(ds, params.lambda1)?;
    let d = obj.d;
    let np = obj.n_params();
    let lo = vec![0.0; np];
    let hi: Vec<f64> = (0..np)
        .map(|k| {
            let k = k % (d * d);
            if k / d == k % d {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let opts = Options::default();

    let mut p = vec![0.0; np];
    let (mut rho, mut alpha, mut h) = (1.0, 0.0, f64::INFINITY);
    for _ in 0..MAX_OUTER {
        let mut next = p.clone();
        let mut h_next = h;
        while rho < RHO_MAX {
            next = lbfgs::minimize(|x| obj.value_grad(x, rho, alpha), &p, &lo, &hi, &opts);
            h_next = acyclicity(&obj.weights(&next)).0;
            if h_next > 0.25 * h {
                rho *= 10.0;
            } else {
                break;
            }
        }
        p = next;
        h = h_next;
        alpha += rho * h;
        if h <= H_TOL || rho >= RHO_MAX {
            break;
        }
    }
    if h > H_FAIL {
        return Err(Error::Convergence { h });
    }
    let mut w = obj.weights(&p);
    for i in 0..d {
        for j in 0..d {
            if i == j || w[(i, j)].abs() < params.w_threshold {
                w[(i, j)] = 0.0;
            }
        }
    }
    break_cycles(&mut w);
    WeightedDag::from_matrix(&ds.names(), w, h, h <= H_TOL)
}
