use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::RankedCauses;
use crate::data::Dataset;
use crate::linalg::mean_and_covariance;
use crate::{Error, Result};

/// Exhaustive search enumerates d! orderings; beyond this use greedy.
pub const EXHAUSTIVE_LIMIT: usize = 10;
const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Search {
    #[default]
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CholeskyParams {
    pub search: Search,
    pub seed: u64,
}

/// Cholesky factor of a permuted covariance, grown one node at a time.
struct Incremental<'a> {
    cov: &'a DMatrix<f64>,
    dev: &'a [f64],
    order: Vec<usize>,
    rows: Vec<Vec<f64>>,
    z: Vec<f64>,
}

impl<'a> Incremental<'a> {
    fn new(cov: &'a DMatrix<f64>, dev: &'a [f64]) -> Self {
        Self {
            cov,
            dev,
            order: vec![],
            rows: vec![],
            z: vec![],
        }
    }

    /// Appends `v` and returns its whitened coordinate.
    fn push(&mut self, v: usize) -> f64 {
        let k = self.order.len();
        let mut l = vec![0.0; k + 1];
        for i in 0..k {
            let s: f64 = (0..i).map(|j| self.rows[i][j] * l[j]).sum();
            l[i] = (self.cov[(self.order[i], v)] - s) / self.rows[i][i];
        }
        let diag2 = self.cov[(v, v)] - l[..k].iter().map(|x| x * x).sum::<f64>();
        l[k] = diag2.max(f64::MIN_POSITIVE).sqrt();
        let zk = (self.dev[v] - (0..k).map(|j| l[j] * self.z[j]).sum::<f64>()) / l[k];
        self.order.push(v);
        self.rows.push(l);
        self.z.push(zk);
        zk
    }

    fn pop(&mut self) {
        self.order.pop();
        self.rows.pop();
        self.z.pop();
    }
}

/// `z = L⁻¹ (x - µ)` for the lower Cholesky factor of Σ permuted by `order`;
/// returned indexed by node.
pub fn whiten(mean: &[f64], cov: &DMatrix<f64>, order: &[usize], x: &[f64]) -> Result<Vec<f64>> {
    let d = mean.len();
    let mut seen = vec![false; d];
    if order.len() != d
        || order
            .iter()
            .any(|&i| i >= d || std::mem::replace(&mut seen[i], true))
    {
        return Err(Error::Input(
            "ordering must be a permutation of the nodes".into(),
        ));
    }
    let p = DMatrix::from_fn(d, d, |i, j| cov[(order[i], order[j])]);
    let chol = p
        .cholesky()
        .ok_or_else(|| Error::Numeric("covariance is not positive definite".into()))?;
    let dev = nalgebra::DVector::from_fn(d, |i, _| x[order[i]] - mean[order[i]]);
    let zp = chol
        .l()
        .solve_lower_triangular(&dev)
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let mut z = vec![0.0; d];
    for (pos, &node) in order.iter().enumerate() {
        z[node] = zp[pos];
    }
    Ok(z)
}

fn exhaustive(
    inc: &mut Incremental,
    remaining: &mut Vec<usize>,
    best: &mut [f64],
    count: &mut u64,
) {
    if remaining.is_empty() {
        *count += 1;
        return;
    }
    for idx in 0..remaining.len() {
        let v = remaining.remove(idx);
        let z = inc.push(v).abs();
        if z > best[v] {
            best[v] = z;
        }
        exhaustive(inc, remaining, best, count);
        inc.pop();
        remaining.insert(idx, v);
    }
}

fn greedy(inc: &mut Incremental, d: usize, best: &mut [f64]) -> u64 {
    for start in 0..d {
        let mut remaining: Vec<usize> = (0..d).filter(|&v| v != start).collect();
        let z = inc.push(start).abs();
        best[start] = best[start].max(z);
        while !remaining.is_empty() {
            let mut pick = (0, f64::INFINITY);
            for (idx, &v) in remaining.iter().enumerate() {
                let z = inc.push(v).abs();
                inc.pop();
                if z < pick.1 {
                    pick = (idx, z);
                }
            }
            let v = remaining.remove(pick.0);
            inc.push(v);
            best[v] = best[v].max(pick.1);
        }
        for _ in 0..d {
            inc.pop();
        }
    }
    d as u64
}

/// Graph-free root cause ranking by ordering-searched Cholesky whitening.
pub fn rca_cholesky(
    normal: &Dataset,
    sample: &[f64],
    params: &CholeskyParams,
) -> Result<RankedCauses> {
    let x = normal.continuous_matrix()?;
    let d = x.ncols();
    if sample.len() != d || sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input(format!("sample must have {d} finite values")));
    }
    if x.nrows() < 2 {
        return Err(Error::SampleSize {
            n: x.nrows(),
            required: 2,
        });
    }
    if params.search == Search::Exhaustive && d > EXHAUSTIVE_LIMIT {
        return Err(Error::CapExceeded {
            what: "exhaustive Cholesky search".into(),
            detail: format!("d = {d} > {EXHAUSTIVE_LIMIT}; use greedy search"),
        });
    }
    let (mean, mut cov) = mean_and_covariance(&x);
    let mut flags = vec![];
    if cov.clone().cholesky().is_none() {
        let ridge = RIDGE * cov.diagonal().mean();
        for i in 0..d {
            cov[(i, i)] += ridge;
        }
        flags.push(format!("covariance ridge-regularized by {ridge:e}"));
        if cov.clone().cholesky().is_none() {
            return Err(Error::Numeric(
                "covariance is not positive definite after ridge".into(),
            ));
        }
    }
    let dev: Vec<f64> = (0..d).map(|j| sample[j] - mean[j]).collect();
    let mut inc = Incremental::new(&cov, &dev);
    let mut best = vec![0.0; d];
    let orderings = match params.search {
        Search::Exhaustive => {
            let mut count = 0;
            exhaustive(&mut inc, &mut (0..d).collect(), &mut best, &mut count);
            count
        }
        Search::Greedy => greedy(&mut inc, d, &mut best),
    };
    let p = json!({
        "search": params.search,
        "seed": params.seed,
        "orderings": orderings,
        "score": "max |z| over searched orderings",
    });
    Ok(RankedCauses::new(
        "cholesky",
        p,
        normal.names().into_iter().zip(best),
        flags,
    ))
}
