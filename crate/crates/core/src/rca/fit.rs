use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::graph::Dag;
use crate::linalg::ols;
use crate::{Error, Result};

/// Per-node OLS structural equations `x_j = b_j + sum_i w_ij x_i + e_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearScmFit {
    pub dag: Dag,
    pub intercepts: Vec<f64>,
    /// `(parent, weight)` per node, parents ascending.
    pub weights: Vec<Vec<(usize, f64)>>,
    /// Residual standard deviation per node.
    pub sigma: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NodeEquation {
    node: String,
    intercept: f64,
    parents: Vec<(String, f64)>,
    sigma: f64,
}

pub fn fit_linear_scm(g: &Dag, normal: &Dataset) -> Result<LinearScmFit> {
    let cols: Vec<usize> = g
        .nodes()
        .iter()
        .map(|n| normal.require_column(n))
        .collect::<Result<_>>()?;
    let x = normal.select_columns(&cols).continuous_matrix()?;
    let n = x.nrows();
    let max_in = (0..g.n_nodes())
        .map(|j| g.parents(j).len())
        .max()
        .unwrap_or(0);
    if n <= max_in + 2 {
        return Err(Error::SampleSize {
            n,
            required: max_in + 3,
        });
    }
    let (mut intercepts, mut weights, mut sigma) = (vec![], vec![], vec![]);
    for j in 0..g.n_nodes() {
        let pa = g.parents(j);
        let design = DMatrix::from_fn(n, pa.len() + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                x[(r, pa[c - 1])]
            }
        });
        let y = DVector::from_iterator(n, x.column(j).iter().copied());
        let fit = ols(&design, &y).map_err(|bad| {
            let names: Vec<&str> = bad
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| g.nodes()[pa[c - 1]].as_str())
                .collect();
            Error::Numeric(format!(
                "collinear parents of '{}': {}",
                g.nodes()[j],
                names.join(", ")
            ))
        })?;
        let s = (fit.rss / n as f64).sqrt();
        if !(s > 0.0) {
            return Err(Error::Numeric(format!(
                "'{}' has zero residual variance",
                g.nodes()[j]
            )));
        }
        intercepts.push(fit.coef[0]);
        weights.push(
            pa.iter()
                .enumerate()
                .map(|(k, &p)| (p, fit.coef[k + 1]))
                .collect(),
        );
        sigma.push(s);
    }
    Ok(LinearScmFit {
        dag: g.clone(),
        intercepts,
        weights,
        sigma,
    })
}

impl LinearScmFit {
    pub fn nodes(&self) -> &[String] {
        self.dag.nodes()
    }

    pub fn n_nodes(&self) -> usize {
        self.dag.n_nodes()
    }

    /// Reorders a dataset row into this fit's node order.
    pub fn align_row(&self, ds: &Dataset, row: usize) -> Result<Vec<f64>> {
        self.nodes()
            .iter()
            .map(|n| {
                let c = ds.require_column(n)?;
                ds.get(row, c)
                    .ok_or_else(|| Error::Input(format!("row {row} is missing '{n}'")))
            })
            .collect()
    }

    /// Recovered noise terms of a sample in node order.
    pub fn noises(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_nodes())
            .map(|j| {
                x[j] - self.intercepts[j]
                    - self.weights[j].iter().map(|&(p, w)| w * x[p]).sum::<f64>()
            })
            .collect()
    }

    /// Model means `E[x]` with all noises at zero.
    pub fn means(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.n_nodes()];
        for &j in self.dag.topological_order() {
            mu[j] =
                self.intercepts[j] + self.weights[j].iter().map(|&(p, w)| w * mu[p]).sum::<f64>();
        }
        mu
    }

    /// Total effect of each noise term on `target`: `x_t - E[x_t] = sum_j c_j e_j`.
    pub fn noise_coefficients(&self, target: usize) -> Vec<f64> {
        let d = self.n_nodes();
        let mut c = vec![0.0; d];
        c[target] = 1.0;
        // reverse topological sweep: c_i = sum over children k of w_ik c_k
        for &i in self.dag.topological_order().iter().rev() {
            if i == target {
                continue;
            }
            let mut v = 0.0;
            for k in self.dag.children(i) {
                let w = self.weights[k]
                    .iter()
                    .find(|p| p.0 == i)
                    .map_or(0.0, |p| p.1);
                v += w * c[k];
            }
            c[i] = v;
        }
        c
    }

    pub fn to_json(&self) -> serde_json::Value {
        let eqs: Vec<NodeEquation> = (0..self.n_nodes())
            .map(|j| NodeEquation {
                node: self.nodes()[j].clone(),
                intercept: self.intercepts[j],
                parents: self.weights[j]
                    .iter()
                    .map(|&(p, w)| (self.nodes()[p].clone(), w))
                    .collect(),
                sigma: self.sigma[j],
            })
            .collect();
        serde_json::to_value(eqs).expect("plain data")
    }
}
