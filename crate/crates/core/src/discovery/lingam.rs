use nalgebra::{DMatrix, DVector};

use super::{data_matrix, notears::acyclicity, DiscoveryParams, WeightedDag};
use crate::data::Dataset;
use crate::linalg::ols;
use crate::{Error, Result};

const K1: f64 = 79.047;
const K2: f64 = 7.4129;
const GAMMA: f64 = 0.37457;

/// Maximum-entropy approximation of differential entropy for a standardized sample.
fn entropy(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    let lc = u.iter().map(|v| v.cosh().ln()).sum::<f64>() / n;
    let ge = u.iter().map(|v| v * (-v * v / 2.0).exp()).sum::<f64>() / n;
    (1.0 + (2.0 * std::f64::consts::PI).ln()) / 2.0 - K1 * (lc - GAMMA).powi(2) - K2 * ge.powi(2)
}

fn standardize(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let s = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    x.iter().map(|v| (v - m) / s).collect()
}

/// Residual of `xi` after regressing on `xj` (both centered or standardized).
fn residual(xi: &[f64], xj: &[f64]) -> Vec<f64> {
    let n = xi.len() as f64;
    let (mi, mj) = (xi.iter().sum::<f64>() / n, xj.iter().sum::<f64>() / n);
    let cov: f64 = xi.iter().zip(xj).map(|(a, b)| (a - mi) * (b - mj)).sum();
    let var: f64 = xj.iter().map(|b| (b - mj).powi(2)).sum();
    let beta = cov / var;
    xi.iter().zip(xj).map(|(a, b)| a - beta * b).collect()
}

/// Likelihood-ratio difference; positive favours `i -> j`.
fn diff_mutual_info(xi: &[f64], xj: &[f64], ri_j: &[f64], rj_i: &[f64]) -> f64 {
    (entropy(xj) + entropy(&standardize(ri_j))) - (entropy(xi) + entropy(&standardize(rj_i)))
}

fn most_exogenous(cols: &[Vec<f64>], remaining: &[usize]) -> usize {
    if remaining.len() == 1 {
        return remaining[0];
    }
    let std: Vec<Option<Vec<f64>>> = (0..cols.len())
        .map(|i| remaining.contains(&i).then(|| standardize(&cols[i])))
        .collect();
    let mut best = (remaining[0], f64::NEG_INFINITY);
    for &i in remaining {
        let xi = std[i].as_ref().expect("remaining");
        let mut m = 0.0;
        for &j in remaining {
            if i == j {
                continue;
            }
            let xj = std[j].as_ref().expect("remaining");
            let ri_j = residual(xi, xj);
            let rj_i = residual(xj, xi);
            m += diff_mutual_info(xi, xj, &ri_j, &rj_i).min(0.0).powi(2);
        }
        if -m > best.1 {
            best = (i, -m);
        }
    }
    best.0
}

/// DirectLiNGAM: entropy-based causal ordering, then OLS weights along the
/// order, pruned where the standardized coefficient is below `w_threshold`.
pub fn direct_lingam(ds: &Dataset, params: &DiscoveryParams) -> Result<WeightedDag> {
    params.validate()?;
    let x = data_matrix(ds, 3)?;
    let (n, d) = (x.nrows(), x.ncols());
    let mut cols: Vec<Vec<f64>> = (0..d)
        .map(|j| x.column(j).iter().copied().collect())
        .collect();
    for (j, c) in cols.iter().enumerate() {
        let m = c.iter().sum::<f64>() / n as f64;
        if c.iter().all(|v| (v - m).abs() == 0.0) {
            return Err(Error::Input(format!(
                "column '{}' is constant",
                ds.columns()[j].name
            )));
        }
    }

    let mut remaining: Vec<usize> = (0..d).collect();
    let mut order = Vec::with_capacity(d);
    while !remaining.is_empty() {
        let m = most_exogenous(&cols, &remaining);
        for &i in &remaining {
            if i != m {
                cols[i] = residual(&cols[i], &cols[m]);
            }
        }
        order.push(m);
        remaining.retain(|&i| i != m);
    }

    let sd: Vec<f64> = (0..d)
        .map(|j| {
            let c = x.column(j);
            let m = c.mean();
            (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt()
        })
        .collect();
    let mut w = DMatrix::zeros(d, d);
    for (pos, &j) in order.iter().enumerate().skip(1) {
        let preds = &order[..pos];
        let design = DMatrix::from_fn(n, preds.len() + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                x[(r, preds[c - 1])]
            }
        });
        let y = DVector::from_iterator(n, x.column(j).iter().copied());
        let fit = ols(&design, &y).map_err(|cols| {
            let names: Vec<&str> = cols
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| ds.columns()[preds[c - 1]].name.as_str())
                .collect();
            Error::Numeric(format!("collinear predictors: {}", names.join(", ")))
        })?;
        for (k, &i) in preds.iter().enumerate() {
            let b = fit.coef[k + 1];
            if b.abs() >= params.w_threshold * sd[j] / sd[i] {
                w[(i, j)] = b;
            }
        }
    }
    let h = acyclicity(&w).0;
    let mut out = WeightedDag::from_matrix(&ds.names(), w, h, true)?;
    out.causal_order = Some(order);
    Ok(out)
}
