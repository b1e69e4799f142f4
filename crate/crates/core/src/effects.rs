//! Average treatment effects by linear backdoor adjustment.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::graph::Dag;
use crate::linalg::ols;
use crate::{Error, Result};

const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteEstimate {
    pub treatment: String,
    pub outcome: String,
    pub ate: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub adjustment_set: Vec<String>,
    pub n: usize,
}

/// Parents of the treatment; always a valid backdoor set in a DAG.
pub fn backdoor_set(g: &Dag, t: &str, y: &str) -> Result<Vec<String>> {
    let it = g.graph().require(t)?;
    let iy = g.graph().require(y)?;
    if it == iy {
        return Err(Error::InvalidQuery(
            "treatment and outcome are the same node".into(),
        ));
    }
    let pa = g.parents(it);
    if pa.contains(&iy) {
        return Err(Error::InvalidQuery(format!("'{y}' is a parent of '{t}'")));
    }
    if g.ancestors(it).contains(&iy) {
        return Err(Error::InvalidQuery(format!(
            "'{y}' is an ancestor of '{t}'; no causal path from treatment to outcome"
        )));
    }
    Ok(pa.into_iter().map(|p| g.nodes()[p].clone()).collect())
}

/// OLS of `y` on `[1, t, z...]`; the ATE is the coefficient of `t`.
pub fn estimate_ate_linear(ds: &Dataset, t: &str, y: &str, z: &[String]) -> Result<AteEstimate> {
    if t == y {
        return Err(Error::Numeric(format!(
            "collinear: outcome '{y}' is the treatment column"
        )));
    }
    if z.iter().any(|v| v == t || v == y) {
        return Err(Error::InvalidQuery(
            "adjustment set contains treatment or outcome".into(),
        ));
    }
    let it = ds.require_column(t)?;
    let iy = ds.require_column(y)?;
    let iz: Vec<usize> = z
        .iter()
        .map(|c| ds.require_column(c))
        .collect::<Result<_>>()?;
    let mut cols = vec![it, iy];
    cols.extend(&iz);
    let x = ds.select_columns(&cols).continuous_matrix()?;
    let (n, p) = (x.nrows(), z.len() + 2);
    if n <= p {
        return Err(Error::SampleSize { n, required: p + 1 });
    }
    let design = DMatrix::from_fn(n, p, |r, c| match c {
        0 => 1.0,
        1 => x[(r, 0)],
        _ => x[(r, c)],
    });
    let yv = DVector::from_iterator(n, x.column(1).iter().copied());
    let names = |idx: &[usize]| -> String {
        idx.iter()
            .map(|&c| match c {
                0 => "intercept".to_string(),
                1 => t.to_string(),
                c => z[c - 2].clone(),
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    let fit = ols(&design, &yv)
        .map_err(|bad| Error::Numeric(format!("collinear regressors: {}", names(&bad))))?;
    let tss: f64 = {
        let m = yv.mean();
        yv.iter().map(|v| (v - m).powi(2)).sum()
    };
    if fit.rss <= 1e-12 * tss {
        return Err(Error::Numeric(format!(
            "collinear: outcome '{y}' is an exact linear function of {}",
            names(&(1..p).collect::<Vec<_>>())
        )));
    }
    let sigma2 = fit.rss / (n - p) as f64;
    let ate = fit.coef[1];
    let stderr = (sigma2 * fit.xtx_inv[(1, 1)]).sqrt();
    Ok(AteEstimate {
        treatment: t.into(),
        outcome: y.into(),
        ate,
        stderr,
        ci95: (ate - Z95 * stderr, ate + Z95 * stderr),
        adjustment_set: z.to_vec(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{validate_dag, CausalGraph};

    fn dag(nodes: &[&str], edges: &[(&str, &str)]) -> Dag {
        let mut g = CausalGraph::new(nodes.iter().copied()).unwrap();
        for (a, b) in edges {
            g.add_edge(a, b).unwrap();
        }
        validate_dag(&g).unwrap()
    }

    #[test]
    fn backdoor_examples() {
        let g = dag(&["X", "T", "Y"], &[("X", "T"), ("T", "Y"), ("X", "Y")]);
        assert_eq!(backdoor_set(&g, "T", "Y").unwrap(), vec!["X"]);
        let g = dag(&["T", "Y"], &[("T", "Y")]);
        assert!(backdoor_set(&g, "T", "Y").unwrap().is_empty());
        let g = dag(&["T", "Y"], &[("Y", "T")]);
        assert!(matches!(
            backdoor_set(&g, "T", "Y"),
            Err(Error::InvalidQuery(_))
        ));
        let g = dag(&["Y", "M", "T"], &[("Y", "M"), ("M", "T")]);
        assert!(matches!(
            backdoor_set(&g, "T", "Y"),
            Err(Error::InvalidQuery(_))
        ));
    }

    #[test]
    fn identical_columns_error() {
        let names = vec!["t".to_string(), "y".to_string(), "z".to_string()];
        let t = vec![1.0, 2.0, 3.0, 4.0, 5.0, 7.0];
        let z = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let ds = Dataset::from_columns(&names, &[t.clone(), t, z.clone()]).unwrap();
        assert!(matches!(
            estimate_ate_linear(&ds, "t", "y", &[]),
            Err(Error::Numeric(_))
        ));
        let ds = Dataset::from_columns(&names, &[z.clone(), vec![1.0, 0.0, 2.0, 1.0, 3.0, 1.0], z])
            .unwrap();
        match estimate_ate_linear(&ds, "t", "y", &["z".to_string()]) {
            Err(Error::Numeric(m)) => assert!(m.contains('t') && m.contains('z'), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exact_ci_width() {
        let names = vec!["t".to_string(), "y".to_string()];
        let t: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = t
            .iter()
            .enumerate()
            .map(|(i, v)| 3.0 * v + if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let est = estimate_ate_linear(
            &Dataset::from_columns(&names, &[t, y]).unwrap(),
            "t",
            "y",
            &[],
        )
        .unwrap();
        assert!((est.ci95.1 - est.ci95.0 - 2.0 * 1.96 * est.stderr).abs() < 1e-12);
        assert!((est.ate - 3.0).abs() < 0.05);
    }
}
