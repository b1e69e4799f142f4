//! Step computations shared by the session and the batch driver, so both
//! emit byte-identical artifacts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::command::{RcaMethod, RcaParams};
use crate::data::Dataset;
use crate::graph::{shd, to_cpdag, CausalGraph, Dag, Shd};
use crate::rca::{
    anomaly_scores, fit_linear_scm, rank_metrics, rca_cholesky, rca_counterfactual, rca_traversal,
    CholeskyParams, CounterfactualParams, RankMetrics, RankedCauses,
};
use crate::{Error, Result};

/// Root-cause labels per anomalous row, as stored in `labels.json`.
pub type Labels = BTreeMap<usize, Vec<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEvaluation {
    /// Against the true DAG.
    pub dag: Shd,
    /// Against the CPDAG of the true DAG.
    pub cpdag: Shd,
}

pub fn evaluate_graph(estimate: &CausalGraph, truth: &Dag) -> Result<GraphEvaluation> {
    Ok(GraphEvaluation {
        dag: shd(estimate, truth.graph())?,
        cpdag: shd(estimate, &to_cpdag(truth))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaOutcome {
    pub row: usize,
    pub target: String,
    pub causes: RankedCauses,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<RankMetrics>,
}

/// One anomalous row in `normal`'s column order, matched by name.
pub fn aligned_row(normal: &Dataset, anomalies: &Dataset, row: usize) -> Result<Vec<f64>> {
    if row >= anomalies.n_rows() {
        return Err(Error::InvalidQuery(format!(
            "row {row} out of range: {} anomalous rows",
            anomalies.n_rows()
        )));
    }
    normal
        .columns()
        .iter()
        .map(|c| {
            let j = anomalies.column_index(&c.name).ok_or_else(|| {
                Error::Schema(format!("anomalous data lacks column '{}'", c.name))
            })?;
            anomalies
                .get(row, j)
                .ok_or_else(|| Error::Input(format!("row {row} is missing '{}'", c.name)))
        })
        .collect()
}

/// Ranks the causes of one anomalous row. Without an explicit target the
/// row's highest-scoring node is explained.
pub fn run_rca(
    normal: &Dataset,
    anomalies: &Dataset,
    graph: Option<&Dag>,
    method: RcaMethod,
    row: usize,
    target: Option<&str>,
    params: &RcaParams,
    labels: Option<&Labels>,
) -> Result<RcaOutcome> {
    let sample = aligned_row(normal, anomalies, row)?;
    let need_graph = || {
        graph.ok_or_else(|| Error::Precondition(format!("{} needs a causal graph", method.name())))
    };
    let scores = anomaly_scores(normal, &sample, params.anomaly_method)?;
    let target = match target {
        Some(t) => {
            normal.require_column(t)?;
            t.to_string()
        }
        None => {
            let mut best: Option<(&String, f64)> = None;
            for (n, &s) in scores.nodes.iter().zip(&scores.scores) {
                if best.is_none_or(|(bn, bs)| s > bs || (s == bs && n < bn)) {
                    best = Some((n, s));
                }
            }
            best.expect("at least one column").0.clone()
        }
    };
    let causes = match method {
        RcaMethod::Traversal => rca_traversal(need_graph()?, &scores, &target, params.tau)?,
        RcaMethod::Counterfactual => {
            let fit = fit_linear_scm(need_graph()?, normal)?;
            let x = fit.align_row(anomalies, row)?;
            let cf = CounterfactualParams {
                monte_carlo: params.monte_carlo,
                seed: params.seed,
                ..Default::default()
            };
            rca_counterfactual(&fit, &x, &target, &cf)?
        }
        RcaMethod::Cholesky => rca_cholesky(
            normal,
            &sample,
            &CholeskyParams {
                search: params.search,
                seed: params.seed,
            },
        )?,
    };
    let truth = labels.and_then(|l| l.get(&row)).cloned();
    let metrics = match &truth {
        Some(t) => Some(rank_metrics(
            &causes.nodes(),
            &t.iter().cloned().collect::<BTreeSet<_>>(),
            params.k,
        )?),
        None => None,
    };
    Ok(RcaOutcome {
        row,
        target,
        causes,
        truth,
        metrics,
    })
}

/// Canonical artifact encodings.
pub fn dataset_bytes(ds: &Dataset) -> Vec<u8> {
    serde_json::to_vec(ds).expect("dataset serializes")
}

pub fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec_pretty(v).expect("artifact serializes")
}

pub fn graph_bytes(g: &CausalGraph) -> Vec<u8> {
    crate::graph::to_json(g).into_bytes()
}
