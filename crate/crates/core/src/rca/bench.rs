use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    anomaly_scores, fit_linear_scm, rank_metrics, rca_cholesky, rca_counterfactual, rca_traversal,
    AnomalyMethod, CholeskyParams, CounterfactualParams, RankMetrics, RankedCauses, Search,
    DEFAULT_TAU,
};
use crate::rca::cholesky::EXHAUSTIVE_LIMIT;
use crate::sim::BenchmarkCase;
use crate::Result;

pub const BENCH_CSV_HEADER: &str =
    "case,method,k,precision,recall,f1,accuracy_top1,ndcg,mrr,map,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    Traversal,
    Counterfactual,
    Cholesky,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 3] = [
        BenchMethod::Traversal,
        BenchMethod::Counterfactual,
        BenchMethod::Cholesky,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BenchMethod::Traversal => "traversal",
            BenchMethod::Counterfactual => "counterfactual",
            BenchMethod::Cholesky => "cholesky",
        }
    }
}

/// Metrics for one case × method, averaged over the case's anomalous rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub case: String,
    pub method: BenchMethod,
    pub k: usize,
    pub metrics: RankMetrics,
    pub wall_ms: f64,
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.case,
            self.method.name(),
            self.k,
            m.precision_k,
            m.recall_k,
            m.f1_k,
            m.accuracy_top1,
            m.ndcg_k,
            m.mrr,
            m.map_k,
            self.wall_ms
        )
    }
}

fn mean_metrics(all: &[RankMetrics]) -> RankMetrics {
    let n = all.len().max(1) as f64;
    let avg = |f: fn(&RankMetrics) -> f64| all.iter().map(f).sum::<f64>() / n;
    RankMetrics {
        precision_k: avg(|m| m.precision_k),
        recall_k: avg(|m| m.recall_k),
        f1_k: avg(|m| m.f1_k),
        accuracy_top1: avg(|m| m.accuracy_top1),
        ndcg_k: avg(|m| m.ndcg_k),
        mrr: avg(|m| m.mrr),
        map_k: avg(|m| m.map_k),
        truncated: all.iter().any(|m| m.truncated),
    }
}

/// Ranks every anomalous row of a case with each method. The target of the
/// graph-based methods is the row's highest-scoring node.
pub fn run_benchmark(
    case: &BenchmarkCase,
    case_name: &str,
    methods: &[BenchMethod],
    k: usize,
) -> Result<(Vec<BenchRow>, Vec<Vec<RankedCauses>>)> {
    let dag = case.scm.dag();
    let names = case.normal.names();
    let mut rows = Vec::new();
    let mut rankings = Vec::new();
    for &method in methods {
        let start = Instant::now();
        let fit = match method {
            BenchMethod::Counterfactual => Some(fit_linear_scm(dag, &case.normal)?),
            _ => None,
        };
        let mut per_row = Vec::new();
        let mut ranked = Vec::new();
        for (r, truth) in case.labels.iter().enumerate() {
            let sample: Vec<f64> = (0..names.len())
                .map(|c| case.anomalies.get(r, c).unwrap_or(f64::NAN))
                .collect();
            let scores = anomaly_scores(&case.normal, &sample, AnomalyMethod::RobustZ)?;
            let target = RankedCauses::new(
                "",
                serde_json::Value::Null,
                scores
                    .nodes
                    .iter()
                    .cloned()
                    .zip(scores.scores.iter().copied()),
                vec![],
            )
            .top()
            .expect("non-empty")
            .to_string();
            let result = match method {
                BenchMethod::Traversal => rca_traversal(dag, &scores, &target, DEFAULT_TAU)?,
                BenchMethod::Counterfactual => {
                    let fit = fit.as_ref().expect("fitted");
                    let aligned = fit.align_row(&case.anomalies, r)?;
                    rca_counterfactual(fit, &aligned, &target, &CounterfactualParams::default())?
                }
                BenchMethod::Cholesky => {
                    let search = if names.len() <= EXHAUSTIVE_LIMIT {
                        Search::Exhaustive
                    } else {
                        Search::Greedy
                    };
                    rca_cholesky(&case.normal, &sample, &CholeskyParams { search, seed: 0 })?
                }
            };
            let truth: BTreeSet<String> = truth.iter().cloned().collect();
            per_row.push(rank_metrics(&result.nodes(), &truth, k)?);
            ranked.push(result);
        }
        rows.push(BenchRow {
            case: case_name.into(),
            method,
            k,
            metrics: mean_metrics(&per_row),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        rankings.push(ranked);
    }
    Ok((rows, rankings))
}
