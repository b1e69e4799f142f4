//! Root cause analysis: anomaly scoring, graph-based and graph-free
//! attribution, and ranking metrics.

mod anomaly;
mod bench;
mod cholesky;
mod counterfactual;
mod fit;
mod metrics;
mod traversal;

pub use anomaly::{anomaly_scores, AnomalyMethod, AnomalyScores};
pub use bench::{run_benchmark, BenchMethod, BenchRow, BENCH_CSV_HEADER};
pub use cholesky::{rca_cholesky, whiten, CholeskyParams, Search, EXHAUSTIVE_LIMIT};
pub use counterfactual::{
    rca_counterfactual, shapley_attribution, CounterfactualParams, ShapleyAttribution,
    EXACT_PLAYER_LIMIT, MIN_PERMUTATIONS,
};
pub use fit::{fit_linear_scm, LinearScmFit};
pub use metrics::{rank_metrics, RankMetrics};
pub use traversal::rca_traversal;

use serde::{Deserialize, Serialize};

pub const DEFAULT_TAU: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedNode {
    pub node: String,
    pub score: f64,
}

/// Candidates in descending score order, ties by node label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCauses {
    pub method: String,
    pub params: serde_json::Value,
    pub ranking: Vec<RankedNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl RankedCauses {
    pub(crate) fn new(
        method: &str,
        params: serde_json::Value,
        scored: impl IntoIterator<Item = (String, f64)>,
        flags: Vec<String>,
    ) -> Self {
        let mut ranking: Vec<RankedNode> = scored
            .into_iter()
            .map(|(node, score)| RankedNode { node, score })
            .collect();
        ranking.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.node.cmp(&b.node))
        });
        Self {
            method: method.into(),
            params,
            ranking,
            flags,
        }
    }

    pub fn nodes(&self) -> Vec<String> {
        self.ranking.iter().map(|r| r.node.clone()).collect()
    }

    pub fn top(&self) -> Option<&str> {
        self.ranking.first().map(|r| r.node.as_str())
    }
}
