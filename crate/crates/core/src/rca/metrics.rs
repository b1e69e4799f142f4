use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub precision_k: f64,
    pub recall_k: f64,
    pub f1_k: f64,
    pub accuracy_top1: f64,
    pub ndcg_k: f64,
    pub mrr: f64,
    pub map_k: f64,
    /// Set when the ranking is shorter than k.
    pub truncated: bool,
}

/// Binary-relevance ranking metrics at cutoff `k`.
pub fn rank_metrics(ranking: &[String], truth: &BTreeSet<String>, k: usize) -> Result<RankMetrics> {
    if truth.is_empty() {
        return Err(Error::Input("truth set is empty".into()));
    }
    if k == 0 {
        return Err(Error::Input("k must be at least 1".into()));
    }
    let top = &ranking[..k.min(ranking.len())];
    let rel: Vec<bool> = top.iter().map(|n| truth.contains(n)).collect();
    let hits = rel.iter().filter(|r| **r).count() as f64;
    let precision = if top.is_empty() {
        0.0
    } else {
        hits / top.len() as f64
    };
    let recall = hits / truth.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let gain = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let dcg: f64 = rel
        .iter()
        .enumerate()
        .filter(|(_, r)| **r)
        .map(|(i, _)| gain(i))
        .sum();
    let idcg: f64 = (0..truth.len().min(k)).map(gain).sum();
    let mrr = ranking
        .iter()
        .position(|n| truth.contains(n))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64);
    let mut seen = 0.0;
    let mut ap = 0.0;
    for (i, r) in rel.iter().enumerate() {
        if *r {
            seen += 1.0;
            ap += seen / (i + 1) as f64;
        }
    }
    Ok(RankMetrics {
        precision_k: precision,
        recall_k: recall,
        f1_k: f1,
        accuracy_top1: if rel.first() == Some(&true) { 1.0 } else { 0.0 },
        ndcg_k: dcg / idcg,
        mrr,
        map_k: ap / truth.len().min(k) as f64,
        truncated: ranking.len() < k,
    })
}
