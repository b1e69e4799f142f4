use std::collections::BTreeSet;

use serde_json::json;

use super::{AnomalyScores, RankedCauses};
use crate::graph::Dag;
use crate::{Error, Result};

/// Anomalous ancestors-or-self of the target that have no anomalous parent.
pub fn rca_traversal(
    g: &Dag,
    scores: &AnomalyScores,
    target: &str,
    tau: f64,
) -> Result<RankedCauses> {
    let t = g.graph().require(target)?;
    let score = |i: usize| -> Result<f64> {
        let name = &g.nodes()[i];
        scores
            .get(name)
            .ok_or_else(|| Error::Input(format!("no anomaly score for '{name}'")))
    };
    let params = json!({ "target": target, "tau": tau });
    if score(t)? < tau {
        return Ok(RankedCauses::new(
            "traversal",
            params,
            [],
            vec!["target not anomalous".into()],
        ));
    }
    let mut pool = g.ancestors(t);
    pool.insert(t);
    let mut candidates = BTreeSet::new();
    for i in pool {
        if score(i)? >= tau {
            candidates.insert(i);
        }
    }
    let mut roots = Vec::new();
    for &i in &candidates {
        if !g.parents(i).iter().any(|p| candidates.contains(p)) {
            roots.push((g.nodes()[i].clone(), score(i)?));
        }
    }
    Ok(RankedCauses::new("traversal", params, roots, vec![]))
}
