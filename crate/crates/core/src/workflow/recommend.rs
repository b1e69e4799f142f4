use serde::{Deserialize, Serialize};

use super::profile::{DatasetProfile, Verdict};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Goal {
    Graph,
    Rca,
    Effect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    /// Method tag, one of the names accepted by [`super::estimate_runtime`].
    pub method: String,
    pub rule: String,
}

/// Above this dimension GES is moved to the end of any graph recommendation.
pub const GES_MAX_D: usize = 50;

pub const RULE_LINGAM: &str =
    "graph goal, continuous, non-Gaussian, linear: LiNGAM identifies the full DAG";
pub const RULE_GAUSSIAN: &str =
    "graph goal, continuous, Gaussian: constraint and score methods recover the CPDAG";
pub const RULE_FALLBACK: &str = "graph goal, no distributional rule fired: general-purpose methods";
pub const RULE_GES_LAST: &str = "d > 50: GES search cost grows fastest, moved last";
pub const RULE_RCA_NO_GRAPH: &str = "rca goal without a graph: Cholesky whitening needs no graph";
pub const RULE_RCA_GRAPH: &str = "rca goal with a graph: graph-based attribution";
pub const RULE_EFFECT: &str = "effect goal: linear backdoor adjustment on the current graph";

/// Fixed rule table. `graph_present` only matters for the rca goal.
pub fn recommend(
    profile: &DatasetProfile,
    goal: Goal,
    graph_present: bool,
) -> Result<Vec<Recommendation>> {
    if profile.d == 0 || profile.fraction_continuous == 0.0 {
        return Err(Error::NoMethod(
            "all columns are categorical; only continuous independence tests are available".into(),
        ));
    }
    let item = |m: &str, r: &str| Recommendation {
        method: m.into(),
        rule: r.into(),
    };
    let continuous = profile.fraction_continuous >= 0.5;
    Ok(match goal {
        Goal::Graph => {
            let (methods, rule) = if continuous
                && profile.gaussian == Verdict::No
                && profile.linear == Verdict::Yes
            {
                (["direct_lingam", "notears", "pc"], RULE_LINGAM)
            } else if continuous && profile.gaussian == Verdict::Yes {
                (["pc", "ges", "notears"], RULE_GAUSSIAN)
            } else {
                (["pc", "notears", "ges"], RULE_FALLBACK)
            };
            let mut out: Vec<Recommendation> = methods.iter().map(|m| item(m, rule)).collect();
            if profile.d > GES_MAX_D {
                if let Some(i) = out.iter().position(|r| r.method == "ges") {
                    out.remove(i);
                    out.push(item("ges", RULE_GES_LAST));
                }
            }
            out
        }
        Goal::Rca if graph_present => vec![
            item("rca_traversal", RULE_RCA_GRAPH),
            item("rca_counterfactual", RULE_RCA_GRAPH),
        ],
        Goal::Rca => vec![item("rca_cholesky", RULE_RCA_NO_GRAPH)],
        Goal::Effect => vec![item("effect_linear", RULE_EFFECT)],
    })
}
