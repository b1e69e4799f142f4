use crate::discovery::{DiscoveryParams, Method};
use crate::graph::CausalGraph;

use super::{ArtifactRef, DataRole, RcaMethod, RcaParams, WorkflowCommand};

/// Uploaded refs of a benchmark bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleRefs {
    pub normal: ArtifactRef,
    pub anomalies: ArtifactRef,
    pub labels: ArtifactRef,
    pub truth: ArtifactRef,
}

/// The standard benchmark pipeline over an uploaded bundle: load, describe,
/// discover and score against the truth, then estimate one effect and rank
/// the first anomalous row with every method on the true graph.
pub fn bundle_pipeline(
    refs: &BundleRefs,
    truth: &CausalGraph,
    algorithm: Method,
    seed: u64,
) -> Vec<WorkflowCommand> {
    let mut cmds = vec![
        WorkflowCommand::LoadData {
            source: refs.normal.clone(),
            role: DataRole::Primary,
            labels: None,
            hints: Default::default(),
            categorical_threshold: None,
        },
        WorkflowCommand::LoadData {
            source: refs.anomalies.clone(),
            role: DataRole::Anomalies,
            labels: Some(refs.labels.clone()),
            hints: Default::default(),
            categorical_threshold: None,
        },
        WorkflowCommand::Describe,
        WorkflowCommand::Discover {
            algorithm,
            params: DiscoveryParams {
                seed,
                ..Default::default()
            },
        },
        WorkflowCommand::Evaluate {
            truth: Some(refs.truth.clone()),
        },
        WorkflowCommand::SetGraph {
            graph: truth.clone(),
        },
    ];
    if let Some(e) = truth.edges().first() {
        cmds.push(WorkflowCommand::EstimateEffect {
            treatment: truth.label(e.from).to_string(),
            outcome: truth.label(e.to).to_string(),
        });
    }
    for method in [
        RcaMethod::Cholesky,
        RcaMethod::Traversal,
        RcaMethod::Counterfactual,
    ] {
        cmds.push(WorkflowCommand::RunRca {
            method,
            row: 0,
            target: None,
            params: RcaParams {
                seed,
                ..Default::default()
            },
        });
    }
    cmds.push(WorkflowCommand::GenerateReport);
    cmds
}
