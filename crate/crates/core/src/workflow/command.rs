use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, PreprocessPlan};
use crate::discovery::{DiscoveryParams, Method};
use crate::graph::{CausalGraph, KnowledgeDelta};
use crate::rca::{AnomalyMethod, Search};
use crate::sim::{GraphSpec, InterventionSpec, MechanismSpec};
use crate::{Error, Result};

/// Content hash (hex SHA-256) naming a stored artifact.
pub type ArtifactRef = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataRole {
    /// Observational data used for discovery, effects and as the RCA baseline.
    #[default]
    Primary,
    /// Anomalous rows to explain.
    Anomalies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RcaMethod {
    Traversal,
    Counterfactual,
    Cholesky,
}

impl RcaMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RcaMethod::Traversal => "traversal",
            RcaMethod::Counterfactual => "counterfactual",
            RcaMethod::Cholesky => "cholesky",
        }
    }

    pub fn needs_graph(&self) -> bool {
        !matches!(self, RcaMethod::Cholesky)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RcaParams {
    pub tau: f64,
    pub search: Search,
    pub seed: u64,
    pub monte_carlo: Option<usize>,
    pub anomaly_method: AnomalyMethod,
    /// Cutoff for ranking metrics when labels are known.
    pub k: usize,
}

impl Default for RcaParams {
    fn default() -> Self {
        Self {
            tau: crate::rca::DEFAULT_TAU,
            search: Search::Exhaustive,
            seed: 0,
            monte_carlo: None,
            anomaly_method: AnomalyMethod::RobustZ,
            k: 3,
        }
    }
}

/// The closed vocabulary of session actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorkflowCommand {
    LoadData {
        source: ArtifactRef,
        #[serde(default)]
        role: DataRole,
        /// Per-row root-cause labels for anomalous data.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<ArtifactRef>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        hints: BTreeMap<String, ColumnKind>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        categorical_threshold: Option<usize>,
    },
    Preprocess {
        plan: PreprocessPlan,
    },
    Describe,
    SetKnowledge {
        delta: KnowledgeDelta,
    },
    Discover {
        algorithm: Method,
        #[serde(default)]
        params: DiscoveryParams,
    },
    SetGraph {
        graph: CausalGraph,
    },
    EstimateEffect {
        treatment: String,
        outcome: String,
    },
    RunRca {
        method: RcaMethod,
        #[serde(default)]
        row: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
        #[serde(default)]
        params: RcaParams,
    },
    Simulate {
        graph: GraphSpec,
        #[serde(default)]
        mechanism: MechanismSpec,
        intervention: InterventionSpec,
        n_normal: usize,
    },
    Evaluate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truth: Option<ArtifactRef>,
    },
    Rollback {
        step: u64,
    },
    GenerateReport,
}

impl WorkflowCommand {
    pub fn name(&self) -> &'static str {
        match self {
            WorkflowCommand::LoadData { .. } => "load_data",
            WorkflowCommand::Preprocess { .. } => "preprocess",
            WorkflowCommand::Describe => "describe",
            WorkflowCommand::SetKnowledge { .. } => "set_knowledge",
            WorkflowCommand::Discover { .. } => "discover",
            WorkflowCommand::SetGraph { .. } => "set_graph",
            WorkflowCommand::EstimateEffect { .. } => "estimate_effect",
            WorkflowCommand::RunRca { .. } => "run_rca",
            WorkflowCommand::Simulate { .. } => "simulate",
            WorkflowCommand::Evaluate { .. } => "evaluate",
            WorkflowCommand::Rollback { .. } => "rollback",
            WorkflowCommand::GenerateReport => "generate_report",
        }
    }

    /// State-independent parameter validation.
    pub fn validate(&self) -> Result<()> {
        match self {
            WorkflowCommand::LoadData { source, labels, .. } => {
                check_ref(source)?;
                if let Some(l) = labels {
                    check_ref(l)?;
                }
                Ok(())
            }
            WorkflowCommand::Preprocess { plan } => plan.validate(),
            WorkflowCommand::SetKnowledge { delta } => crate::graph::Knowledge::default()
                .apply_delta(delta)
                .map(|_| ()),
            WorkflowCommand::Discover { params, .. } => params.validate(),
            WorkflowCommand::EstimateEffect { treatment, outcome } => {
                if treatment == outcome {
                    return Err(Error::InvalidQuery(
                        "treatment and outcome must differ".into(),
                    ));
                }
                Ok(())
            }
            WorkflowCommand::RunRca { params, .. } => {
                if params.k == 0 {
                    return Err(Error::InvalidSpec("k must be at least 1".into()));
                }
                if !params.tau.is_finite() {
                    return Err(Error::InvalidSpec("tau must be finite".into()));
                }
                Ok(())
            }
            WorkflowCommand::Simulate {
                graph,
                mechanism,
                intervention,
                n_normal,
            } => {
                graph.validate()?;
                mechanism.validate()?;
                intervention.validate(graph.d)?;
                if *n_normal == 0 {
                    return Err(Error::InvalidSpec("n_normal must be at least 1".into()));
                }
                Ok(())
            }
            WorkflowCommand::Evaluate { truth: Some(r) } => check_ref(r),
            _ => Ok(()),
        }
    }
}

fn check_ref(r: &str) -> Result<()> {
    if r.len() == 64
        && r.bytes()
            .all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
    {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "'{r}' is not an artifact reference"
        )))
    }
}
