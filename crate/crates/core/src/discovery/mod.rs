//! Structure learning from continuous observational data.

mod ci;
mod ges;
mod lbfgs;
mod lingam;
mod notears;
mod pc;

pub use ci::{fisher_z_test, CiResult, FisherZ};
pub use ges::{bic_score, ges, ges_with_trace};
pub use lingam::direct_lingam;
pub use notears::{acyclicity, notears_linear, NotearsObjective};
pub use pc::pc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::graph::{apply_knowledge, validate_dag, CausalGraph, Dag, Knowledge};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryParams {
    pub alpha: f64,
    pub max_cond_set: Option<usize>,
    pub lambda1: f64,
    pub w_threshold: f64,
    pub seed: u64,
}

impl Default for DiscoveryParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            max_cond_set: None,
            lambda1: 0.1,
            w_threshold: 0.3,
            seed: 0,
        }
    }
}

impl DiscoveryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if !(self.w_threshold >= 0.0) {
            return Err(Error::InvalidSpec(
                "w_threshold must be non-negative".into(),
            ));
        }
        if !(self.lambda1 >= 0.0) {
            return Err(Error::InvalidSpec("lambda1 must be non-negative".into()));
        }
        Ok(())
    }
}

/// A DAG with its weight matrix; `weights[(i, j)] != 0` iff `i -> j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDag {
    pub dag: Dag,
    pub weights: DMatrix<f64>,
    /// Acyclicity residual of the unthresholded solution.
    pub h: f64,
    pub converged: bool,
    pub causal_order: Option<Vec<usize>>,
}

impl WeightedDag {
    pub(crate) fn from_matrix(
        nodes: &[String],
        w: DMatrix<f64>,
        h: f64,
        converged: bool,
    ) -> Result<Self> {
        let mut g = CausalGraph::new(nodes.iter().cloned())?;
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                if w[(i, j)] != 0.0 {
                    if i == j || w[(j, i)] != 0.0 {
                        return Err(Error::Cycle(vec![
                            nodes[i].clone(),
                            nodes[j].clone(),
                            nodes[i].clone(),
                        ]));
                    }
                    g.add_directed(i, j, Some(w[(i, j)]))?;
                }
            }
        }
        Ok(Self {
            dag: validate_dag(&g)?,
            weights: w,
            h,
            converged,
            causal_order: None,
        })
    }

    pub fn graph(&self) -> &CausalGraph {
        self.dag.graph()
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[(from, to)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pc,
    Ges,
    Notears,
    DirectLingam,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Pc => "pc",
            Method::Ges => "ges",
            Method::Notears => "notears",
            Method::DirectLingam => "direct_lingam",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "pc" => Some(Method::Pc),
            "ges" => Some(Method::Ges),
            "notears" => Some(Method::Notears),
            "direct_lingam" | "lingam" | "directlingam" => Some(Method::DirectLingam),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryResult {
    pub method: Method,
    pub graph: CausalGraph,
    pub converged: Option<bool>,
    pub h: Option<f64>,
    pub causal_order: Option<Vec<String>>,
}

/// Runs one method. Methods without native knowledge support have it
/// enforced on their output.
pub fn discover(
    ds: &Dataset,
    method: Method,
    params: &DiscoveryParams,
    k: &Knowledge,
) -> Result<DiscoveryResult> {
    params.validate()?;
    let (graph, converged, h, order) = match method {
        Method::Pc => (pc(ds, params, k)?, None, None, None),
        Method::Ges => (ges(ds, params, k)?, None, None, None),
        Method::Notears | Method::DirectLingam => {
            let wd = if method == Method::Notears {
                notears_linear(ds, params)?
            } else {
                direct_lingam(ds, params)?
            };
            let order = wd
                .causal_order
                .as_ref()
                .map(|o| o.iter().map(|&i| ds.columns()[i].name.clone()).collect());
            let g = if k.is_empty() {
                wd.graph().clone()
            } else {
                apply_knowledge(wd.graph(), k)?
            };
            (g, Some(wd.converged), Some(wd.h), order)
        }
    };
    Ok(DiscoveryResult {
        method,
        graph,
        converged,
        h,
        causal_order: order,
    })
}

/// Continuous data matrix with at least two columns and the given row floor.
pub(crate) fn data_matrix(ds: &Dataset, min_rows: usize) -> Result<DMatrix<f64>> {
    let x = ds.continuous_matrix()?;
    if x.ncols() < 2 {
        return Err(Error::Input(
            "structure learning needs at least two columns".into(),
        ));
    }
    if x.nrows() < min_rows {
        return Err(Error::SampleSize {
            n: x.nrows(),
            required: min_rows,
        });
    }
    Ok(x)
}
