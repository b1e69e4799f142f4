//! Causal analysis workbench.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: tabular datasets, CSV ingestion, schema conformance, preprocessing and EDA.
//! - [`graph`]: mixed causal graphs, DAG/CPDAG algebra, background knowledge, SHD and serialization.
//! - [`sim`]: random graph and structural causal model simulation with root-cause injection.
//! - [`discovery`]: Fisher-z testing, PC-stable, GES, NOTEARS (linear) and DirectLiNGAM.
//! - [`effects`]: parent-adjustment backdoor sets and linear ATE estimation.
//! - [`rca`]: anomaly scoring, traversal, counterfactual Shapley attribution, Cholesky whitening and ranking metrics.
//! - [`workflow`]: typed commands, the step journal with rollback, recommendations, runtime estimates and reports.

// NaN-aware guards read `!(x > 0.0)` on purpose; dense matrix loops index by position.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod data;
pub mod discovery;
pub mod effects;
pub mod error;
pub mod graph;
pub(crate) mod linalg;
pub mod rca;
pub mod sim;
pub mod stats;
pub mod workflow;

pub use error::{Error, Result};
