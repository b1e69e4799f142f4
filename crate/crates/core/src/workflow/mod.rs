//! Session orchestration: typed commands, a step journal with rollback,
//! rule-based intent parsing, recommendations, runtime estimates and reports.

mod command;
mod intent;
pub mod ops;
mod pipeline;
mod profile;
mod recommend;
mod report;
mod runtime;
mod session;
mod store;

pub use command::{ArtifactRef, DataRole, RcaMethod, RcaParams, WorkflowCommand};
pub use intent::{
    default_intervention, parse_intent, DEFAULT_ANOMALIES, DEFAULT_MAGNITUDE, DEFAULT_SEED, VERBS,
};
pub use pipeline::{bundle_pipeline, BundleRefs};
pub use profile::{profile, DatasetProfile, Verdict};
pub use recommend::{recommend, Goal, Recommendation};
pub use report::render_report;
pub use runtime::{calibrate, estimate_runtime, Calibration, RuntimeEstimate};
pub use session::{
    Context, OutputRef, PreparedStep, Session, StepOutcome, StepRecord, StepResult, StepStatus,
};
pub use store::{content_ref, ArtifactKind, ArtifactStore};
