use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("csv parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("input has no data rows")]
    EmptyInput,

    #[error("preprocessing removed every {0}")]
    EmptyOutput(&'static str),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("graph contains a directed cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("graph is not a DAG: {0}")]
    EdgeKind(String),

    #[error("unknown node '{0}'")]
    UnknownNode(String),

    #[error("node sets differ: {0}")]
    NodeMismatch(String),

    #[error("inconsistent knowledge: {0}")]
    Knowledge(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("sample size {n} too small: need more than {required}")]
    SampleSize { n: usize, required: usize },

    #[error("optimizer did not converge: final h(W) = {h:e}")]
    Convergence { h: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("anomaly score undefined for constant column '{0}'")]
    UndefinedScore(String),

    #[error("{what} exceeds cap: {detail}")]
    CapExceeded { what: String, detail: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("could not understand request; recognized verbs: {}", .suggestions.join(", "))]
    NeedsClarification {
        message: String,
        suggestions: Vec<String>,
    },

    #[error("no applicable method: {0}")]
    NoMethod(String),

    #[error("runtime calibration missing: run the startup probes first")]
    MissingCalibration,

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Input(format!("json: {e}"))
    }
}
