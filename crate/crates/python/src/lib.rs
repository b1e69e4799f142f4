//! Python bindings. Structured results cross the boundary as Python objects
//! decoded from the same JSON the service and CLI produce.

use std::collections::{BTreeMap, BTreeSet};

use causalwb::data::{load_csv, Dataset};
use causalwb::discovery::{discover as run_discover, DiscoveryParams, Method};
use causalwb::effects::{backdoor_set, estimate_ate_linear};
use causalwb::graph::{from_json, shd, to_cpdag, to_dot, to_json, validate_dag, CausalGraph};
use causalwb::rca::rank_metrics as core_rank_metrics;
use causalwb::sim::{make_benchmark, GraphSpec, MechanismSpec};
use causalwb::workflow::ops::{run_rca, Labels};
use causalwb::workflow::{
    default_intervention, parse_intent as core_parse_intent, profile, ArtifactKind, RcaMethod,
    RcaParams, Session as CoreSession, StepOutcome, WorkflowCommand,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

pyo3::create_exception!(causalwb, CausalError, PyValueError);

fn err(e: causalwb::Error) -> PyErr {
    CausalError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Accepts a JSON string or any object `json.dumps` can encode.
fn json_text(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.extract::<String>() {
        return Ok(s);
    }
    obj.py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()
}

#[pyclass(name = "Dataset", module = "causalwb", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_csv(text.as_bytes(), &BTreeMap::new()).map_err(err)?,
        })
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names()
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// Row-major values; missing cells are NaN.
    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.inner.n_rows())
            .map(|r| {
                (0..self.inner.n_cols())
                    .map(|c| self.inner.get(r, c).unwrap_or(f64::NAN))
                    .collect()
            })
            .collect()
    }

    fn profile<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &profile(&self.inner))
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} rows x {} cols)",
            self.inner.n_rows(),
            self.inner.n_cols()
        )
    }
}

#[pyclass(name = "Graph", module = "causalwb", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGraph {
    inner: CausalGraph,
}

#[pymethods]
impl PyGraph {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        to_json(&self.inner)
    }

    fn to_dot(&self) -> String {
        to_dot(&self.inner)
    }

    #[getter]
    fn nodes(&self) -> Vec<String> {
        self.inner.nodes().to_vec()
    }

    /// `(from, to, kind)` triples.
    fn edges(&self) -> Vec<(String, String, String)> {
        self.inner
            .edges()
            .iter()
            .map(|e| {
                let kind = serde_json::to_value(e.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from));
                (
                    self.inner.label(e.from).to_string(),
                    self.inner.label(e.to).to_string(),
                    kind.unwrap_or_default(),
                )
            })
            .collect()
    }

    fn is_dag(&self) -> bool {
        validate_dag(&self.inner).is_ok()
    }

    fn cpdag(&self) -> PyResult<Self> {
        let dag = validate_dag(&self.inner).map_err(err)?;
        Ok(Self {
            inner: to_cpdag(&dag),
        })
    }

    /// `(shd, normalized)` against another graph over the same nodes.
    fn shd(&self, other: &PyGraph) -> PyResult<(usize, f64)> {
        let s = shd(&self.inner, &other.inner).map_err(err)?;
        Ok((s.shd, s.normalized))
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph({} nodes, {} edges)",
            self.inner.n_nodes(),
            self.inner.n_edges()
        )
    }
}

#[pyclass(name = "Benchmark", module = "causalwb", frozen)]
pub struct PyBenchmark {
    #[pyo3(get)]
    normal: PyDataset,
    #[pyo3(get)]
    anomalies: PyDataset,
    #[pyo3(get)]
    truth: PyGraph,
    #[pyo3(get)]
    labels: Vec<Vec<String>>,
}

#[pyfunction]
#[pyo3(signature = (d, n, seed=7, model="er", degree=2.0, m=1, magnitude=5.0, anomalies=20))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    d: usize,
    n: usize,
    seed: u64,
    model: &str,
    degree: f64,
    m: usize,
    magnitude: f64,
    anomalies: usize,
) -> PyResult<PyBenchmark> {
    let graph = match model {
        "er" => GraphSpec::erdos_renyi(d, degree, seed),
        "sf" => GraphSpec::scale_free(d, m, seed),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown model '{other}'; use er or sf"
            )))
        }
    };
    let mut iv = default_intervention(seed);
    iv.magnitude = magnitude;
    iv.n_anomalies = anomalies;
    let case = make_benchmark(&graph, &MechanismSpec::default(), &iv, n).map_err(err)?;
    Ok(PyBenchmark {
        normal: PyDataset { inner: case.normal },
        anomalies: PyDataset {
            inner: case.anomalies,
        },
        truth: PyGraph {
            inner: case.scm.weighted_graph().clone(),
        },
        labels: case.labels,
    })
}

#[pyfunction]
#[pyo3(signature = (data, algorithm="pc", alpha=0.05, lambda1=0.1, w_threshold=0.3, seed=0))]
fn discover(
    data: &PyDataset,
    algorithm: &str,
    alpha: f64,
    lambda1: f64,
    w_threshold: f64,
    seed: u64,
) -> PyResult<PyGraph> {
    let method = Method::parse(algorithm)
        .ok_or_else(|| PyValueError::new_err(format!("unknown algorithm '{algorithm}'")))?;
    let params = DiscoveryParams {
        alpha,
        lambda1,
        w_threshold,
        seed,
        ..DiscoveryParams::default()
    };
    let res = run_discover(&data.inner, method, &params, &Default::default()).map_err(err)?;
    Ok(PyGraph { inner: res.graph })
}

#[pyfunction]
#[pyo3(signature = (normal, anomalies, method, row=0, graph=None, target=None, labels=None))]
#[allow(clippy::too_many_arguments)]
fn rca<'py>(
    py: Python<'py>,
    normal: &PyDataset,
    anomalies: &PyDataset,
    method: &str,
    row: usize,
    graph: Option<&PyGraph>,
    target: Option<&str>,
    labels: Option<Vec<Vec<String>>>,
) -> PyResult<Bound<'py, PyAny>> {
    let method = match method {
        "traversal" => RcaMethod::Traversal,
        "counterfactual" => RcaMethod::Counterfactual,
        "cholesky" => RcaMethod::Cholesky,
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    let dag = graph
        .map(|g| validate_dag(&g.inner))
        .transpose()
        .map_err(err)?;
    let labels: Option<Labels> = labels.map(|l| l.into_iter().enumerate().collect());
    let out = run_rca(
        &normal.inner,
        &anomalies.inner,
        dag.as_ref(),
        method,
        row,
        target,
        &RcaParams::default(),
        labels.as_ref(),
    )
    .map_err(err)?;
    to_py(py, &out)
}

#[pyfunction]
fn estimate_effect<'py>(
    py: Python<'py>,
    data: &PyDataset,
    graph: &PyGraph,
    treatment: &str,
    outcome: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let dag = validate_dag(&graph.inner).map_err(err)?;
    let z = backdoor_set(&dag, treatment, outcome).map_err(err)?;
    to_py(
        py,
        &estimate_ate_linear(&data.inner, treatment, outcome, &z).map_err(err)?,
    )
}

#[pyfunction]
fn rank_metrics<'py>(
    py: Python<'py>,
    ranking: Vec<String>,
    truth: Vec<String>,
    k: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let truth: BTreeSet<String> = truth.into_iter().collect();
    to_py(py, &core_rank_metrics(&ranking, &truth, k).map_err(err)?)
}

#[pyfunction]
fn parse_intent<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &core_parse_intent(text).map_err(err)?)
}

/// A journaled analysis session, in memory or persisted to a directory.
#[pyclass(name = "Session", module = "causalwb")]
pub struct PySession {
    inner: CoreSession,
}

#[pymethods]
impl PySession {
    #[new]
    #[pyo3(signature = (path=None))]
    fn new(path: Option<std::path::PathBuf>) -> PyResult<Self> {
        let inner = match path {
            Some(p) => CoreSession::open(&p).map_err(err)?,
            None => CoreSession::in_memory(),
        };
        Ok(Self { inner })
    }

    /// Stores raw bytes as `csv`, `graph` or `labels`; returns the content ref.
    fn upload(&mut self, kind: &str, data: &[u8]) -> PyResult<String> {
        let kind = ArtifactKind::parse(kind)
            .ok_or_else(|| PyValueError::new_err(format!("unknown kind '{kind}'")))?;
        self.inner.upload(kind, data.to_vec()).map_err(err)
    }

    /// Runs one command (JSON text or dict) and returns its journal record.
    fn execute<'py>(
        &mut self,
        py: Python<'py>,
        command: &Bound<'py, PyAny>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cmd: WorkflowCommand = serde_json::from_str(&json_text(command)?)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        match self.inner.execute(cmd).map_err(err)? {
            StepOutcome::Recorded(rec) => to_py(py, &rec),
            StepOutcome::Moved { head } => to_py(py, &serde_json::json!({ "head": head })),
        }
    }

    fn rollback(&mut self, step: u64) -> PyResult<()> {
        self.inner.rollback(step).map_err(err)
    }

    #[getter]
    fn head(&self) -> Option<u64> {
        self.inner.head()
    }

    fn journal<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.journal())
    }

    fn context<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.context())
    }

    fn artifact<'py>(&self, py: Python<'py>, reference: &str) -> PyResult<Bound<'py, PyBytes>> {
        let (_, bytes) = self.inner.artifact(reference).map_err(err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    fn report(&self) -> PyResult<String> {
        causalwb::workflow::render_report(&self.inner).map_err(err)
    }

    fn verify_replay(&self) -> PyResult<bool> {
        self.inner.verify_replay().map_err(err)
    }
}

#[pymodule]
#[pyo3(name = "causalwb")]
fn causalwb_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CausalError", m.py().get_type::<CausalError>())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyBenchmark>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(discover, m)?)?;
    m.add_function(wrap_pyfunction!(rca, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_effect, m)?)?;
    m.add_function(wrap_pyfunction!(rank_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(parse_intent, m)?)?;
    Ok(())
}
