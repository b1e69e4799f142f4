use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::command::{ArtifactRef, DataRole, WorkflowCommand};
use super::ops::{self, dataset_bytes, graph_bytes, json_bytes, Labels};
use super::profile::profile;
use super::recommend::{recommend, Goal};
use super::report::render_report;
use super::store::{content_ref, write_atomic, ArtifactKind, ArtifactStore};
use crate::data::{conform_schema, describe, load_csv, preprocess, Dataset};
use crate::discovery::discover;
use crate::effects::{backdoor_set, estimate_ate_linear};
use crate::graph::{from_json, validate_dag, CausalGraph, Knowledge};
use crate::sim::make_benchmark;
use crate::{Error, Result};

/// Session state visible to a step: what is "current" after it ran.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Context {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<ArtifactRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<ArtifactRef>,
    #[serde(default)]
    pub knowledge: Knowledge,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<ArtifactRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomalies: Option<ArtifactRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<ArtifactRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRef {
    pub name: String,
    pub kind: ArtifactKind,
    #[serde(rename = "ref")]
    pub reference: ArtifactRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub command: WorkflowCommand,
    /// Hash of the command followed by the refs it read.
    pub input_hashes: Vec<String>,
    pub outputs: Vec<OutputRef>,
    pub status: StepStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_ms: f64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub context: Context,
}

impl StepRecord {
    pub fn output(&self, name: &str) -> Option<&OutputRef> {
        self.outputs.iter().find(|o| o.name == name)
    }

    /// The primary output.
    pub fn output_ref(&self) -> Option<&ArtifactRef> {
        self.outputs.first().map(|o| &o.reference)
    }
}

/// Result of [`Session::execute`]: rollback moves the head without a record.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum StepOutcome {
    Recorded(StepRecord),
    Moved { head: u64 },
}

#[derive(Debug, Default)]
struct Inputs {
    raw: Option<Arc<[u8]>>,
    dataset: Option<Dataset>,
    graph: Option<CausalGraph>,
    truth: Option<CausalGraph>,
    anomalies: Option<Dataset>,
    labels: Option<Labels>,
    report: Option<String>,
}

/// A validated command with its inputs loaded. Running it needs no access
/// to the session, so callers may compute without holding a lock.
#[derive(Debug)]
pub struct PreparedStep {
    command: WorkflowCommand,
    parent: Option<u64>,
    context: Context,
    input_hashes: Vec<String>,
    inputs: Inputs,
}

type NamedOutput = (String, ArtifactKind, Vec<u8>);

#[derive(Debug)]
pub struct StepResult {
    command: WorkflowCommand,
    parent: Option<u64>,
    input_hashes: Vec<String>,
    outcome: std::result::Result<(Vec<NamedOutput>, Context), String>,
    parent_context: Context,
    wall_time_ms: f64,
}

impl StepResult {
    pub fn failed(&self) -> bool {
        self.outcome.is_err()
    }
}

/// Append-only step tree with a movable head over a content-addressed store.
#[derive(Debug, Clone, Default)]
pub struct Session {
    store: ArtifactStore,
    journal: Vec<StepRecord>,
    head: Option<u64>,
    dir: Option<PathBuf>,
}

const JOURNAL_FILE: &str = "journal.jsonl";
const HEAD_FILE: &str = "head.json";
const ARTIFACT_DIR: &str = "artifacts";

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Session {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens the session persisted in `dir`, creating an empty one if absent.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let store = ArtifactStore::open(&dir.join(ARTIFACT_DIR))?;
        let mut journal = Vec::new();
        let jpath = dir.join(JOURNAL_FILE);
        if jpath.exists() {
            for (i, line) in fs::read_to_string(&jpath)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: StepRecord = serde_json::from_str(line)
                    .map_err(|e| Error::Io(format!("{}: line {}: {e}", jpath.display(), i + 1)))?;
                journal.push(rec);
            }
        }
        let hpath = dir.join(HEAD_FILE);
        let head = if hpath.exists() {
            let v: serde_json::Value = serde_json::from_slice(&fs::read(&hpath)?)?;
            v["head"].as_u64()
        } else {
            journal.last().map(|r| r.id)
        };
        if let Some(h) = head {
            if !journal.iter().any(|r| r.id == h) {
                return Err(Error::Io(format!("head {h} names no journal record")));
            }
        }
        Ok(Self {
            store,
            journal,
            head,
            dir: Some(dir.to_path_buf()),
        })
    }

    pub fn journal(&self) -> &[StepRecord] {
        &self.journal
    }

    pub fn head(&self) -> Option<u64> {
        self.head
    }

    pub fn record(&self, id: u64) -> Option<&StepRecord> {
        self.journal.iter().find(|r| r.id == id)
    }

    /// Context after the head step.
    pub fn context(&self) -> Context {
        self.head
            .and_then(|h| self.record(h))
            .map(|r| r.context.clone())
            .unwrap_or_default()
    }

    /// Records from the root to the head.
    pub fn chain(&self) -> Vec<&StepRecord> {
        let mut out = Vec::new();
        let mut cur = self.head;
        while let Some(id) = cur {
            let r = self.record(id).expect("parent ids name records");
            out.push(r);
            cur = r.parent_id;
        }
        out.reverse();
        out
    }

    pub fn artifact(&self, r: &str) -> Result<(ArtifactKind, Arc<[u8]>)> {
        self.store.get(r)
    }

    pub fn store(&self) -> &ArtifactStore {
        &self.store
    }

    /// One JSON line per record, in creation order.
    pub fn export_journal(&self) -> String {
        self.journal
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    /// Stores a user upload after checking it parses as `kind`.
    pub fn upload(&mut self, kind: ArtifactKind, bytes: Vec<u8>) -> Result<ArtifactRef> {
        match kind {
            ArtifactKind::Csv => {
                load_csv(&bytes, &Default::default())?;
            }
            ArtifactKind::Graph => {
                from_json(std::str::from_utf8(&bytes).map_err(|e| Error::Input(e.to_string()))?)?;
            }
            ArtifactKind::Labels => {
                serde_json::from_slice::<Labels>(&bytes)?;
            }
            other => {
                return Err(Error::InvalidQuery(format!(
                    "'{}' artifacts are produced by steps, not uploaded",
                    other.name()
                )))
            }
        }
        self.store.put(kind, bytes)
    }

    fn persist_head(&self) -> Result<()> {
        if let Some(dir) = &self.dir {
            write_atomic(
                &dir.join(HEAD_FILE),
                json!({ "head": self.head }).to_string().as_bytes(),
            )?;
        }
        Ok(())
    }

    /// Moves the head to an existing record. Nothing is deleted.
    pub fn rollback(&mut self, step: u64) -> Result<()> {
        if self.record(step).is_none() {
            return Err(Error::NotFound(format!("step {step}")));
        }
        if self.head != Some(step) {
            self.head = Some(step);
            self.persist_head()?;
        }
        Ok(())
    }

    /// Runs one command to completion. Precondition violations are returned
    /// as errors and leave the journal untouched; execution failures are
    /// recorded as failed steps.
    pub fn execute(&mut self, cmd: WorkflowCommand) -> Result<StepOutcome> {
        if let WorkflowCommand::Rollback { step } = cmd {
            self.rollback(step)?;
            return Ok(StepOutcome::Moved { head: step });
        }
        let prepared = self.prepare(cmd)?;
        let result = prepared.run();
        self.commit(result).map(StepOutcome::Recorded)
    }

    fn load<T>(
        &self,
        r: &str,
        kind: ArtifactKind,
        what: &str,
        f: impl FnOnce(&[u8]) -> Result<T>,
    ) -> Result<T> {
        let (k, bytes) = self
            .store
            .get(r)
            .map_err(|_| Error::Precondition(format!("{what} artifact {r} does not exist")))?;
        if k != kind {
            return Err(Error::Precondition(format!(
                "{what} artifact {r} is a {} artifact, expected {}",
                k.name(),
                kind.name()
            )));
        }
        f(&bytes)
    }

    fn load_dataset(&self, r: &str, what: &str) -> Result<Dataset> {
        self.load(r, ArtifactKind::Dataset, what, |b| {
            Ok(serde_json::from_slice(b)?)
        })
    }

    fn load_graph(&self, r: &str, what: &str) -> Result<CausalGraph> {
        self.load(r, ArtifactKind::Graph, what, |b| {
            from_json(std::str::from_utf8(b).map_err(|e| Error::Input(e.to_string()))?)
        })
    }

    /// Validates `cmd` against the current state and loads its inputs.
    pub fn prepare(&self, cmd: WorkflowCommand) -> Result<PreparedStep> {
        cmd.validate()?;
        let ctx = self.context();
        let mut inputs = Inputs::default();
        let mut hashes = vec![content_ref(&serde_json::to_vec(&cmd)?)];
        let mut used = |r: &ArtifactRef| hashes.push(r.clone());
        let need = |r: &Option<ArtifactRef>, what: &str| {
            r.clone()
                .ok_or_else(|| Error::Precondition(format!("{} requires {what}", cmd.name())))
        };
        let dataset_ref = need(&ctx.dataset, "a loaded dataset");
        let graph_ref = need(&ctx.graph, "a causal graph");
        match &cmd {
            WorkflowCommand::LoadData { source, labels, .. } => {
                inputs.raw =
                    Some(self.load(source, ArtifactKind::Csv, "source", |b| Ok(Arc::from(b)))?);
                used(source);
                if let Some(l) = labels {
                    inputs.labels = Some(self.load(l, ArtifactKind::Labels, "labels", |b| {
                        Ok(serde_json::from_slice(b)?)
                    })?);
                    used(l);
                }
            }
            WorkflowCommand::Preprocess { .. } | WorkflowCommand::Describe => {
                let r = dataset_ref?;
                inputs.dataset = Some(self.load_dataset(&r, "dataset")?);
                used(&r);
            }
            WorkflowCommand::SetKnowledge { delta } => {
                let k = ctx.knowledge.apply_delta(delta)?;
                if let Some(r) = &ctx.dataset {
                    k.check_nodes(&self.load_dataset(r, "dataset")?.names())?;
                }
            }
            WorkflowCommand::Discover { .. } => {
                let r = dataset_ref?;
                let ds = self.load_dataset(&r, "dataset")?;
                ctx.knowledge.check_nodes(&ds.names())?;
                inputs.dataset = Some(ds);
                used(&r);
                if let Some(t) = &ctx.truth {
                    inputs.truth = Some(self.load_graph(t, "truth")?);
                    used(t);
                }
            }
            WorkflowCommand::SetGraph { graph } => {
                if let Some(r) = &ctx.dataset {
                    let ds = self.load_dataset(r, "dataset")?;
                    if let Some(n) = graph.nodes().iter().find(|n| ds.column_index(n).is_none()) {
                        return Err(Error::Precondition(format!(
                            "graph node '{n}' is not a dataset column"
                        )));
                    }
                }
            }
            WorkflowCommand::EstimateEffect { treatment, outcome } => {
                let (dr, gr) = (dataset_ref?, graph_ref?);
                let ds = self.load_dataset(&dr, "dataset")?;
                let g = self.load_graph(&gr, "graph")?;
                validate_dag(&g).map_err(|e| {
                    Error::Precondition(format!("effect estimation needs a DAG: {e}"))
                })?;
                for v in [treatment, outcome] {
                    g.require(v)
                        .map_err(|_| Error::Precondition(format!("'{v}' is not in the graph")))?;
                    ds.require_column(v)
                        .map_err(|e| Error::Precondition(e.to_string()))?;
                }
                inputs.dataset = Some(ds);
                inputs.graph = Some(g);
                used(&dr);
                used(&gr);
            }
            WorkflowCommand::RunRca {
                method,
                row,
                target,
                ..
            } => {
                let dr = dataset_ref?;
                let ar = need(
                    &ctx.anomalies,
                    "anomalous data (load_data with role anomalies)",
                )?;
                let ds = self.load_dataset(&dr, "dataset")?;
                let an = self.load_dataset(&ar, "anomalies")?;
                if *row >= an.n_rows() {
                    return Err(Error::Precondition(format!(
                        "row {row} out of range: {} anomalous rows",
                        an.n_rows()
                    )));
                }
                if let Some(t) = target {
                    ds.require_column(t)
                        .map_err(|e| Error::Precondition(e.to_string()))?;
                }
                used(&dr);
                used(&ar);
                if method.needs_graph() {
                    let gr = graph_ref?;
                    let g = self.load_graph(&gr, "graph")?;
                    validate_dag(&g).map_err(|e| {
                        Error::Precondition(format!("{} needs a DAG: {e}", method.name()))
                    })?;
                    inputs.graph = Some(g);
                    used(&gr);
                }
                if let Some(l) = &ctx.labels {
                    inputs.labels = Some(self.load(l, ArtifactKind::Labels, "labels", |b| {
                        Ok(serde_json::from_slice(b)?)
                    })?);
                    used(l);
                }
                inputs.dataset = Some(ds);
                inputs.anomalies = Some(an);
            }
            WorkflowCommand::Simulate { .. } => {}
            WorkflowCommand::Evaluate { truth } => {
                let gr = graph_ref?;
                let tr = match truth {
                    Some(t) => t.clone(),
                    None => need(&ctx.truth, "a ground-truth graph")?,
                };
                inputs.graph = Some(self.load_graph(&gr, "graph")?);
                let t = self.load_graph(&tr, "truth")?;
                validate_dag(&t)
                    .map_err(|e| Error::Precondition(format!("truth must be a DAG: {e}")))?;
                inputs.truth = Some(t);
                used(&gr);
                used(&tr);
            }
            WorkflowCommand::GenerateReport => {
                if self.head.is_none() {
                    return Err(Error::Precondition(
                        "generate_report requires a non-empty journal".into(),
                    ));
                }
                inputs.report = Some(render_report(self)?);
            }
            WorkflowCommand::Rollback { .. } => {
                return Err(Error::InvalidQuery(
                    "rollback moves the head and is not executed as a step".into(),
                ))
            }
        }
        Ok(PreparedStep {
            command: cmd,
            parent: self.head,
            context: ctx,
            input_hashes: hashes,
            inputs,
        })
    }

    /// Appends the record for a finished step and moves the head to it.
    pub fn commit(&mut self, result: StepResult) -> Result<StepRecord> {
        if result.parent != self.head {
            return Err(Error::Precondition(
                "the session head moved while the step ran".into(),
            ));
        }
        let (outputs, context, status, error) = match result.outcome {
            Ok((outs, ctx)) => {
                let mut refs = Vec::with_capacity(outs.len());
                for (name, kind, bytes) in outs {
                    let reference = self.store.put(kind, bytes)?;
                    refs.push(OutputRef {
                        name,
                        kind,
                        reference,
                    });
                }
                (refs, ctx, StepStatus::Ok, None)
            }
            Err(e) => (
                Vec::new(),
                result.parent_context,
                StepStatus::Failed,
                Some(e),
            ),
        };
        let rec = StepRecord {
            id: self.journal.last().map_or(1, |r| r.id + 1),
            parent_id: result.parent,
            command: result.command,
            input_hashes: result.input_hashes,
            outputs,
            status,
            error,
            wall_time_ms: result.wall_time_ms,
            timestamp: now_ms(),
            context,
        };
        if let Some(dir) = &self.dir {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join(JOURNAL_FILE))?;
            writeln!(f, "{}", serde_json::to_string(&rec)?)?;
            f.sync_data()?;
        }
        self.journal.push(rec.clone());
        self.head = Some(rec.id);
        self.persist_head()?;
        Ok(rec)
    }

    /// Re-executes the head's ancestor chain on a fresh in-memory session,
    /// copying uploaded inputs across.
    pub fn replay(&self) -> Result<Session> {
        let mut fresh = Session::in_memory();
        for rec in self.chain() {
            let mut uploads: Vec<&ArtifactRef> = Vec::new();
            match &rec.command {
                WorkflowCommand::LoadData { source, labels, .. } => {
                    uploads.push(source);
                    uploads.extend(labels.iter());
                }
                WorkflowCommand::Evaluate { truth: Some(t) } => uploads.push(t),
                _ => {}
            }
            for r in uploads {
                let (kind, bytes) = self.store.get(r)?;
                fresh.store.put(kind, bytes.to_vec())?;
            }
            fresh.execute(rec.command.clone())?;
        }
        Ok(fresh)
    }

    /// True when replaying the head chain reproduces every status and output hash.
    pub fn verify_replay(&self) -> Result<bool> {
        let fresh = self.replay()?;
        let a = self.chain();
        let b = fresh.chain();
        Ok(a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|(x, y)| x.status == y.status && x.outputs == y.outputs && x.error == y.error))
    }
}

impl PreparedStep {
    pub fn command(&self) -> &WorkflowCommand {
        &self.command
    }

    pub fn run(self) -> StepResult {
        let start = Instant::now();
        let parent_context = self.context.clone();
        let outcome = execute(&self.command, self.context, self.inputs).map_err(|e| e.to_string());
        StepResult {
            command: self.command,
            parent: self.parent,
            input_hashes: self.input_hashes,
            outcome,
            parent_context,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        }
    }
}

type Outputs = Vec<(String, ArtifactKind, Vec<u8>)>;

fn out(name: &str, kind: ArtifactKind, bytes: Vec<u8>) -> (String, ArtifactKind, Vec<u8>) {
    (name.into(), kind, bytes)
}

fn execute(cmd: &WorkflowCommand, mut ctx: Context, inp: Inputs) -> Result<(Outputs, Context)> {
    let mut outs: Outputs = Vec::new();
    match cmd {
        WorkflowCommand::LoadData {
            role,
            labels,
            hints,
            categorical_threshold,
            ..
        } => {
            let mut ds = load_csv(inp.raw.as_deref().expect("prepared"), hints)?;
            if let Some(t) = categorical_threshold {
                ds = conform_schema(&ds, *t)?;
            }
            let bytes = dataset_bytes(&ds);
            let r = content_ref(&bytes);
            match role {
                DataRole::Primary => {
                    outs.push(out("dataset", ArtifactKind::Dataset, bytes));
                    ctx.dataset = Some(r);
                    ctx.graph = None;
                    ctx.anomalies = None;
                    ctx.labels = None;
                }
                DataRole::Anomalies => {
                    outs.push(out("anomalies", ArtifactKind::Dataset, bytes));
                    ctx.anomalies = Some(r);
                    ctx.labels = labels.clone();
                }
            }
        }
        WorkflowCommand::Preprocess { plan } => {
            let ds = preprocess(inp.dataset.as_ref().expect("prepared"), plan)?;
            let bytes = dataset_bytes(&ds);
            ctx.dataset = Some(content_ref(&bytes));
            outs.push(out("dataset", ArtifactKind::Dataset, bytes));
        }
        WorkflowCommand::Describe => {
            let ds = inp.dataset.as_ref().expect("prepared");
            let p = profile(ds);
            let rec = |goal| match recommend(&p, goal, ctx.graph.is_some()) {
                Ok(r) => json!(r),
                Err(e) => json!({ "error": e.to_string() }),
            };
            let recs = json!({
                "graph": rec(Goal::Graph),
                "rca": rec(Goal::Rca),
                "effect": rec(Goal::Effect),
            });
            outs.push(out("profile", ArtifactKind::Profile, json_bytes(&p)));
            outs.push(out("eda", ArtifactKind::Eda, json_bytes(&describe(ds))));
            outs.push(out(
                "recommendations",
                ArtifactKind::Recommendations,
                json_bytes(&recs),
            ));
        }
        WorkflowCommand::SetKnowledge { delta } => {
            ctx.knowledge = ctx.knowledge.apply_delta(delta)?;
            outs.push(out(
                "knowledge",
                ArtifactKind::Knowledge,
                json_bytes(&ctx.knowledge),
            ));
        }
        WorkflowCommand::Discover { algorithm, params } => {
            let ds = inp.dataset.as_ref().expect("prepared");
            let res = discover(ds, *algorithm, params, &ctx.knowledge)?;
            let evaluation = match &inp.truth {
                Some(t) => Some(ops::evaluate_graph(&res.graph, &validate_dag(t)?)?),
                None => None,
            };
            let summary = json!({
                "algorithm": algorithm,
                "params": params,
                "knowledge": ctx.knowledge,
                "n_edges": res.graph.n_edges(),
                "converged": res.converged,
                "h": res.h,
                "causal_order": res.causal_order,
                "evaluation": evaluation,
            });
            let bytes = graph_bytes(&res.graph);
            ctx.graph = Some(content_ref(&bytes));
            outs.push(out("graph", ArtifactKind::Graph, bytes));
            outs.push(out(
                "discovery",
                ArtifactKind::Discovery,
                json_bytes(&summary),
            ));
        }
        WorkflowCommand::SetGraph { graph } => {
            let bytes = graph_bytes(graph);
            ctx.graph = Some(content_ref(&bytes));
            outs.push(out("graph", ArtifactKind::Graph, bytes));
        }
        WorkflowCommand::EstimateEffect { treatment, outcome } => {
            let dag = validate_dag(inp.graph.as_ref().expect("prepared"))?;
            let z = backdoor_set(&dag, treatment, outcome)?;
            let est = estimate_ate_linear(
                inp.dataset.as_ref().expect("prepared"),
                treatment,
                outcome,
                &z,
            )?;
            outs.push(out("effect", ArtifactKind::Effect, json_bytes(&est)));
        }
        WorkflowCommand::RunRca {
            method,
            row,
            target,
            params,
        } => {
            let dag = inp.graph.as_ref().map(validate_dag).transpose()?;
            let res = ops::run_rca(
                inp.dataset.as_ref().expect("prepared"),
                inp.anomalies.as_ref().expect("prepared"),
                dag.as_ref(),
                *method,
                *row,
                target.as_deref(),
                params,
                inp.labels.as_ref(),
            )?;
            outs.push(out("ranking", ArtifactKind::Ranking, json_bytes(&res)));
        }
        WorkflowCommand::Simulate {
            graph,
            mechanism,
            intervention,
            n_normal,
        } => {
            let case = make_benchmark(graph, mechanism, intervention, *n_normal)?;
            let labels: Labels = case.labels.iter().cloned().enumerate().collect();
            let normal = dataset_bytes(&case.normal);
            let truth = graph_bytes(case.scm.weighted_graph());
            let anomalies = dataset_bytes(&case.anomalies);
            let labels = json_bytes(&labels);
            ctx.dataset = Some(content_ref(&normal));
            ctx.truth = Some(content_ref(&truth));
            ctx.anomalies = Some(content_ref(&anomalies));
            ctx.labels = Some(content_ref(&labels));
            ctx.graph = None;
            outs.push(out("dataset", ArtifactKind::Dataset, normal));
            outs.push(out("truth", ArtifactKind::Graph, truth));
            outs.push(out("anomalies", ArtifactKind::Dataset, anomalies));
            outs.push(out("labels", ArtifactKind::Labels, labels));
            outs.push(out("meta", ArtifactKind::Benchmark, json_bytes(&case.meta)));
        }
        WorkflowCommand::Evaluate { truth } => {
            let t = validate_dag(inp.truth.as_ref().expect("prepared"))?;
            let ev = ops::evaluate_graph(inp.graph.as_ref().expect("prepared"), &t)?;
            if let Some(r) = truth {
                ctx.truth = Some(r.clone());
            }
            outs.push(out("evaluation", ArtifactKind::Evaluation, json_bytes(&ev)));
        }
        WorkflowCommand::GenerateReport => {
            outs.push(out(
                "report",
                ArtifactKind::Report,
                inp.report.expect("prepared").into_bytes(),
            ));
        }
        WorkflowCommand::Rollback { .. } => unreachable!("rollback is not prepared"),
    }
    Ok((outs, ctx))
}
