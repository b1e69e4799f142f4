//! Batch driver: simulate bundles, learn graphs, rank root causes, estimate
//! effects, benchmark and report. [`run`] returns the process exit code.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use causalwb::data::{load_csv, Dataset};
use causalwb::discovery::{discover, DiscoveryParams, Method};
use causalwb::effects::{backdoor_set, estimate_ate_linear};
use causalwb::graph::{from_json, to_json, validate_dag, Dag};
use causalwb::rca::{run_benchmark, BenchMethod, Search, BENCH_CSV_HEADER};
use causalwb::sim::{
    make_benchmark, read_bundle, write_bundle, GraphSpec, InterventionMode, MechanismForm,
    MechanismSpec, NoiseKind, TargetCount,
};
use causalwb::workflow::ops::{evaluate_graph, run_rca, Labels};
use causalwb::workflow::{
    bundle_pipeline, default_intervention, parse_intent, ArtifactKind, BundleRefs, RcaMethod,
    RcaParams, Session, StepOutcome, StepRecord, StepStatus, DEFAULT_SEED,
};
use clap::{Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] causalwb::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

const GRAMMAR: &str = "\
Session commands (server steps, journal entries) are JSON objects tagged by
\"command\": load_data, preprocess, describe, set_knowledge, discover,
set_graph, estimate_effect, run_rca, simulate, evaluate, rollback,
generate_report.

Text grammar (chat endpoint without a configured model, and `causalwb intent`):
the first verb found selects the command; key=value pairs set parameters.
  load <ref> [role=primary|anomalies] [labels=<ref>] [threshold=N]
  clean [impute=mean|median|mode|drop] [encode=codes|onehot]
        [scale=zscore|robust|minmax|none] [drop_column=F] [drop_row=F]
  describe
  discover pc|ges|notears|direct_lingam [alpha=A] [depth=N] [lambda1=L]
        [w_threshold=T] [seed=S]
  forbid A -> B        require A -> B
  rca traversal|counterfactual|cholesky [row=N] [target=X] [tau=T] [k=K]
        [search=exhaustive|greedy] [score=robust-z|tail-logprob] [mc=N] [seed=S]
  effect of T on Y     effect T -> Y
  simulate [model=er|sf] [d=N] [degree=K] [m=M] [n=N] [seed=S] [magnitude=M]
        [anomalies=N] [targets=K] [mode=soft|hard] [form=linear|nonlinear]
        [noise=gaussian|uniform|gumbel]
  undo <step>
  report

Exit codes: 0 success, 1 usage error, 2 runtime error.";

#[derive(Parser, Debug)]
#[command(name = "causalwb", version, about = "Causal analysis workbench", after_long_help = GRAMMAR)]
struct Cli {
    /// Suppress progress lines; results are still printed.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Emit a benchmark bundle: meta.json, graph.json, normal.csv, anomalies.csv, labels.json.
    Simulate(SimulateArgs),
    /// Learn a graph from a CSV; prints `shd=K normalized=V` when a truth graph is given.
    Discover(DiscoverArgs),
    /// Rank root causes of one anomalous row.
    Rca(RcaArgs),
    /// Estimate a linear average treatment effect adjusting for the treatment's parents.
    Effect(EffectArgs),
    /// Run methods over every bundle in a directory and write a metrics CSV.
    Bench(BenchArgs),
    /// Run the standard pipeline over a bundle in a persistent session and write its report.
    Report(ReportArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Translate one line of text into a session command (JSON on stdout).
    Intent {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, required = true)]
        text: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Model {
    Er,
    Sf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Form {
    Linear,
    Nonlinear,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Noise {
    Gaussian,
    Uniform,
    Gumbel,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Soft,
    Hard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Algo {
    Pc,
    Ges,
    Notears,
    #[value(aliases = ["lingam", "direct_lingam"])]
    DirectLingam,
}

impl From<Algo> for Method {
    fn from(a: Algo) -> Method {
        match a {
            Algo::Pc => Method::Pc,
            Algo::Ges => Method::Ges,
            Algo::Notears => Method::Notears,
            Algo::DirectLingam => Method::DirectLingam,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RcaAlgo {
    Traversal,
    Counterfactual,
    Cholesky,
}

impl From<RcaAlgo> for RcaMethod {
    fn from(a: RcaAlgo) -> RcaMethod {
        match a {
            RcaAlgo::Traversal => RcaMethod::Traversal,
            RcaAlgo::Counterfactual => RcaMethod::Counterfactual,
            RcaAlgo::Cholesky => RcaMethod::Cholesky,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SearchArg {
    Exhaustive,
    Greedy,
}

#[derive(clap::Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "er")]
    model: Model,
    #[arg(long, default_value_t = 6)]
    d: usize,
    /// Expected degree (ER).
    #[arg(long, default_value_t = 2.0)]
    degree: f64,
    /// Edges per new node (SF).
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Normal samples.
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "linear")]
    form: Form,
    #[arg(long, value_enum, default_value = "gaussian")]
    noise: Noise,
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    #[arg(long, value_enum, default_value = "soft")]
    mode: Mode,
    /// Root causes per anomalous row.
    #[arg(long, default_value_t = 1)]
    targets: usize,
    /// Intervention size in noise standard deviations.
    #[arg(long, default_value_t = causalwb::workflow::DEFAULT_MAGNITUDE)]
    magnitude: f64,
    #[arg(long, default_value_t = causalwb::workflow::DEFAULT_ANOMALIES)]
    anomalies: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct DiscoverArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    #[arg(long)]
    data: PathBuf,
    /// Ground-truth graph JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    max_cond_set: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.3)]
    w_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write the graph JSON here; printed to stdout when neither this nor --truth is given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct RcaArgs {
    #[arg(long, value_enum)]
    method: RcaAlgo,
    /// Bundle directory; supplies normal, anomalies, graph and labels.
    #[arg(long, conflicts_with_all = ["normal", "anomalies"])]
    bundle: Option<PathBuf>,
    #[arg(long, requires = "anomalies")]
    normal: Option<PathBuf>,
    #[arg(long)]
    anomalies: Option<PathBuf>,
    /// Graph JSON; overrides the bundle's graph.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Labels JSON: row index to root-cause list.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    row: usize,
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = causalwb::rca::DEFAULT_TAU)]
    tau: f64,
    #[arg(long, value_enum, default_value = "exhaustive")]
    search: SearchArg,
    #[arg(long)]
    monte_carlo: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct EffectArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    treatment: String,
    #[arg(long)]
    outcome: String,
}

#[derive(clap::Args, Debug)]
struct BenchArgs {
    /// A bundle directory or a directory of bundle directories.
    #[arg(long)]
    cases: PathBuf,
    /// Comma-separated: traversal, counterfactual, cholesky.
    #[arg(long, default_value = "traversal,counterfactual,cholesky")]
    methods: String,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value = "metrics.csv")]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Session directory; must not already hold a journal.
    #[arg(long)]
    session: PathBuf,
    #[arg(long, value_enum, default_value = "pc")]
    algo: Algo,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Also copy the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long)]
    data_dir: PathBuf,
    /// `user:token[:ro]` entries separated by commas.
    #[arg(long, env = "CAUSALWB_TOKENS", hide_env_values = true)]
    tokens: String,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(long)]
    no_calibrate: bool,
}

/// Parses `argv` (including the program name) and runs one subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.cmd, cli.quiet) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Cmd, quiet: bool) -> CliResult<()> {
    let progress = |line: String| {
        if !quiet {
            println!("{line}");
        }
    };
    match cmd {
        Cmd::Simulate(a) => simulate(a, progress),
        Cmd::Discover(a) => discover_cmd(a),
        Cmd::Rca(a) => rca(a),
        Cmd::Effect(a) => effect(a),
        Cmd::Bench(a) => bench(a, progress),
        Cmd::Report(a) => report(a, progress),
        Cmd::Serve(a) => serve(a),
        Cmd::Intent { text } => {
            let cmd = parse_intent(&text.join(" "))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&cmd).expect("command serializes")
            );
            Ok(())
        }
    }
}

fn read_csv(path: &Path) -> CliResult<Dataset> {
    Ok(load_csv(&fs::read(path)?, &BTreeMap::new())?)
}

fn read_graph(path: &Path) -> CliResult<causalwb::graph::CausalGraph> {
    Ok(from_json(&fs::read_to_string(path)?)?)
}

fn read_dag(path: &Path) -> CliResult<Dag> {
    Ok(validate_dag(&read_graph(path)?)?)
}

/// Writes through a temporary file so readers never see partial output.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
            Ok(())
        }
    }
}

fn simulate(a: SimulateArgs, progress: impl Fn(String)) -> CliResult<()> {
    let graph = match a.model {
        Model::Er => GraphSpec::erdos_renyi(a.d, a.degree, a.seed),
        Model::Sf => GraphSpec::scale_free(a.d, a.m, a.seed),
    };
    let mechanism = MechanismSpec {
        form: match a.form {
            Form::Linear => MechanismForm::Linear,
            Form::Nonlinear => MechanismForm::Nonlinear,
        },
        noise: match a.noise {
            Noise::Gaussian => NoiseKind::Gaussian,
            Noise::Uniform => NoiseKind::Uniform,
            Noise::Gumbel => NoiseKind::Gumbel,
        },
        noise_scale: a.noise_scale,
        ..MechanismSpec::default()
    };
    let mut intervention = default_intervention(a.seed);
    intervention.mode = match a.mode {
        Mode::Soft => InterventionMode::Soft,
        Mode::Hard => InterventionMode::Hard,
    };
    intervention.targets = if a.targets == 1 {
        TargetCount::Single
    } else {
        TargetCount::Multiple(a.targets)
    };
    intervention.magnitude = a.magnitude;
    intervention.n_anomalies = a.anomalies;
    let case = make_benchmark(&graph, &mechanism, &intervention, a.n)?;
    write_bundle(&case, &a.out)?;
    progress(format!(
        "wrote {} ({} nodes, {} edges, {} normal rows, {} anomalies)",
        a.out.display(),
        case.scm.n_nodes(),
        case.scm.dag().graph().n_edges(),
        case.normal.n_rows(),
        case.anomalies.n_rows()
    ));
    Ok(())
}

fn discover_cmd(a: DiscoverArgs) -> CliResult<()> {
    let ds = read_csv(&a.data)?;
    let params = DiscoveryParams {
        alpha: a.alpha,
        max_cond_set: a.max_cond_set,
        lambda1: a.lambda1,
        w_threshold: a.w_threshold,
        seed: a.seed,
    };
    let res = discover(&ds, a.algo.into(), &params, &Default::default())?;
    if let Some(c) = res.converged.filter(|c| !c) {
        eprintln!(
            "warning: optimizer did not converge (converged={c}, h={:?})",
            res.h
        );
    }
    let json = to_json(&res.graph);
    if let Some(p) = &a.out {
        write_atomic(p, json.as_bytes())?;
    }
    if let Some(p) = &a.dot {
        write_atomic(p, causalwb::graph::to_dot(&res.graph).as_bytes())?;
    }
    match &a.truth {
        Some(t) => {
            let ev = evaluate_graph(&res.graph, &read_dag(t)?)?;
            // Constraint and score methods identify an equivalence class.
            let s = if matches!(a.algo, Algo::Pc | Algo::Ges) {
                ev.cpdag
            } else {
                ev.dag
            };
            println!("shd={} normalized={:.4}", s.shd, s.normalized);
        }
        None if a.out.is_none() => println!("{json}"),
        None => {}
    }
    Ok(())
}

fn rca(a: RcaArgs) -> CliResult<()> {
    let (normal, anomalies, mut graph, mut labels) = match (&a.bundle, &a.normal, &a.anomalies) {
        (Some(b), _, _) => {
            let case = read_bundle(b)?;
            let labels: Labels = case.labels.iter().cloned().enumerate().collect();
            (
                case.normal,
                case.anomalies,
                Some(case.scm.dag().clone()),
                Some(labels),
            )
        }
        (None, Some(n), Some(an)) => (read_csv(n)?, read_csv(an)?, None, None),
        _ => {
            return Err(CliError::Usage(
                "give --bundle, or --normal and --anomalies".into(),
            ))
        }
    };
    if let Some(g) = &a.graph {
        graph = Some(read_dag(g)?);
    }
    if let Some(l) = &a.labels {
        labels = Some(serde_json::from_slice(&fs::read(l)?).map_err(causalwb::Error::from)?);
    }
    let params = RcaParams {
        tau: a.tau,
        search: match a.search {
            SearchArg::Exhaustive => Search::Exhaustive,
            SearchArg::Greedy => Search::Greedy,
        },
        seed: a.seed,
        monte_carlo: a.monte_carlo,
        k: a.k,
        ..RcaParams::default()
    };
    let out = run_rca(
        &normal,
        &anomalies,
        graph.as_ref(),
        a.method.into(),
        a.row,
        a.target.as_deref(),
        &params,
        labels.as_ref(),
    )?;
    emit(
        a.out.as_deref(),
        &serde_json::to_string_pretty(&out).expect("outcome serializes"),
    )
}

fn effect(a: EffectArgs) -> CliResult<()> {
    let ds = read_csv(&a.data)?;
    let g = read_dag(&a.graph)?;
    let z = backdoor_set(&g, &a.treatment, &a.outcome)?;
    let est = estimate_ate_linear(&ds, &a.treatment, &a.outcome, &z)?;
    emit(
        None,
        &serde_json::to_string_pretty(&est).expect("estimate serializes"),
    )
}

fn parse_methods(s: &str) -> CliResult<Vec<BenchMethod>> {
    s.split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(|m| {
            BenchMethod::ALL
                .into_iter()
                .find(|b| b.name() == m)
                .ok_or_else(|| {
                    CliError::Usage(format!(
                        "unknown method '{m}'; use traversal, counterfactual, cholesky"
                    ))
                })
        })
        .collect::<CliResult<Vec<_>>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(CliError::Usage("--methods is empty".into()))
            } else {
                Ok(v)
            }
        })
}

/// Bundle directories under `root`, sorted by name; `root` itself if it is one.
fn bundle_dirs(root: &Path) -> CliResult<Vec<(String, PathBuf)>> {
    if root.join("meta.json").is_file() {
        let name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "case".into());
        return Ok(vec![(name, root.to_path_buf())]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(root)? {
        let p = entry?.path();
        if p.join("meta.json").is_file() {
            out.push((
                p.file_name()
                    .expect("dir entry has a name")
                    .to_string_lossy()
                    .into_owned(),
                p,
            ));
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!(
            "no bundles found under {}",
            root.display()
        )));
    }
    out.sort();
    Ok(out)
}

fn bench(a: BenchArgs, progress: impl Fn(String)) -> CliResult<()> {
    let methods = parse_methods(&a.methods)?;
    let dirs = bundle_dirs(&a.cases)?;
    let results: Vec<CliResult<Vec<String>>> = std::thread::scope(|s| {
        let handles: Vec<_> = dirs
            .iter()
            .map(|(name, dir)| {
                let methods = &methods;
                s.spawn(move || -> CliResult<Vec<String>> {
                    let case = read_bundle(dir)?;
                    let (rows, _) = run_benchmark(&case, name, methods, a.k)?;
                    Ok(rows.iter().map(|r| r.csv_line()).collect())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("bench worker panicked"))
            .collect()
    });
    let mut csv = String::from(BENCH_CSV_HEADER);
    csv.push('\n');
    for r in results {
        for line in r? {
            csv.push_str(&line);
            csv.push('\n');
        }
    }
    write_atomic(&a.out, csv.as_bytes())?;
    progress(format!(
        "wrote {} ({} cases x {} methods)",
        a.out.display(),
        dirs.len(),
        methods.len()
    ));
    Ok(())
}

/// Uploads a bundle into `session` and runs the standard pipeline; returns
/// the new records in order.
pub fn run_bundle_pipeline(
    session: &mut Session,
    bundle: &Path,
    algorithm: Method,
    seed: u64,
) -> causalwb::Result<Vec<StepRecord>> {
    let read = |f: &str| fs::read(bundle.join(f));
    let refs = BundleRefs {
        normal: session.upload(ArtifactKind::Csv, read("normal.csv")?)?,
        anomalies: session.upload(ArtifactKind::Csv, read("anomalies.csv")?)?,
        labels: session.upload(ArtifactKind::Labels, read("labels.json")?)?,
        truth: session.upload(ArtifactKind::Graph, read("graph.json")?)?,
    };
    let truth = from_json(&fs::read_to_string(bundle.join("graph.json"))?)?;
    let mut records = Vec::new();
    for cmd in bundle_pipeline(&refs, &truth, algorithm, seed) {
        if let StepOutcome::Recorded(rec) = session.execute(cmd)? {
            records.push(rec);
        }
    }
    Ok(records)
}

fn report(a: ReportArgs, progress: impl Fn(String)) -> CliResult<()> {
    let mut session = Session::open(&a.session)?;
    if !session.journal().is_empty() {
        return Err(CliError::Usage(format!(
            "{} already holds a journal",
            a.session.display()
        )));
    }
    let records = run_bundle_pipeline(&mut session, &a.bundle, a.algo.into(), a.seed)?;
    for rec in &records {
        let status = match rec.status {
            StepStatus::Ok => "ok".to_string(),
            StepStatus::Failed => format!("failed: {}", rec.error.as_deref().unwrap_or("")),
        };
        progress(format!("step {} {} {status}", rec.id, rec.command.name()));
    }
    let rec = records.last().expect("pipeline records steps");
    let r = rec
        .output("report")
        .ok_or_else(|| causalwb::Error::Precondition("pipeline ended without a report".into()))?;
    let (_, bytes) = session.artifact(&r.reference)?;
    let path = a.out.unwrap_or_else(|| a.session.join("report.md"));
    write_atomic(&path, &bytes)?;
    progress(format!("report {} -> {}", r.reference, path.display()));
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult<()> {
    let tokens = causalwb_server::parse_token_spec(&a.tokens).map_err(CliError::Usage)?;
    if tokens.is_empty() {
        return Err(CliError::Usage("at least one token is required".into()));
    }
    let mut cfg = causalwb_server::ServerConfig::new(&a.data_dir, tokens);
    cfg.workers = a.workers.max(1);
    cfg.calibrate = !a.no_calibrate;
    cfg.chat = causalwb_server::ChatConfig::from_env();
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(causalwb_server::serve(cfg, a.addr))?;
    Ok(())
}
