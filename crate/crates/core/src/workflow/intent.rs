use std::collections::BTreeMap;

use super::command::{DataRole, RcaMethod, RcaParams, WorkflowCommand};
use crate::data::{Encoding, Imputation, PreprocessPlan, Scaler};
use crate::discovery::{DiscoveryParams, Method};
use crate::graph::KnowledgeDelta;
use crate::rca::{AnomalyMethod, Search};
use crate::sim::{
    derive_seed, GraphSpec, InterventionMode, InterventionSpec, MechanismForm, MechanismSpec,
    NoiseKind, TargetCount,
};
use crate::{Error, Result};

pub const VERBS: [&str; 11] = [
    "load", "clean", "describe", "discover", "forbid", "require", "rca", "effect", "simulate",
    "undo", "report",
];

/// Defaults shared by the text grammar and the batch driver.
pub const DEFAULT_MAGNITUDE: f64 = 5.0;
pub const DEFAULT_ANOMALIES: usize = 20;
pub const DEFAULT_SEED: u64 = 7;

/// Anomaly-injection spec whose seed is derived from the case seed.
pub fn default_intervention(seed: u64) -> InterventionSpec {
    InterventionSpec {
        mode: InterventionMode::Soft,
        targets: TargetCount::Single,
        magnitude: DEFAULT_MAGNITUDE,
        n_anomalies: DEFAULT_ANOMALIES,
        seed: derive_seed(seed, 3),
    }
}

fn clarify(message: impl Into<String>) -> Error {
    Error::NeedsClarification {
        message: message.into(),
        suggestions: VERBS.iter().map(|v| v.to_string()).collect(),
    }
}

struct Words {
    /// Free tokens, original case.
    free: Vec<String>,
    kv: BTreeMap<String, String>,
}

impl Words {
    fn lower(&self) -> Vec<String> {
        self.free.iter().map(|t| t.to_ascii_lowercase()).collect()
    }

    fn take<T: std::str::FromStr>(&self, keys: &[&str]) -> Result<Option<T>> {
        for k in keys {
            if let Some(v) = self.kv.get(*k) {
                return v
                    .parse()
                    .map(Some)
                    .map_err(|_| clarify(format!("could not read {k}={v}")));
            }
        }
        Ok(None)
    }

    fn text(&self, keys: &[&str]) -> Option<String> {
        keys.iter().find_map(|k| self.kv.get(*k).cloned())
    }

    fn arrow(&self) -> Option<(String, String)> {
        let i = self.free.iter().position(|t| t == "->")?;
        Some((
            self.free.get(i.checked_sub(1)?)?.clone(),
            self.free.get(i + 1)?.clone(),
        ))
    }

    fn after(&self, word: &str) -> Option<String> {
        let low = self.lower();
        let i = low.iter().position(|t| t == word)?;
        self.free.get(i + 1).cloned()
    }
}

fn split(text: &str) -> Words {
    let spaced = text.replace("->", " -> ");
    let mut free = Vec::new();
    let mut kv = BTreeMap::new();
    for tok in spaced.split_whitespace() {
        let tok = tok.trim_matches(|c: char| {
            matches!(c, ',' | ';' | '?' | '!') || (c == '.' && tok.len() > 1)
        });
        if tok.is_empty() {
            continue;
        }
        match tok.split_once('=') {
            Some((k, v)) if !k.is_empty() && !v.is_empty() => {
                kv.insert(k.to_ascii_lowercase(), v.to_string());
            }
            _ => free.push(tok.to_string()),
        }
    }
    Words { free, kv }
}

fn is_ref(t: &str) -> bool {
    t.len() == 64 && t.bytes().all(|b| b.is_ascii_hexdigit())
}

/// Maps one line of text onto a command using a fixed keyword grammar:
/// the first recognized verb selects the command and `key=value` pairs
/// supply parameters.
pub fn parse_intent(text: &str) -> Result<WorkflowCommand> {
    let w = split(text);
    let low = w.lower();
    let Some(verb) = low.iter().find(|t| VERBS.contains(&t.as_str())) else {
        return Err(clarify(format!("no recognized verb in '{}'", text.trim())));
    };
    let cmd = match verb.as_str() {
        "load" => {
            let source = w
                .text(&["source", "ref"])
                .or_else(|| w.free.iter().find(|t| is_ref(t)).cloned())
                .ok_or_else(|| clarify("load needs the reference of an uploaded CSV"))?
                .to_ascii_lowercase();
            let role = match w.text(&["role"]).as_deref() {
                None | Some("primary") => DataRole::Primary,
                Some("anomalies") => DataRole::Anomalies,
                Some(r) => {
                    return Err(clarify(format!(
                        "unknown role '{r}'; use primary or anomalies"
                    )))
                }
            };
            WorkflowCommand::LoadData {
                source,
                role,
                labels: w.text(&["labels"]).map(|s| s.to_ascii_lowercase()),
                hints: BTreeMap::new(),
                categorical_threshold: w.take(&["threshold", "categorical_threshold"])?,
            }
        }
        "clean" => WorkflowCommand::Preprocess {
            plan: clean_plan(&w)?,
        },
        "describe" => WorkflowCommand::Describe,
        "discover" => {
            let algorithm = w
                .free
                .iter()
                .find_map(|t| Method::parse(t))
                .or(w
                    .text(&["algo", "algorithm", "method"])
                    .and_then(|m| Method::parse(&m)))
                .ok_or_else(|| {
                    clarify("discover needs an algorithm: pc, ges, notears or direct_lingam")
                })?;
            let mut params = DiscoveryParams::default();
            if let Some(a) = w.take(&["alpha"])? {
                params.alpha = a;
            }
            if let Some(m) = w.take(&["max_cond_set", "depth"])? {
                params.max_cond_set = Some(m);
            }
            if let Some(l) = w.take(&["lambda1", "lambda"])? {
                params.lambda1 = l;
            }
            if let Some(t) = w.take(&["w_threshold", "threshold"])? {
                params.w_threshold = t;
            }
            if let Some(s) = w.take(&["seed"])? {
                params.seed = s;
            }
            WorkflowCommand::Discover { algorithm, params }
        }
        "forbid" | "require" => {
            let (a, b) = w
                .arrow()
                .ok_or_else(|| clarify(format!("{verb} needs an edge written as 'A -> B'")))?;
            let mut delta = KnowledgeDelta::default();
            if verb == "forbid" {
                delta.forbidden.push((a, b));
            } else {
                delta.required.push((a, b));
            }
            WorkflowCommand::SetKnowledge { delta }
        }
        "rca" => {
            let method = low
                .iter()
                .chain(w.text(&["method"]).iter())
                .find_map(|t| match t.to_ascii_lowercase().as_str() {
                    "traversal" => Some(RcaMethod::Traversal),
                    "counterfactual" | "shapley" => Some(RcaMethod::Counterfactual),
                    "cholesky" => Some(RcaMethod::Cholesky),
                    _ => None,
                })
                .ok_or_else(|| {
                    clarify("rca needs a method: traversal, counterfactual or cholesky")
                })?;
            let mut params = RcaParams::default();
            if let Some(t) = w.take(&["tau"])? {
                params.tau = t;
            }
            if let Some(s) = w.take(&["seed"])? {
                params.seed = s;
            }
            if let Some(k) = w.take(&["k"])? {
                params.k = k;
            }
            params.monte_carlo = w.take(&["mc", "monte_carlo"])?;
            match w.text(&["search"]).as_deref() {
                None | Some("exhaustive") => {}
                Some("greedy") => params.search = Search::Greedy,
                Some(s) => return Err(clarify(format!("unknown search '{s}'"))),
            }
            match w.text(&["score"]).as_deref() {
                None | Some("robust-z") | Some("robust_z") => {}
                Some("tail-logprob") | Some("tail_logprob") => {
                    params.anomaly_method = AnomalyMethod::TailLogprob
                }
                Some(s) => return Err(clarify(format!("unknown anomaly score '{s}'"))),
            }
            WorkflowCommand::RunRca {
                method,
                row: w.take(&["row"])?.unwrap_or(0),
                target: w.text(&["target"]),
                params,
            }
        }
        "effect" => {
            let pair = match (w.text(&["treatment", "t"]), w.text(&["outcome", "y"])) {
                (Some(t), Some(y)) => Some((t, y)),
                _ => w.arrow().or_else(|| Some((w.after("of")?, w.after("on")?))),
            };
            let (treatment, outcome) =
                pair.ok_or_else(|| clarify("effect needs 'effect of T on Y' or 'effect T -> Y'"))?;
            WorkflowCommand::EstimateEffect { treatment, outcome }
        }
        "simulate" => simulate(&w)?,
        "undo" => {
            let step = w
                .take(&["step", "to"])?
                .or_else(|| w.free.iter().find_map(|t| t.parse().ok()))
                .ok_or_else(|| clarify("undo needs the step id to return to"))?;
            WorkflowCommand::Rollback { step }
        }
        "report" => WorkflowCommand::GenerateReport,
        _ => unreachable!("verb list is closed"),
    };
    cmd.validate().map_err(|e| clarify(e.to_string()))?;
    Ok(cmd)
}

fn clean_plan(w: &Words) -> Result<PreprocessPlan> {
    let mut plan = PreprocessPlan::default();
    if let Some(v) = w.text(&["impute"]) {
        plan.impute = match v.as_str() {
            "mean" => Imputation::Mean,
            "median" => Imputation::Median,
            "mode" => Imputation::Mode,
            "drop" | "drop-rows" | "drop_rows" => Imputation::DropRows,
            other => return Err(clarify(format!("unknown imputation '{other}'"))),
        };
    }
    if let Some(v) = w.text(&["encode"]) {
        plan.encode = match v.as_str() {
            "integer" | "integer-codes" | "codes" => Encoding::IntegerCodes,
            "onehot" | "one-hot" => Encoding::OneHot,
            other => return Err(clarify(format!("unknown encoding '{other}'"))),
        };
    }
    if let Some(v) = w.text(&["scale", "scaler"]) {
        plan.scaler = match v.as_str() {
            "zscore" | "z" => Scaler::Zscore,
            "robust" => Scaler::Robust,
            "minmax" => Scaler::Minmax,
            "none" => Scaler::None,
            other => return Err(clarify(format!("unknown scaler '{other}'"))),
        };
    }
    if let Some(f) = w.take(&["drop_column", "drop_column_missing_frac"])? {
        plan.drop_column_missing_frac = f;
    }
    if let Some(f) = w.take(&["drop_row", "drop_row_missing_frac"])? {
        plan.drop_row_missing_frac = f;
    }
    Ok(plan)
}

fn simulate(w: &Words) -> Result<WorkflowCommand> {
    let seed = w.take(&["seed"])?.unwrap_or(DEFAULT_SEED);
    let d = w.take(&["d"])?.unwrap_or(6);
    let graph = match w.text(&["model"]).as_deref() {
        None | Some("er") => {
            GraphSpec::erdos_renyi(d, w.take(&["degree", "k"])?.unwrap_or(2.0), seed)
        }
        Some("sf") => GraphSpec::scale_free(d, w.take(&["m"])?.unwrap_or(1), seed),
        Some(m) => return Err(clarify(format!("unknown graph model '{m}'; use er or sf"))),
    };
    let mut mechanism = MechanismSpec::default();
    match w.text(&["form"]).as_deref() {
        None | Some("linear") => {}
        Some("nonlinear") => mechanism.form = MechanismForm::Nonlinear,
        Some(f) => return Err(clarify(format!("unknown mechanism form '{f}'"))),
    }
    match w.text(&["noise"]).as_deref() {
        None | Some("gaussian") => {}
        Some("uniform") => mechanism.noise = NoiseKind::Uniform,
        Some("gumbel") => mechanism.noise = NoiseKind::Gumbel,
        Some(n) => return Err(clarify(format!("unknown noise '{n}'"))),
    }
    let mut intervention = default_intervention(seed);
    if let Some(m) = w.take(&["magnitude", "shift"])? {
        intervention.magnitude = m;
    }
    if let Some(a) = w.take(&["anomalies"])? {
        intervention.n_anomalies = a;
    }
    if let Some(k) = w.take::<usize>(&["targets"])? {
        intervention.targets = if k == 1 {
            TargetCount::Single
        } else {
            TargetCount::Multiple(k)
        };
    }
    match w.text(&["mode"]).as_deref() {
        None | Some("soft") => {}
        Some("hard") => intervention.mode = InterventionMode::Hard,
        Some(m) => return Err(clarify(format!("unknown intervention mode '{m}'"))),
    }
    Ok(WorkflowCommand::Simulate {
        graph,
        mechanism,
        intervention,
        n_normal: w.take(&["n"])?.unwrap_or(5000),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discover_with_alpha() {
        match parse_intent("discover graph using pc alpha=0.01").unwrap() {
            WorkflowCommand::Discover { algorithm, params } => {
                assert_eq!(algorithm, Method::Pc);
                assert_eq!(params.alpha, 0.01);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn forbid_edge_keeps_case() {
        let c = parse_intent("forbid edge temperature -> yield").unwrap();
        let mut delta = KnowledgeDelta::default();
        delta.forbidden.push(("temperature".into(), "yield".into()));
        assert_eq!(c, WorkflowCommand::SetKnowledge { delta });
        let c = parse_intent("Require edge Temp->Yield").unwrap();
        let WorkflowCommand::SetKnowledge { delta } = c else {
            panic!()
        };
        assert_eq!(
            delta.required,
            vec![("Temp".to_string(), "Yield".to_string())]
        );
    }

    #[test]
    fn unknown_text_asks_for_clarification() {
        match parse_intent("please help") {
            Err(Error::NeedsClarification { suggestions, .. }) => {
                assert_eq!(suggestions.len(), VERBS.len());
                assert!(suggestions.contains(&"discover".to_string()));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_intent("discover a graph"),
            Err(Error::NeedsClarification { .. })
        ));
        assert!(matches!(
            parse_intent("discover pc alpha=2"),
            Err(Error::NeedsClarification { .. })
        ));
        assert!(matches!(
            parse_intent("undo"),
            Err(Error::NeedsClarification { .. })
        ));
    }

    #[test]
    fn other_verbs() {
        assert_eq!(
            parse_intent("describe the data").unwrap(),
            WorkflowCommand::Describe
        );
        assert_eq!(
            parse_intent("report").unwrap(),
            WorkflowCommand::GenerateReport
        );
        assert_eq!(
            parse_intent("undo to step 3").unwrap(),
            WorkflowCommand::Rollback { step: 3 }
        );
        assert_eq!(
            parse_intent("effect of dose on recovery").unwrap(),
            WorkflowCommand::EstimateEffect {
                treatment: "dose".into(),
                outcome: "recovery".into()
            }
        );
        let WorkflowCommand::RunRca {
            method,
            row,
            target,
            params,
        } = parse_intent("rca cholesky row=2 target=x3 search=greedy").unwrap()
        else {
            panic!()
        };
        assert_eq!(
            (method, row, target.as_deref()),
            (RcaMethod::Cholesky, 2, Some("x3"))
        );
        assert_eq!(params.search, Search::Greedy);
        let WorkflowCommand::Preprocess { plan } =
            parse_intent("clean impute=median scale=zscore").unwrap()
        else {
            panic!()
        };
        assert_eq!(
            (plan.impute, plan.scaler),
            (Imputation::Median, Scaler::Zscore)
        );
        let r = "a".repeat(64);
        let WorkflowCommand::LoadData { source, role, .. } =
            parse_intent(&format!("load {r} role=anomalies")).unwrap()
        else {
            panic!()
        };
        assert_eq!((source, role), (r, DataRole::Anomalies));
        let WorkflowCommand::Simulate {
            graph,
            intervention,
            n_normal,
            ..
        } = parse_intent("simulate model=er d=6 n=5000 seed=7").unwrap()
        else {
            panic!()
        };
        assert_eq!((graph.d, graph.seed, n_normal), (6, 7, 5000));
        assert_eq!(intervention, default_intervention(7));
    }
}
