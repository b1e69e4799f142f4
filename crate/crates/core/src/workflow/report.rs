use std::fmt::Write;

use serde_json::Value;

use super::command::WorkflowCommand;
use super::ops::RcaOutcome;
use super::profile::DatasetProfile;
use super::session::{Session, StepRecord, StepStatus};
use crate::data::Dataset;
use crate::effects::AteEstimate;
use crate::graph::{from_json, to_dot};
use crate::Result;

fn bytes(s: &Session, r: &str) -> Result<Vec<u8>> {
    Ok(s.artifact(r)?.1.to_vec())
}

fn output_json<T: serde::de::DeserializeOwned>(
    s: &Session,
    rec: &StepRecord,
    name: &str,
) -> Result<Option<T>> {
    match rec.output(name) {
        Some(o) => Ok(Some(serde_json::from_slice(&bytes(s, &o.reference)?)?)),
        None => Ok(None),
    }
}

fn dot_of(s: &Session, r: &str) -> Result<String> {
    let text = String::from_utf8(bytes(s, r)?).map_err(|e| crate::Error::Input(e.to_string()))?;
    Ok(to_dot(&from_json(&text)?))
}

fn compact(v: &impl serde::Serialize) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn none_line(out: &mut String, empty: bool) {
    if empty {
        out.push_str("_None._\n");
    }
}

/// Markdown report over the head's ancestor chain. Contains no timestamps
/// or timings, so equal journals give byte-identical text.
pub fn render_report(s: &Session) -> Result<String> {
    let chain = s.chain();
    let ok = |r: &&&StepRecord| r.status == StepStatus::Ok;
    let ctx = s.context();
    let mut out = String::from("# Causal Analysis Report\n\n");

    out.push_str("## Data Summary\n\n");
    match &ctx.dataset {
        Some(r) => {
            let ds: Dataset = serde_json::from_slice(&bytes(s, r)?)?;
            writeln!(
                out,
                "Current dataset `{}`: {} rows, {} columns.\n",
                &r[..12],
                ds.n_rows(),
                ds.n_cols()
            )
            .unwrap();
            out.push_str("| column | kind | missing | distinct |\n|---|---|---|---|\n");
            for c in ds.columns() {
                let kind = serde_json::to_value(c.kind)?;
                writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    c.name,
                    kind.as_str().unwrap_or(""),
                    c.missing_count,
                    c.distinct_count
                )
                .unwrap();
            }
            out.push('\n');
        }
        None => out.push_str("_No dataset loaded._\n\n"),
    }
    for rec in chain.iter().filter(ok) {
        match &rec.command {
            WorkflowCommand::Simulate { .. } => {
                let meta: Option<Value> = output_json(s, rec, "meta")?;
                writeln!(
                    out,
                    "Step {}: simulated benchmark `{}`.\n",
                    rec.id,
                    compact(&meta)
                )
                .unwrap();
            }
            WorkflowCommand::Describe => {
                if let Some(p) = output_json::<DatasetProfile>(s, rec, "profile")? {
                    writeln!(
                        out,
                        "Step {} profile: n={}, d={}, continuous fraction {}, missing fraction {}, gaussian {}, linear {}.\n",
                        rec.id,
                        p.n,
                        p.d,
                        p.fraction_continuous,
                        p.missing_fraction,
                        p.gaussian.as_str(),
                        p.linear.as_str()
                    )
                    .unwrap();
                }
                if let Some(Value::Object(goals)) = output_json::<Value>(s, rec, "recommendations")?
                {
                    for (goal, items) in goals {
                        match items.as_array() {
                            Some(list) => {
                                for (i, it) in list.iter().enumerate() {
                                    writeln!(
                                        out,
                                        "- {goal} #{}: {} ({})",
                                        i + 1,
                                        it["method"].as_str().unwrap_or(""),
                                        it["rule"].as_str().unwrap_or("")
                                    )
                                    .unwrap();
                                }
                            }
                            None => {
                                writeln!(out, "- {goal}: {}", items["error"].as_str().unwrap_or(""))
                                    .unwrap()
                            }
                        }
                    }
                    out.push('\n');
                }
            }
            _ => {}
        }
    }

    out.push_str("## Preprocessing Decisions\n\n");
    let mut empty = true;
    for rec in chain.iter().filter(ok) {
        match &rec.command {
            WorkflowCommand::LoadData { source, role, .. } => {
                empty = false;
                writeln!(
                    out,
                    "- Step {}: loaded `{}` as {} data.",
                    rec.id,
                    &source[..12],
                    compact(role)
                )
                .unwrap();
            }
            WorkflowCommand::Preprocess { plan } => {
                empty = false;
                writeln!(
                    out,
                    "- Step {}: preprocessing plan `{}`.",
                    rec.id,
                    compact(plan)
                )
                .unwrap();
                if let Some(ds) = output_json::<Dataset>(s, rec, "dataset")? {
                    for l in ds.lineage() {
                        write!(out, "  - {}: `{}`", l.stage, compact(&l.detail)).unwrap();
                        if !l.flags.is_empty() {
                            write!(out, " flags: {}", l.flags.join("; ")).unwrap();
                        }
                        out.push('\n');
                    }
                }
            }
            _ => {}
        }
    }
    none_line(&mut out, empty);
    out.push('\n');

    out.push_str("## Knowledge Constraints\n\n");
    for (a, b) in &ctx.knowledge.forbidden {
        writeln!(out, "- forbidden: {a} -> {b}").unwrap();
    }
    for (a, b) in &ctx.knowledge.required {
        writeln!(out, "- required: {a} -> {b}").unwrap();
    }
    none_line(&mut out, ctx.knowledge.is_empty());
    out.push('\n');

    out.push_str("## Discovery\n\n");
    let mut empty = true;
    for rec in chain.iter().filter(ok) {
        match &rec.command {
            WorkflowCommand::Discover { algorithm, params } => {
                empty = false;
                writeln!(out, "### Step {}: {}\n", rec.id, algorithm.name()).unwrap();
                writeln!(out, "Parameters: `{}`\n", compact(params)).unwrap();
                if let Some(sum) = output_json::<Value>(s, rec, "discovery")? {
                    writeln!(out, "Edges: {}", sum["n_edges"]).unwrap();
                    if !sum["converged"].is_null() {
                        writeln!(out, "Converged: {}, h(W) = {}", sum["converged"], sum["h"])
                            .unwrap();
                    }
                    if let Some(order) = sum["causal_order"].as_array() {
                        let names: Vec<&str> = order.iter().filter_map(Value::as_str).collect();
                        writeln!(out, "Causal order: {}", names.join(", ")).unwrap();
                    }
                    let ev = &sum["evaluation"];
                    if !ev.is_null() {
                        writeln!(
                            out,
                            "SHD vs truth: {} (normalized {}); vs truth CPDAG: {} (normalized {})",
                            ev["dag"]["shd"],
                            ev["dag"]["normalized"],
                            ev["cpdag"]["shd"],
                            ev["cpdag"]["normalized"]
                        )
                        .unwrap();
                    }
                    out.push('\n');
                }
                if let Some(g) = rec.output("graph") {
                    writeln!(out, "```dot\n{}```\n", dot_of(s, &g.reference)?).unwrap();
                }
            }
            WorkflowCommand::SetGraph { .. } => {
                empty = false;
                writeln!(out, "### Step {}: graph set by user\n", rec.id).unwrap();
                if let Some(g) = rec.output("graph") {
                    writeln!(out, "```dot\n{}```\n", dot_of(s, &g.reference)?).unwrap();
                }
            }
            WorkflowCommand::Evaluate { .. } => {
                empty = false;
                if let Some(ev) = output_json::<Value>(s, rec, "evaluation")? {
                    writeln!(
                        out,
                        "### Step {}: evaluation\n\n| reference | SHD | normalized |\n|---|---|---|\n| truth DAG | {} | {} |\n| truth CPDAG | {} | {} |\n",
                        rec.id, ev["dag"]["shd"], ev["dag"]["normalized"], ev["cpdag"]["shd"], ev["cpdag"]["normalized"]
                    )
                    .unwrap();
                }
            }
            _ => {}
        }
    }
    none_line(&mut out, empty);
    if empty {
        out.push('\n');
    }

    out.push_str("## Effects\n\n");
    let effects: Vec<(u64, AteEstimate)> = chain
        .iter()
        .filter(ok)
        .filter_map(|r| {
            output_json::<AteEstimate>(s, r, "effect")
                .transpose()
                .map(|e| e.map(|e| (r.id, e)))
        })
        .collect::<Result<_>>()?;
    if effects.is_empty() {
        out.push_str("_None._\n\n");
    } else {
        out.push_str(
            "| step | treatment | outcome | ATE | std. error | 95% CI | adjustment set | n |\n",
        );
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for (id, e) in effects {
            writeln!(
                out,
                "| {id} | {} | {} | {:.6} | {:.6} | [{:.6}, {:.6}] | {} | {} |",
                e.treatment,
                e.outcome,
                e.ate,
                e.stderr,
                e.ci95.0,
                e.ci95.1,
                if e.adjustment_set.is_empty() {
                    "{}".to_string()
                } else {
                    e.adjustment_set.join(", ")
                },
                e.n
            )
            .unwrap();
        }
        out.push('\n');
    }

    out.push_str("## RCA\n\n");
    let mut empty = true;
    for rec in chain.iter().filter(ok) {
        let Some(res) = output_json::<RcaOutcome>(s, rec, "ranking")? else {
            continue;
        };
        empty = false;
        writeln!(
            out,
            "### Step {}: {} (row {}, target {})\n",
            rec.id, res.causes.method, res.row, res.target
        )
        .unwrap();
        out.push_str("| rank | node | score |\n|---|---|---|\n");
        for (i, n) in res.causes.ranking.iter().enumerate() {
            writeln!(out, "| {} | {} | {:.6} |", i + 1, n.node, n.score).unwrap();
        }
        out.push('\n');
        if !res.causes.flags.is_empty() {
            writeln!(out, "Flags: {}\n", res.causes.flags.join("; ")).unwrap();
        }
        if let (Some(t), Some(m)) = (&res.truth, &res.metrics) {
            writeln!(out, "True root causes: {}\n", t.join(", ")).unwrap();
            out.push_str("| precision@k | recall@k | F1@k | top-1 | NDCG@k | MRR | MAP@k |\n");
            out.push_str("|---|---|---|---|---|---|---|\n");
            writeln!(
                out,
                "| {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
                m.precision_k, m.recall_k, m.f1_k, m.accuracy_top1, m.ndcg_k, m.mrr, m.map_k
            )
            .unwrap();
        }
    }
    none_line(&mut out, empty);
    if empty {
        out.push('\n');
    }

    out.push_str("## Full Decision Journal\n\n");
    for rec in &chain {
        let parent = rec
            .parent_id
            .map_or("root".to_string(), |p| format!("parent {p}"));
        let status = match rec.status {
            StepStatus::Ok => "ok",
            StepStatus::Failed => "failed",
        };
        writeln!(
            out,
            "- Step {} ({parent}) {} {status}: `{}`",
            rec.id,
            rec.command.name(),
            compact(&rec.command)
        )
        .unwrap();
        for o in &rec.outputs {
            writeln!(out, "  - {} ({}): `{}`", o.name, o.kind.name(), o.reference).unwrap();
        }
        if let Some(e) = &rec.error {
            writeln!(out, "  - error: {e}").unwrap();
        }
    }
    Ok(out)
}
