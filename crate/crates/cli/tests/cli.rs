use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use causalwb::graph::{from_json, shd, to_cpdag, validate_dag};
use causalwb::rca::{
    anomaly_scores, rank_metrics, rca_cholesky, rca_traversal, AnomalyMethod, CholeskyParams,
    DEFAULT_TAU,
};
use causalwb::sim::read_bundle;

fn causalwb(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causalwb"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn simulate(cwd: &Path, out: &str, d: &str, seed: &str) {
    ok(&causalwb(
        &[
            "simulate", "--model", "er", "--d", d, "--n", "3000", "--seed", seed, "--out", out,
        ],
        cwd,
    ));
}

const BUNDLE_FILES: [&str; 5] = [
    "meta.json",
    "graph.json",
    "normal.csv",
    "anomalies.csv",
    "labels.json",
];

#[test]
fn simulate_is_byte_reproducible() {
    let t = tempfile::tempdir().unwrap();
    simulate(t.path(), "a", "6", "7");
    simulate(t.path(), "b", "6", "7");
    simulate(t.path(), "c", "6", "8");
    for f in BUNDLE_FILES {
        let a = fs::read(t.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(t.path().join("b").join(f)).unwrap(), "{f}");
    }
    assert_ne!(
        fs::read(t.path().join("a/normal.csv")).unwrap(),
        fs::read(t.path().join("c/normal.csv")).unwrap()
    );
    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(t.path().join("a/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["graph"]["seed"], 7);
}

#[test]
fn discover_prints_shd_line() {
    let t = tempfile::tempdir().unwrap();
    simulate(t.path(), "case", "5", "11");
    for (algo, cpdag_level) in [
        ("pc", true),
        ("ges", true),
        ("notears", false),
        ("direct_lingam", false),
    ] {
        let out = ok(&causalwb(
            &[
                "discover",
                "--algo",
                algo,
                "--data",
                "case/normal.csv",
                "--truth",
                "case/graph.json",
                "--out",
                "g.json",
            ],
            t.path(),
        ));
        let line = out.trim();
        let (k, v) = line
            .strip_prefix("shd=")
            .and_then(|r| r.split_once(" normalized="))
            .unwrap_or_else(|| panic!("bad line '{line}'"));
        let k: usize = k.parse().unwrap();
        let v: f64 = v.parse().unwrap();
        // Oracle: SHD recomputed from the written graph.
        let est = from_json(&fs::read_to_string(t.path().join("g.json")).unwrap()).unwrap();
        let truth = validate_dag(
            &from_json(&fs::read_to_string(t.path().join("case/graph.json")).unwrap()).unwrap(),
        )
        .unwrap();
        let reference = if cpdag_level {
            to_cpdag(&truth)
        } else {
            truth.graph().clone()
        };
        let s = shd(&est, &reference).unwrap();
        assert_eq!(k, s.shd, "{algo}");
        assert!((v - k as f64 / 10.0).abs() < 1e-4, "{algo}: {v}");
    }
}

#[test]
fn bench_matches_direct_metrics() {
    let t = tempfile::tempdir().unwrap();
    fs::create_dir(t.path().join("cases")).unwrap();
    simulate(t.path(), "cases/beta", "5", "2");
    simulate(t.path(), "cases/alpha", "6", "3");
    ok(&causalwb(
        &[
            "bench",
            "--cases",
            "cases/",
            "--methods",
            "traversal,cholesky",
            "--k",
            "3",
        ],
        t.path(),
    ));
    let csv = fs::read_to_string(t.path().join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "case,method,k,precision,recall,f1,accuracy_top1,ndcg,mrr,map,wall_ms"
    );
    assert_eq!(lines.len(), 5);
    let keys: Vec<(&str, &str)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0], f[1])
        })
        .collect();
    assert_eq!(
        keys,
        [
            ("alpha", "traversal"),
            ("alpha", "cholesky"),
            ("beta", "traversal"),
            ("beta", "cholesky")
        ]
    );

    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        let case = read_bundle(&t.path().join("cases").join(f[0])).unwrap();
        let dag = case.scm.dag();
        let mut sums = [0.0; 7];
        for (r, truth) in case.labels.iter().enumerate() {
            let sample: Vec<f64> = (0..case.normal.n_cols())
                .map(|c| case.anomalies.get(r, c).unwrap())
                .collect();
            let ranking = match f[1] {
                "traversal" => {
                    let scores =
                        anomaly_scores(&case.normal, &sample, AnomalyMethod::RobustZ).unwrap();
                    let mut best = 0;
                    for i in 1..scores.scores.len() {
                        if scores.scores[i] > scores.scores[best] {
                            best = i;
                        }
                    }
                    rca_traversal(dag, &scores, &scores.nodes[best], DEFAULT_TAU).unwrap()
                }
                _ => rca_cholesky(&case.normal, &sample, &CholeskyParams::default()).unwrap(),
            };
            let truth: BTreeSet<String> = truth.iter().cloned().collect();
            let m = rank_metrics(&ranking.nodes(), &truth, 3).unwrap();
            for (s, v) in sums.iter_mut().zip([
                m.precision_k,
                m.recall_k,
                m.f1_k,
                m.accuracy_top1,
                m.ndcg_k,
                m.mrr,
                m.map_k,
            ]) {
                *s += v;
            }
        }
        let n = case.labels.len() as f64;
        for (i, s) in sums.iter().enumerate() {
            let got: f64 = f[3 + i].parse().unwrap();
            assert!((got - s / n).abs() < 1e-12, "{line}: column {}", 3 + i);
        }
        assert!(f[10].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn rca_and_effect_emit_json() {
    let t = tempfile::tempdir().unwrap();
    simulate(t.path(), "case", "5", "4");
    for m in ["traversal", "counterfactual", "cholesky"] {
        let out = ok(&causalwb(
            &["rca", "--method", m, "--bundle", "case", "--row", "2"],
            t.path(),
        ));
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["row"], 2);
        assert_eq!(v["causes"]["method"], m);
        let n = v["causes"]["ranking"].as_array().unwrap().len();
        assert!((1..=5).contains(&n), "{m}: {n}");
        assert!(v["metrics"]["mrr"].is_number());
    }
    let g = from_json(&fs::read_to_string(t.path().join("case/graph.json")).unwrap()).unwrap();
    let e = &g.edges()[0];
    let (tr, y) = (g.label(e.from).to_string(), g.label(e.to).to_string());
    let out = ok(&causalwb(
        &[
            "effect",
            "--data",
            "case/normal.csv",
            "--graph",
            "case/graph.json",
            "--treatment",
            &tr,
            "--outcome",
            &y,
        ],
        t.path(),
    ));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let (lo, hi) = (
        v["ci95"][0].as_f64().unwrap(),
        v["ci95"][1].as_f64().unwrap(),
    );
    assert!(lo <= v["ate"].as_f64().unwrap() && v["ate"].as_f64().unwrap() <= hi);
}

#[test]
fn report_is_reproducible_and_refuses_reuse() {
    let t = tempfile::tempdir().unwrap();
    simulate(t.path(), "case", "5", "9");
    let out = ok(&causalwb(
        &["report", "--bundle", "case", "--session", "s1"],
        t.path(),
    ));
    assert!(
        out.lines().any(|l| l == "step 11 generate_report ok"),
        "{out}"
    );
    ok(&causalwb(
        &[
            "report",
            "--bundle",
            "case",
            "--session",
            "s2",
            "--out",
            "r2.md",
        ],
        t.path(),
    ));
    let r1 = fs::read(t.path().join("s1/report.md")).unwrap();
    assert_eq!(r1, fs::read(t.path().join("r2.md")).unwrap());
    assert!(String::from_utf8(r1)
        .unwrap()
        .starts_with("# Causal Analysis Report"));
    let again = causalwb(&["report", "--bundle", "case", "--session", "s1"], t.path());
    assert_eq!(again.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let unknown = causalwb(
        &["discover", "--algo", "pc", "--data", "x.csv", "--bogus"],
        t.path(),
    );
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));
    assert_eq!(causalwb(&["frobnicate"], t.path()).status.code(), Some(1));
    assert_eq!(
        causalwb(
            &["discover", "--algo", "pc", "--data", "missing.csv"],
            t.path()
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        causalwb(&["bench", "--cases", ".", "--methods", "magic"], t.path())
            .status
            .code(),
        Some(1)
    );
    let help = causalwb(&["--help"], t.path());
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("effect of T on Y"));
}

#[test]
fn intent_prints_command_json() {
    let t = tempfile::tempdir().unwrap();
    let out = ok(&causalwb(&["intent", "forbid", "x1", "->", "x2"], t.path()));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["command"], "set_knowledge");
    assert_eq!(v["delta"]["forbidden"][0], serde_json::json!(["x1", "x2"]));
    assert_eq!(
        causalwb(&["intent", "please", "help"], t.path())
            .status
            .code(),
        Some(2)
    );
}
