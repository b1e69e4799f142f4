use std::collections::BTreeSet;

use causalwb::data::Dataset;
use causalwb::graph::{validate_dag, CausalGraph};
use causalwb::rca::*;
use causalwb::sim::*;
use causalwb::stats;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scm(nodes: &[&str], edges: &[(usize, usize, f64)]) -> Scm {
    let mut g = CausalGraph::new(nodes.iter().copied()).unwrap();
    for &(a, b, w) in edges {
        g.add_directed(a, b, Some(w)).unwrap();
    }
    scm_from_weighted_graph(&g, &MechanismSpec::default()).unwrap()
}

#[test]
fn robust_z_of_three_sigma() {
    let dag = validate_dag(&CausalGraph::new(["x"]).unwrap()).unwrap();
    let s = attach_mechanisms(&dag, &MechanismSpec::default(), 0).unwrap();
    let normal = s.sample(10_000, 1).unwrap();
    let z = anomaly_scores(&normal, &[3.0], AnomalyMethod::RobustZ)
        .unwrap()
        .scores[0];
    assert!((z - 3.0).abs() <= 0.3, "{z}");
}

#[test]
fn linear_fit_recovers_weights() {
    let s = scm(&["a", "b", "c"], &[(0, 1, 1.5), (0, 2, -0.7), (1, 2, 2.0)]);
    let normal = s.sample(50_000, 3).unwrap();
    let fit = fit_linear_scm(s.dag(), &normal).unwrap();
    for (j, m) in s.mechanisms().iter().enumerate() {
        for (&(p, w), &(q, v)) in m.parents.iter().zip(&fit.weights[j]) {
            assert_eq!(p, q);
            assert!((w - v).abs() <= 0.05, "{w} vs {v}");
        }
    }
    let eps: Vec<Vec<f64>> = (0..normal.n_rows())
        .map(|r| fit.noises(&fit.align_row(&normal, r).unwrap()))
        .collect();
    for j in 0..3 {
        let m = eps.iter().map(|e| e[j]).sum::<f64>() / eps.len() as f64;
        assert!(m.abs() <= 1e-9, "{m}");
    }
}

fn unit_fit(nodes: &[&str], edges: &[(usize, usize, f64)]) -> LinearScmFit {
    let s = scm(nodes, edges);
    LinearScmFit {
        dag: s.dag().clone(),
        intercepts: vec![0.0; nodes.len()],
        weights: s.mechanisms().iter().map(|m| m.parents.clone()).collect(),
        sigma: vec![1.0; nodes.len()],
    }
}

#[test]
fn counterfactual_two_node_example() {
    let fit = unit_fit(&["A", "B"], &[(0, 1, 1.0)]);
    assert_eq!(fit.noises(&[5.0, 5.0]), vec![5.0, 0.0]);
    let r = rca_counterfactual(&fit, &[5.0, 5.0], "B", &CounterfactualParams::default()).unwrap();
    let phi = |n: &str| r.ranking.iter().find(|x| x.node == n).unwrap().score;
    let (a, b) = (phi("A"), phi("B"));
    assert!(a >= 0.95 * (a + b), "{a} {b}");
    assert!(b.abs() < 0.05 * a, "{b}");
    assert_eq!(r.top(), Some("A"));
}

#[test]
fn edgeless_graph_is_dummy_except_target() {
    let fit = unit_fit(&["P", "Q", "T"], &[]);
    let attr =
        shapley_attribution(&fit, &[2.0, -1.0, 6.0], 2, &CounterfactualParams::default()).unwrap();
    assert_eq!(attr.phi[0], 0.0);
    assert_eq!(attr.phi[1], 0.0);
    assert!((attr.phi[2] - (attr.g_all - attr.g_empty)).abs() < 1e-12);
}

#[test]
fn shapley_efficiency_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..10 {
        let dag = sample_graph(&GraphSpec::erdos_renyi(7, 2.0, seed)).unwrap();
        let s = attach_mechanisms(&dag, &MechanismSpec::default(), seed).unwrap();
        let fit = fit_linear_scm(&dag, &s.sample(500, seed).unwrap()).unwrap();
        let x: Vec<f64> = (0..7).map(|_| rng.random_range(-4.0..4.0)).collect();
        let attr = shapley_attribution(
            &fit,
            &x,
            dag.topological_order()[6],
            &CounterfactualParams::default(),
        )
        .unwrap();
        let total: f64 = attr.phi.iter().sum();
        assert!((total - (attr.g_all - attr.g_empty)).abs() <= 1e-9);
    }
}

#[test]
fn monte_carlo_route_agrees_with_closed_form() {
    let fit = unit_fit(&["A", "B", "C"], &[(0, 1, 1.0), (1, 2, 0.5)]);
    let x = [3.0, 4.0, 2.5];
    let exact = rca_counterfactual(&fit, &x, "C", &CounterfactualParams::default()).unwrap();
    let mc = rca_counterfactual(
        &fit,
        &x,
        "C",
        &CounterfactualParams {
            monte_carlo: Some(20_000),
            seed: 3,
            ..Default::default()
        },
    )
    .unwrap();
    for (a, b) in exact.ranking.iter().zip(&mc.ranking) {
        assert_eq!(a.node, b.node);
        assert!(
            (a.score - b.score).abs() < 0.05,
            "{} {} {}",
            a.node,
            a.score,
            b.score
        );
    }
}

#[test]
fn permutation_sampling_for_many_nodes() {
    let names: Vec<String> = (0..12).map(|i| format!("n{i}")).collect();
    let mut g = CausalGraph::new(names.clone()).unwrap();
    for i in 0..11 {
        g.add_directed(i, i + 1, Some(0.5)).unwrap();
    }
    let s = scm_from_weighted_graph(&g, &MechanismSpec::default()).unwrap();
    let fit = fit_linear_scm(s.dag(), &s.sample(2_000, 1).unwrap()).unwrap();
    let mut x = vec![0.0; 12];
    x[3] = 8.0;
    for i in 4..12 {
        x[i] = 0.5 * x[i - 1];
    }
    let r = rca_counterfactual(&fit, &x, "n5", &CounterfactualParams::default()).unwrap();
    assert_eq!(r.top(), Some("n3"));
    assert!(r.params["shapley"]
        .as_str()
        .unwrap()
        .contains("permutations"));
    let again = rca_counterfactual(&fit, &x, "n5", &CounterfactualParams::default()).unwrap();
    assert_eq!(r, again);
}

/// Standardized noises from an explicit noise vector via x = (I - B)⁻¹ e.
#[test]
fn cholesky_whitening_identity() {
    for seed in 0..10 {
        let dag = sample_graph(&GraphSpec::erdos_renyi(6, 2.0, seed)).unwrap();
        let mspec = MechanismSpec {
            noise_scale: 1.7,
            ..Default::default()
        };
        let s = attach_mechanisms(&dag, &mspec, seed).unwrap();
        let cov = s.linear_covariance().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut x = vec![0.0; 6];
        for &j in dag.topological_order() {
            x[j] = s.mechanisms()[j]
                .parents
                .iter()
                .map(|&(p, w)| w * x[p])
                .sum::<f64>()
                + eps[j];
        }
        let z = whiten(&[0.0; 6], &cov, dag.topological_order(), &x).unwrap();
        for j in 0..6 {
            assert!(
                (z[j] - eps[j] / 1.7).abs() <= 1e-10,
                "{} vs {}",
                z[j],
                eps[j] / 1.7
            );
        }
    }
}

#[test]
fn cholesky_two_node_closed_form() {
    // x1 = e1, x2 = x1 + e2; Σ = [[1,1],[1,2]]
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]);
    let x = [0.3, 0.3 + 8.0];
    let mut best = [0.0f64; 2];
    for order in [[0, 1], [1, 0]] {
        let z = whiten(&[0.0, 0.0], &cov, &order, &x).unwrap();
        for j in 0..2 {
            best[j] = best[j].max(z[j].abs());
        }
    }
    assert!(best[1] > best[0]);
    let z = whiten(&[0.0, 0.0], &cov, &[0, 1], &x).unwrap();
    assert!((z[0] - 0.3).abs() < 1e-12 && (z[1] - 8.0).abs() < 1e-12);
}

/// For one node, the largest |standardized residual| over all conditioning
/// subsets of the others, by direct Gaussian conditioning.
fn subset_oracle(cov: &DMatrix<f64>, dev: &[f64], v: usize) -> f64 {
    let d = dev.len();
    let others: Vec<usize> = (0..d).filter(|&i| i != v).collect();
    let mut best: f64 = 0.0;
    for mask in 0..(1u32 << others.len()) {
        let s: Vec<usize> = (0..others.len())
            .filter(|&k| mask >> k & 1 == 1)
            .map(|k| others[k])
            .collect();
        let (m, var) = if s.is_empty() {
            (0.0, cov[(v, v)])
        } else {
            let css = DMatrix::from_fn(s.len(), s.len(), |a, b| cov[(s[a], s[b])]);
            let cvs = DMatrix::from_fn(1, s.len(), |_, b| cov[(v, s[b])]);
            let inv = css.try_inverse().unwrap();
            let xs = DMatrix::from_fn(s.len(), 1, |a, _| dev[s[a]]);
            (
                (&cvs * &inv * xs)[(0, 0)],
                cov[(v, v)] - (&cvs * &inv * cvs.transpose())[(0, 0)],
            )
        };
        best = best.max(((dev[v] - m) / var.sqrt()).abs());
    }
    best
}

#[test]
fn exhaustive_search_matches_subset_oracle() {
    let dag = sample_graph(&GraphSpec::erdos_renyi(5, 2.0, 2)).unwrap();
    let s = attach_mechanisms(&dag, &MechanismSpec::default(), 2).unwrap();
    let normal = s.sample(3_000, 2).unwrap();
    let x = normal
        .select_columns(&[0, 1, 2, 3, 4])
        .continuous_matrix()
        .unwrap();
    let mean: Vec<f64> = (0..5).map(|j| x.column(j).mean()).collect();
    let cov = DMatrix::from_fn(5, 5, |a, b| {
        x.column(a)
            .iter()
            .zip(x.column(b).iter())
            .map(|(p, q)| (p - mean[a]) * (q - mean[b]))
            .sum::<f64>()
            / x.nrows() as f64
    });
    let sample = [1.0, -2.0, 3.0, 0.5, 4.0];
    let dev: Vec<f64> = (0..5).map(|j| sample[j] - mean[j]).collect();
    let r = rca_cholesky(&normal, &sample, &CholeskyParams::default()).unwrap();
    assert_eq!(r.params["orderings"], 120);
    for node in &r.ranking {
        let v = normal.column_index(&node.node).unwrap();
        assert!((node.score - subset_oracle(&cov, &dev, v)).abs() < 1e-8);
    }
    let greedy = rca_cholesky(
        &normal,
        &sample,
        &CholeskyParams {
            search: Search::Greedy,
            seed: 0,
        },
    )
    .unwrap();
    // greedy searches a subset of the orderings
    for g in &greedy.ranking {
        assert!(g.score <= r.ranking.iter().find(|x| x.node == g.node).unwrap().score + 1e-9);
    }
}

#[test]
fn cholesky_at_mean_scores_zero() {
    let s = scm(&["a", "b", "c"], &[(0, 1, 1.0), (1, 2, 1.0)]);
    let normal = s.sample(500, 1).unwrap();
    let mean: Vec<f64> = (0..3)
        .map(|j| stats::mean(&normal.column_values(j)))
        .collect();
    let r = rca_cholesky(&normal, &mean, &CholeskyParams::default()).unwrap();
    assert!(r.ranking.iter().all(|n| n.score.abs() < 1e-9));
}

#[test]
fn cholesky_ridge_on_duplicate_columns() {
    let a: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
    let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).cos()).collect();
    let ds =
        Dataset::from_columns(&["a".into(), "b".into(), "c".into()], &[a.clone(), b, a]).unwrap();
    let r = rca_cholesky(&ds, &[1.0, 0.0, 1.0], &CholeskyParams::default()).unwrap();
    assert!(r.flags.iter().any(|f| f.contains("ridge")));
}

#[test]
fn exhaustive_cap() {
    let names: Vec<String> = (0..11).map(|i| format!("v{i}")).collect();
    let cols: Vec<Vec<f64>> = (0..11)
        .map(|j| (0..40).map(|i| ((i * (j + 3)) % 17) as f64).collect())
        .collect();
    let ds = Dataset::from_columns(&names, &cols).unwrap();
    assert!(matches!(
        rca_cholesky(&ds, &[0.0; 11], &CholeskyParams::default()),
        Err(causalwb::Error::CapExceeded { .. })
    ));
    assert!(rca_cholesky(
        &ds,
        &[0.0; 11],
        &CholeskyParams {
            search: Search::Greedy,
            seed: 0
        }
    )
    .is_ok());
}

#[test]
fn ranking_metric_worked_examples() {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let t = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<BTreeSet<_>>();
    let m = rank_metrics(&s(&["A", "C", "B"]), &t(&["C"]), 3).unwrap();
    assert_eq!(m.mrr, 0.5);
    assert!((m.ndcg_k - 1.0 / 3f64.log2()).abs() < 1e-15);
    assert!((m.ndcg_k - 0.6309).abs() < 1e-4);
    let m = rank_metrics(&s(&["B", "A", "C"]), &t(&["B", "C"]), 3).unwrap();
    assert!((m.map_k - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    assert!((m.map_k - 0.8333).abs() < 1e-4);
}

#[test]
fn ranking_metrics_bounded_and_ideal() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pool: Vec<String> = (0..8).map(|i| format!("n{i}")).collect();
    for _ in 0..300 {
        let mut ranking = pool.clone();
        for i in (1..ranking.len()).rev() {
            ranking.swap(i, rng.random_range(0..=i));
        }
        ranking.truncate(rng.random_range(0..=8));
        let truth: BTreeSet<String> = (0..rng.random_range(1..4))
            .map(|_| pool[rng.random_range(0..8)].clone())
            .collect();
        let k = rng.random_range(1..10);
        let m = rank_metrics(&ranking, &truth, k).unwrap();
        for v in [
            m.precision_k,
            m.recall_k,
            m.f1_k,
            m.accuracy_top1,
            m.ndcg_k,
            m.mrr,
            m.map_k,
        ] {
            assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
        let mut ideal: Vec<String> = truth.iter().cloned().collect();
        ideal.extend(pool.iter().filter(|p| !truth.contains(*p)).cloned());
        assert!((rank_metrics(&ideal, &truth, k).unwrap().ndcg_k - 1.0).abs() < 1e-12);
    }
}

#[test]
fn traversal_output_is_anomalous_ancestry() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..40 {
        let dag = sample_graph(&GraphSpec::erdos_renyi(7, 2.0, seed)).unwrap();
        let scores = AnomalyScores {
            method: AnomalyMethod::RobustZ,
            nodes: dag.nodes().to_vec(),
            scores: (0..7).map(|_| rng.random_range(0.0..6.0)).collect(),
            flagged: vec![],
        };
        let t = rng.random_range(0..7);
        let r = rca_traversal(&dag, &scores, &dag.nodes()[t], 3.0).unwrap();
        let mut allowed = dag.ancestors(t);
        allowed.insert(t);
        for n in &r.ranking {
            let i = dag.graph().index(&n.node).unwrap();
            assert!(allowed.contains(&i) && n.score >= 3.0);
        }
        assert!(r.ranking.windows(2).all(|w| w[0].score >= w[1].score));
    }
}

fn single_soft_case(d: usize, magnitude: f64, n_normal: usize, seed: u64) -> BenchmarkCase {
    make_benchmark(
        &GraphSpec::erdos_renyi(d, 2.0, seed),
        &MechanismSpec::default(),
        &InterventionSpec {
            mode: InterventionMode::Soft,
            targets: TargetCount::Single,
            magnitude,
            n_anomalies: 1,
            seed: seed + 7,
        },
        n_normal,
    )
    .unwrap()
}

#[test]
fn benchmark_harness_rows() {
    let case = single_soft_case(5, 8.0, 2_000, 1);
    let (rows, rankings) = run_benchmark(&case, "c1", &BenchMethod::ALL, 3).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rankings.len(), 3);
    for r in &rows {
        let line = r.csv_line();
        assert_eq!(line.split(',').count(), BENCH_CSV_HEADER.split(',').count());
        assert!(line.starts_with("c1,"));
    }
}
