use causalwb::data::Dataset;
use causalwb::discovery::*;
use causalwb::graph::{shd, to_cpdag, validate_dag, CausalGraph, Knowledge};
use causalwb::sim::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scm(nodes: &[&str], edges: &[(usize, usize, f64)], noise: NoiseKind) -> Scm {
    let mut g = CausalGraph::new(nodes.iter().copied()).unwrap();
    for &(a, b, w) in edges {
        g.add_directed(a, b, Some(w)).unwrap();
    }
    scm_from_weighted_graph(
        &g,
        &MechanismSpec {
            noise,
            ..Default::default()
        },
    )
    .unwrap()
}

fn chain() -> Scm {
    scm(
        &["A", "B", "C"],
        &[(0, 1, 1.0), (1, 2, 1.0)],
        NoiseKind::Gaussian,
    )
}

fn collider() -> Scm {
    scm(
        &["A", "B", "C"],
        &[(0, 2, 1.0), (1, 2, 1.0)],
        NoiseKind::Gaussian,
    )
}

fn truth_cpdag(s: &Scm) -> CausalGraph {
    to_cpdag(&validate_dag(s.weighted_graph()).unwrap())
}

fn params() -> DiscoveryParams {
    DiscoveryParams::default()
}

/// Under the null the test keeps independence with probability 1 - alpha, so
/// the count over seeds is Binomial(seeds, 0.95).
#[test]
fn fisher_z_on_chain() {
    let s = chain();
    let (mut indep_given_b, mut dep_marginal) = (0, 0);
    let seeds = 1000;
    let mut first_hundred = 0;
    for seed in 0..seeds {
        let ds = s.sample(50_000, seed).unwrap();
        let t = FisherZ::new(&ds).unwrap();
        let indep = t.test(0, 2, &[1], 0.05).unwrap().independent as usize;
        indep_given_b += indep;
        if seed < 100 {
            first_hundred += indep;
            dep_marginal += (!t.test(0, 2, &[], 0.05).unwrap().independent) as usize;
        }
    }
    // 99.9% binomial band around 95/100 and 950/1000
    assert!(first_hundred >= 88, "{first_hundred}/100");
    assert!(
        (930..=970).contains(&indep_given_b),
        "{indep_given_b}/{seeds}"
    );
    assert!(dep_marginal >= 99, "{dep_marginal}");
}

#[test]
fn pc_recovers_collider_and_chain() {
    for (s, want) in [(collider(), 45), (chain(), 45)] {
        let truth = truth_cpdag(&s);
        let hits = (0..50)
            .filter(|&seed| {
                let g = pc(
                    &s.sample(20_000, seed).unwrap(),
                    &params(),
                    &Knowledge::default(),
                )
                .unwrap();
                shd(&g, &truth).unwrap().shd == 0
            })
            .count();
        assert!(hits >= want, "{hits}/50");
    }
    let g = pc(
        &chain().sample(20_000, 1).unwrap(),
        &params(),
        &Knowledge::default(),
    )
    .unwrap();
    assert!(g.has_undirected(0, 1) && g.has_undirected(1, 2) && !g.is_adjacent(0, 2));
}

#[test]
fn pc_forbidden_edge_never_appears() {
    let mut k = Knowledge::default();
    k.forbid("A", "C");
    for seed in 0..20 {
        let g = pc(&collider().sample(5_000, seed).unwrap(), &params(), &k).unwrap();
        assert!(!g.has_directed(0, 2));
    }
}

#[test]
fn pc_is_affine_invariant() {
    let ds = sample_graph(&GraphSpec::erdos_renyi(6, 2.0, 3))
        .and_then(|d| attach_mechanisms(&d, &MechanismSpec::default(), 4))
        .and_then(|s| s.sample(2_000, 5))
        .unwrap();
    let scale = [3.0, -0.5, 10.0, 1e-2, 2.0, -7.0];
    let shift = [1.0, 100.0, -5.0, 0.0, 3.0, 1e3];
    let cols: Vec<Vec<f64>> = (0..6)
        .map(|j| {
            ds.column_values(j)
                .iter()
                .map(|v| v * scale[j] + shift[j])
                .collect()
        })
        .collect();
    let ds2 = Dataset::from_columns(&ds.names(), &cols).unwrap();
    let a = pc(&ds, &params(), &Knowledge::default()).unwrap();
    let b = pc(&ds2, &params(), &Knowledge::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ges_recovers_collider() {
    let s = collider();
    let truth = truth_cpdag(&s);
    let hits = (0..50)
        .filter(|&seed| {
            let g = ges(
                &s.sample(20_000, seed).unwrap(),
                &params(),
                &Knowledge::default(),
            )
            .unwrap();
            shd(&g, &truth).unwrap().shd == 0
        })
        .count();
    assert!(hits >= 45, "{hits}/50");
}

#[test]
fn ges_on_independent_columns_is_empty() {
    let dag = validate_dag(&CausalGraph::empty_numbered(5)).unwrap();
    let s = attach_mechanisms(&dag, &MechanismSpec::default(), 0).unwrap();
    let g = ges(
        &s.sample(10_000, 1).unwrap(),
        &params(),
        &Knowledge::default(),
    )
    .unwrap();
    assert_eq!(g.n_edges(), 0);
}

#[test]
fn ges_trace_increases_and_beats_empty() {
    for seed in 0..5 {
        let dag = sample_graph(&GraphSpec::erdos_renyi(7, 2.0, seed)).unwrap();
        let s = attach_mechanisms(&dag, &MechanismSpec::default(), seed).unwrap();
        let ds = s.sample(3_000, seed).unwrap();
        let (_, trace) = ges_with_trace(&ds, &params(), &Knowledge::default()).unwrap();
        assert!(trace.windows(2).all(|w| w[1] > w[0]), "{trace:?}");
        let empty = validate_dag(&CausalGraph::empty_numbered(7)).unwrap();
        assert!(*trace.last().unwrap() >= bic_score(&ds, &empty).unwrap());
    }
}

#[test]
fn notears_two_node_recovery() {
    let s = scm(&["x1", "x2"], &[(0, 1, 2.0)], NoiseKind::Gaussian);
    let wd = notears_linear(&s.sample(10_000, 1).unwrap(), &params()).unwrap();
    let w12 = wd.weight(0, 1);
    assert!((1.8..=2.2).contains(&w12), "{w12}");
    assert_eq!(wd.weight(1, 0), 0.0);
    assert!(wd.converged && wd.h <= 1e-8);
}

/// Central finite differences of the augmented objective.
fn fd_check(obj: &NotearsObjective, p: &[f64], rho: f64, alpha: f64) -> f64 {
    let (_, g) = obj.value_grad(p, rho, alpha);
    let mut worst: f64 = 0.0;
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let eps = 1e-6 * p[k].abs().max(1.0);
        q[k] = p[k] + eps;
        let fp = obj.value_grad(&q, rho, alpha).0;
        q[k] = p[k] - eps;
        let fm = obj.value_grad(&q, rho, alpha).0;
        q[k] = p[k];
        let fd = (fp - fm) / (2.0 * eps);
        worst = worst.max((g[k] - fd).abs() / fd.abs().max(1.0));
    }
    worst
}

#[test]
fn notears_gradient_matches_finite_differences() {
    let dag = sample_graph(&GraphSpec::erdos_renyi(5, 2.0, 1)).unwrap();
    let ds = attach_mechanisms(&dag, &MechanismSpec::default(), 2)
        .unwrap()
        .sample(500, 3)
        .unwrap();
    let obj = NotearsObjective::new(&ds, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let p: Vec<f64> = (0..obj.n_params())
            .map(|_| rng.random_range(0.0..0.5))
            .collect();
        let err = fd_check(&obj, &p, 10.0, 0.5);
        assert!(err <= 1e-5, "{err}");
    }
}

#[test]
fn notears_output_is_acyclic_when_converged() {
    for seed in 0..4 {
        let dag = sample_graph(&GraphSpec::erdos_renyi(6, 2.0, seed)).unwrap();
        let s = attach_mechanisms(&dag, &MechanismSpec::default(), seed).unwrap();
        let wd = notears_linear(&s.sample(2_000, seed).unwrap(), &params()).unwrap();
        if wd.converged {
            assert!(validate_dag(wd.graph()).is_ok());
            assert!(wd.h <= 1e-8);
        }
    }
}

#[test]
fn lingam_two_node() {
    let s = scm(&["x1", "x2"], &[(0, 1, 0.8)], NoiseKind::Uniform);
    let hits = (0..50)
        .filter(|&seed| {
            let wd = direct_lingam(&s.sample(20_000, seed).unwrap(), &params()).unwrap();
            wd.causal_order == Some(vec![0, 1]) && (0.72..=0.88).contains(&wd.weight(0, 1))
        })
        .count();
    assert!(hits >= 45, "{hits}/50");
}

#[test]
fn lingam_order_is_permutation_equivariant() {
    let s = scm(
        &["a", "b", "c", "d"],
        &[(0, 1, 1.0), (1, 2, -0.8), (2, 3, 1.2)],
        NoiseKind::Uniform,
    );
    let ds = s.sample(5_000, 7).unwrap();
    let rev = ds.select_columns(&[3, 2, 1, 0]);
    let a = direct_lingam(&ds, &params()).unwrap().causal_order.unwrap();
    let b = direct_lingam(&rev, &params())
        .unwrap()
        .causal_order
        .unwrap();
    let la: Vec<&str> = a
        .iter()
        .map(|&i| ds.names()[i].clone().leak() as &str)
        .collect();
    let lb: Vec<&str> = b
        .iter()
        .map(|&i| rev.names()[i].clone().leak() as &str)
        .collect();
    assert_eq!(la, lb);
}

#[test]
fn lingam_four_node_chain_order() {
    let s = scm(
        &["a", "b", "c", "d"],
        &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)],
        NoiseKind::Uniform,
    );
    let hits = (0..50)
        .filter(|&seed| {
            direct_lingam(&s.sample(20_000, seed).unwrap(), &params())
                .unwrap()
                .causal_order
                == Some(vec![0, 1, 2, 3])
        })
        .count();
    assert!(hits >= 40, "{hits}/50");
}

#[test]
fn knowledge_contract_with_random_constraints() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..12u64 {
        let dag = sample_graph(&GraphSpec::erdos_renyi(6, 2.0, case)).unwrap();
        let s = attach_mechanisms(&dag, &MechanismSpec::default(), case).unwrap();
        let ds = s.sample(3_000, case).unwrap();
        let names = ds.names();
        let mut k = Knowledge::default();
        // required edges follow index order so they are jointly acyclic
        for _ in 0..2 {
            let (a, b) = (rng.random_range(0..6), rng.random_range(0..6));
            if a < b {
                k.require(&names[a], &names[b]);
            }
        }
        for _ in 0..3 {
            let (a, b) = (rng.random_range(0..6), rng.random_range(0..6));
            if a != b && !k.is_required(&names[a], &names[b]) {
                k.forbid(&names[a], &names[b]);
            }
        }
        for method in [
            Method::Pc,
            Method::Ges,
            Method::Notears,
            Method::DirectLingam,
        ] {
            let g = match discover(&ds, method, &params(), &k) {
                Ok(r) => r.graph,
                Err(causalwb::Error::Knowledge(_)) => continue,
                Err(e) => panic!("{method:?}: {e}"),
            };
            for (a, b) in &k.forbidden {
                assert!(
                    !g.has_directed(g.require(a).unwrap(), g.require(b).unwrap()),
                    "{method:?}"
                );
            }
            for (a, b) in &k.required {
                assert!(
                    g.has_directed(g.require(a).unwrap(), g.require(b).unwrap()),
                    "{method:?}"
                );
            }
        }
    }
}

#[test]
fn discovery_is_deterministic() {
    let dag = sample_graph(&GraphSpec::erdos_renyi(6, 2.0, 5)).unwrap();
    let s = attach_mechanisms(&dag, &MechanismSpec::default(), 5).unwrap();
    let ds = s.sample(2_000, 5).unwrap();
    for method in [
        Method::Pc,
        Method::Ges,
        Method::Notears,
        Method::DirectLingam,
    ] {
        let a = discover(&ds, method, &params(), &Knowledge::default()).unwrap();
        let b = discover(&ds, method, &params(), &Knowledge::default()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn weight_matrix_matches_graph() {
    let s = scm(
        &["x1", "x2", "x3"],
        &[(0, 1, 1.5), (1, 2, -1.0)],
        NoiseKind::Uniform,
    );
    let wd = direct_lingam(&s.sample(10_000, 2).unwrap(), &params()).unwrap();
    let w: &DMatrix<f64> = &wd.weights;
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(w[(i, j)] != 0.0, wd.graph().has_directed(i, j));
        }
    }
}
