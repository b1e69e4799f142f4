//! Equivalence-class oracle for CPDAG conversion and metric properties for SHD.
//!
//! The oracle enumerates every DAG on up to four nodes, groups them by their
//! full set of d-separation statements (moralized ancestral graph criterion),
//! and takes the class-wide agreement on each edge as the expected CPDAG.

use std::collections::{BTreeMap, BTreeSet};

use causalwb::graph::{shd, to_cpdag, validate_dag, CausalGraph, EdgeKind};
use proptest::prelude::*;

fn all_dags(d: usize) -> Vec<CausalGraph> {
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|a| (a + 1..d).map(move |b| (a, b)))
        .collect();
    let mut out = Vec::new();
    let total = 3usize.pow(pairs.len() as u32);
    for code in 0..total {
        let mut g = CausalGraph::empty_numbered(d);
        let mut c = code;
        for &(a, b) in &pairs {
            match c % 3 {
                1 => g.add_directed(a, b, None).unwrap(),
                2 => g.add_directed(b, a, None).unwrap(),
                _ => {}
            }
            c /= 3;
        }
        if g.directed_cycle().is_none() {
            out.push(g);
        }
    }
    out
}

/// d-separation of x and y given z via the moral graph of the ancestral set.
fn d_separated(g: &CausalGraph, x: usize, y: usize, z: &BTreeSet<usize>) -> bool {
    let d = g.n_nodes();
    let mut anc: BTreeSet<usize> = [x, y].into_iter().chain(z.iter().copied()).collect();
    let mut stack: Vec<usize> = anc.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for p in g.parents(v) {
            if anc.insert(p) {
                stack.push(p);
            }
        }
    }
    let mut adj = vec![BTreeSet::new(); d];
    for &v in &anc {
        let pa: Vec<usize> = g
            .parents(v)
            .into_iter()
            .filter(|p| anc.contains(p))
            .collect();
        for &p in &pa {
            adj[p].insert(v);
            adj[v].insert(p);
        }
        for (i, &p) in pa.iter().enumerate() {
            for &q in &pa[i + 1..] {
                adj[p].insert(q);
                adj[q].insert(p);
            }
        }
    }
    let mut seen = BTreeSet::from([x]);
    let mut stack = vec![x];
    while let Some(v) = stack.pop() {
        if v == y {
            return false;
        }
        for &w in &adj[v] {
            if !z.contains(&w) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    true
}

fn independence_signature(g: &CausalGraph) -> Vec<bool> {
    let d = g.n_nodes();
    let mut sig = Vec::new();
    for x in 0..d {
        for y in x + 1..d {
            let rest: Vec<usize> = (0..d).filter(|&v| v != x && v != y).collect();
            for mask in 0..(1usize << rest.len()) {
                let z = rest
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &v)| v)
                    .collect();
                sig.push(d_separated(g, x, y, &z));
            }
        }
    }
    sig
}

/// Class-wide agreement per pair: directed when every member agrees, undirected otherwise.
fn oracle_cpdag(members: &[&CausalGraph]) -> CausalGraph {
    let d = members[0].n_nodes();
    let mut out = CausalGraph::empty_numbered(d);
    for a in 0..d {
        for b in a + 1..d {
            if !members[0].is_adjacent(a, b) {
                continue;
            }
            let fwd = members.iter().all(|g| g.has_directed(a, b));
            let bwd = members.iter().all(|g| g.has_directed(b, a));
            match (fwd, bwd) {
                (true, _) => out.add_directed(a, b, None).unwrap(),
                (_, true) => out.add_directed(b, a, None).unwrap(),
                _ => out.add_undirected(a, b, None).unwrap(),
            }
        }
    }
    out
}

#[test]
fn cpdag_matches_equivalence_class_enumeration() {
    for d in 2..=4 {
        let dags = all_dags(d);
        let mut classes: BTreeMap<Vec<bool>, Vec<&CausalGraph>> = BTreeMap::new();
        for g in &dags {
            classes
                .entry(independence_signature(g))
                .or_default()
                .push(g);
        }
        for members in classes.values() {
            let expected = oracle_cpdag(members);
            for g in members {
                let got = to_cpdag(&validate_dag(g).unwrap());
                assert_eq!(got, expected, "d={d} dag edges {:?}", g.edges());
            }
        }
        if d == 3 {
            // 25 DAGs fall into 11 classes on three labelled nodes
            assert_eq!(dags.len(), 25);
            assert_eq!(classes.len(), 11);
        }
        if d == 4 {
            assert_eq!(dags.len(), 543);
            assert_eq!(classes.len(), 185);
        }
    }
}

#[test]
fn chain_and_collider_cpdags_from_oracle() {
    let dags = all_dags(3);
    let mut classes: BTreeMap<Vec<bool>, Vec<&CausalGraph>> = BTreeMap::new();
    for g in &dags {
        classes
            .entry(independence_signature(g))
            .or_default()
            .push(g);
    }
    let mut chain = CausalGraph::empty_numbered(3);
    chain.add_directed(0, 1, None).unwrap();
    chain.add_directed(1, 2, None).unwrap();
    let class = &classes[&independence_signature(&chain)];
    // chain, reverse chain and fork share the class
    assert_eq!(class.len(), 3);
    let cp = oracle_cpdag(class);
    assert!(cp.edges().iter().all(|e| e.kind == EdgeKind::Undirected));

    let mut collider = CausalGraph::empty_numbered(3);
    collider.add_directed(0, 2, None).unwrap();
    collider.add_directed(1, 2, None).unwrap();
    let class = &classes[&independence_signature(&collider)];
    assert_eq!(class.len(), 1);
    assert_eq!(to_cpdag(&validate_dag(&collider).unwrap()), collider);
}

fn arb_graph(d: usize) -> impl Strategy<Value = CausalGraph> {
    proptest::collection::vec(0u8..4, d * (d - 1) / 2).prop_map(move |states| {
        let mut g = CausalGraph::empty_numbered(d);
        let mut k = 0;
        for a in 0..d {
            for b in a + 1..d {
                match states[k] {
                    1 => g.add_directed(a, b, None).unwrap(),
                    2 => g.add_directed(b, a, None).unwrap(),
                    3 => g.add_undirected(a, b, None).unwrap(),
                    _ => {}
                }
                k += 1;
            }
        }
        g
    })
}

proptest! {
    #[test]
    fn shd_is_a_metric(a in arb_graph(5), b in arb_graph(5), c in arb_graph(5)) {
        let ab = shd(&a, &b).unwrap().shd;
        prop_assert_eq!(ab, shd(&b, &a).unwrap().shd);
        prop_assert_eq!(shd(&a, &a).unwrap().shd, 0);
        let ac = shd(&a, &c).unwrap().shd;
        let cb = shd(&c, &b).unwrap().shd;
        prop_assert!(ab <= ac + cb);
        let n = shd(&a, &b).unwrap().normalized;
        prop_assert!((0.0..=1.0).contains(&n));
    }

    #[test]
    fn json_round_trips(g in arb_graph(6)) {
        let back = causalwb::graph::from_json(&causalwb::graph::to_json(&g)).unwrap();
        prop_assert_eq!(back, g);
    }
}
