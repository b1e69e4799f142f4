use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;

use super::pc::combinations;
use super::{data_matrix, DiscoveryParams};
use crate::data::Dataset;
use crate::graph::{apply_knowledge, to_cpdag, validate_dag, CausalGraph, Dag, Knowledge};
use crate::linalg::mean_and_covariance;
use crate::{Error, Result};

/// Operators must improve the score by more than this to be applied.
const MIN_GAIN: f64 = 1e-9;
/// Above this many candidates, subset enumeration stops at size 3.
const FULL_SUBSET_LIMIT: usize = 10;

/// Decomposable linear-Gaussian BIC, cached per (node, parent set).
struct Scorer {
    n: f64,
    cov: DMatrix<f64>,
    names: Vec<String>,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl Scorer {
    fn new(ds: &Dataset) -> Result<Self> {
        let x = data_matrix(ds, 2)?;
        let (_, cov) = mean_and_covariance(&x);
        Ok(Self {
            n: x.nrows() as f64,
            cov,
            names: ds.names(),
            cache: HashMap::new(),
        })
    }

    fn local(&mut self, j: usize, pa: &BTreeSet<usize>) -> Result<f64> {
        let key = (j, pa.iter().copied().collect::<Vec<_>>());
        if let Some(v) = self.cache.get(&key) {
            return Ok(*v);
        }
        let p = &key.1;
        let mut resid = self.cov[(j, j)];
        if !p.is_empty() {
            let spp = DMatrix::from_fn(p.len(), p.len(), |a, b| self.cov[(p[a], p[b])]);
            let spj = DMatrix::from_fn(p.len(), 1, |a, _| self.cov[(p[a], j)]);
            let chol = spp.cholesky().ok_or_else(|| {
                Error::UndefinedScore(format!("parents of '{}' are collinear", self.names[j]))
            })?;
            resid -= (spj.transpose() * chol.solve(&spj))[(0, 0)];
        }
        if !(resid > 0.0) {
            return Err(Error::UndefinedScore(format!(
                "'{}' is an exact function of its parents",
                self.names[j]
            )));
        }
        let v = -self.n * resid.ln() - p.len() as f64 * self.n.ln();
        self.cache.insert(key, v);
        Ok(v)
    }

    fn total(&mut self, dag: &Dag) -> Result<f64> {
        let mut s = 0.0;
        for j in 0..dag.n_nodes() {
            s += self.local(j, &dag.parents(j).into_iter().collect())?;
        }
        Ok(s)
    }
}

/// BIC of a DAG on the data, `sum_j -n ln(RSS_j / n) - |Pa_j| ln n`.
pub fn bic_score(ds: &Dataset, dag: &Dag) -> Result<f64> {
    Scorer::new(ds)?.total(dag)
}

fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    let max = if items.len() > FULL_SUBSET_LIMIT {
        3
    } else {
        items.len()
    };
    (0..=max).flat_map(|k| combinations(items, k)).collect()
}

fn is_clique(g: &CausalGraph, set: &BTreeSet<usize>) -> bool {
    let v: Vec<usize> = set.iter().copied().collect();
    v.iter()
        .enumerate()
        .all(|(i, &a)| v[i + 1..].iter().all(|&b| g.is_adjacent(a, b)))
}

/// Whether a semi-directed path runs from `from` to `to` avoiding `blocked`.
fn semi_directed_path(g: &CausalGraph, from: usize, to: usize, blocked: &BTreeSet<usize>) -> bool {
    let mut seen = vec![false; g.n_nodes()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        for v in g.children(u).into_iter().chain(g.undirected_neighbors(u)) {
            if v == to {
                return true;
            }
            if !seen[v] && !blocked.contains(&v) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    false
}

/// Consistent DAG extension of a PDAG.
fn extend_to_dag(g: &CausalGraph) -> Option<CausalGraph> {
    let d = g.n_nodes();
    let mut out = g.clone();
    let mut remaining: BTreeSet<usize> = (0..d).collect();
    while !remaining.is_empty() {
        let x = remaining.iter().copied().find(|&x| {
            let sink = g.children(x).iter().all(|c| !remaining.contains(c));
            let adj: Vec<usize> = g
                .adjacent(x)
                .into_iter()
                .filter(|v| remaining.contains(v))
                .collect();
            sink && g
                .undirected_neighbors(x)
                .into_iter()
                .filter(|y| remaining.contains(y))
                .all(|y| adj.iter().all(|&z| z == y || g.is_adjacent(y, z)))
        })?;
        for y in g.undirected_neighbors(x) {
            if remaining.contains(&y) {
                out.orient(y, x);
            }
        }
        remaining.remove(&x);
    }
    Some(out)
}

struct Op {
    gain: f64,
    x: usize,
    y: usize,
    set: Vec<usize>,
}

fn best_insert(
    g: &CausalGraph,
    sc: &mut Scorer,
    names: &[String],
    k: &Knowledge,
) -> Result<Option<Op>> {
    let d = g.n_nodes();
    let mut best: Option<Op> = None;
    for x in 0..d {
        for y in 0..d {
            if x == y || g.is_adjacent(x, y) || k.is_forbidden(&names[x], &names[y]) {
                continue;
            }
            let ne_y = g.undirected_neighbors(y);
            let na: BTreeSet<usize> = ne_y
                .iter()
                .copied()
                .filter(|&v| g.is_adjacent(v, x))
                .collect();
            let t0: Vec<usize> = ne_y
                .iter()
                .copied()
                .filter(|&v| v != x && !g.is_adjacent(v, x))
                .collect();
            let pa: BTreeSet<usize> = g.parents(y).into_iter().collect();
            for t in subsets(&t0) {
                let nat: BTreeSet<usize> = na.iter().chain(&t).copied().collect();
                if !is_clique(g, &nat) || semi_directed_path(g, y, x, &nat) {
                    continue;
                }
                let mut base: BTreeSet<usize> = nat.union(&pa).copied().collect();
                let without = sc.local(y, &base)?;
                base.insert(x);
                let gain = sc.local(y, &base)? - without;
                if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Op { gain, x, y, set: t });
                }
            }
        }
    }
    Ok(best)
}

fn best_delete(
    g: &CausalGraph,
    sc: &mut Scorer,
    names: &[String],
    k: &Knowledge,
) -> Result<Option<Op>> {
    let d = g.n_nodes();
    let mut best: Option<Op> = None;
    for x in 0..d {
        for y in 0..d {
            if x == y
                || !(g.has_directed(x, y) || g.has_undirected(x, y))
                || k.is_required(&names[x], &names[y])
                || k.is_required(&names[y], &names[x])
            {
                continue;
            }
            let na: Vec<usize> = g
                .undirected_neighbors(y)
                .into_iter()
                .filter(|&v| v != x && g.is_adjacent(v, x))
                .collect();
            let pa: BTreeSet<usize> = g.parents(y).into_iter().filter(|&p| p != x).collect();
            for h in subsets(&na) {
                let rest: BTreeSet<usize> = na.iter().copied().filter(|v| !h.contains(v)).collect();
                if !is_clique(g, &rest) {
                    continue;
                }
                let mut base: BTreeSet<usize> = rest.union(&pa).copied().collect();
                let without = sc.local(y, &base)?;
                base.insert(x);
                let gain = without - sc.local(y, &base)?;
                if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Op { gain, x, y, set: h });
                }
            }
        }
    }
    Ok(best)
}

/// Re-extends and re-canonicalizes after an operator.
fn recanonicalize(g: &CausalGraph) -> Result<Dag> {
    let ext = extend_to_dag(g)
        .ok_or_else(|| Error::Numeric("operator produced a non-extendable graph".into()))?;
    validate_dag(&ext)
}

/// GES returning the CPDAG and the total score after each applied operator
/// (the first entry is the starting graph's score).
pub fn ges_with_trace(
    ds: &Dataset,
    params: &DiscoveryParams,
    k: &Knowledge,
) -> Result<(CausalGraph, Vec<f64>)> {
    params.validate()?;
    k.validate()?;
    let names = ds.names();
    k.check_nodes(&names)?;
    let mut sc = Scorer::new(ds)?;

    let mut start = CausalGraph::new(names.iter().cloned())?;
    for (a, b) in &k.required {
        start.add_directed(start.require(a)?, start.require(b)?, None)?;
    }
    let mut dag = validate_dag(&start)?;
    let mut g = to_cpdag(&dag);
    let mut trace = vec![sc.total(&dag)?];

    while let Some(op) = best_insert(&g, &mut sc, &names, k)? {
        g.add_directed(op.x, op.y, None)?;
        for &t in &op.set {
            g.orient(t, op.y);
        }
        dag = recanonicalize(&g)?;
        g = to_cpdag(&dag);
        trace.push(sc.total(&dag)?);
    }
    while let Some(op) = best_delete(&g, &mut sc, &names, k)? {
        g.remove_edge(op.x, op.y);
        for &h in &op.set {
            g.orient(op.y, h);
            if g.has_undirected(op.x, h) {
                g.orient(op.x, h);
            }
        }
        dag = recanonicalize(&g)?;
        g = to_cpdag(&dag);
        trace.push(sc.total(&dag)?);
    }
    if !k.is_empty() {
        g = apply_knowledge(&g, k)?;
    }
    Ok((g, trace))
}

/// Greedy equivalence search (insert and delete phases) with linear-Gaussian BIC.
pub fn ges(ds: &Dataset, params: &DiscoveryParams, k: &Knowledge) -> Result<CausalGraph> {
    ges_with_trace(ds, params, k).map(|r| r.0)
}
