//! Mixed causal graphs and the DAG/CPDAG algebra built on them.
//!
//! A [`CausalGraph`] stores at most one edge per unordered node pair, either
//! directed or undirected, with an optional weight. [`Dag`] is the validated
//! fully-directed acyclic specialization carrying a topological order.

mod cpdag;
mod io;
mod knowledge;
mod metrics;

pub use cpdag::{meek_closure, to_cpdag, v_structures};
pub use io::{from_json, to_dot, to_json, GraphFormat};
pub use knowledge::{apply_knowledge, Knowledge, KnowledgeDelta};
pub use metrics::{shd, Shd};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Directed,
    Undirected,
}

/// An edge in index form. Undirected edges are reported with `from < to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    pub weight: Option<f64>,
}

/// Orientation of a stored pair `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mark {
    Forward,
    Backward,
    Undirected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PairEdge {
    mark: Mark,
    weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalGraph {
    nodes: Vec<String>,
    edges: BTreeMap<(usize, usize), PairEdge>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl CausalGraph {
    pub fn new<S: Into<String>>(nodes: impl IntoIterator<Item = S>) -> Result<Self> {
        let nodes: Vec<String> = nodes.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if n.is_empty() {
                return Err(Error::Input("empty node label".into()));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::Input(format!("duplicate node label '{n}'")));
            }
        }
        Ok(Self {
            nodes,
            edges: BTreeMap::new(),
        })
    }

    /// Graph with no edges over `x0..x{d-1}`.
    pub fn empty_numbered(d: usize) -> Self {
        Self::new((0..d).map(|i| format!("x{i}"))).expect("labels are unique")
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == label)
    }

    pub fn require(&self, label: &str) -> Result<usize> {
        self.index(label)
            .ok_or_else(|| Error::UnknownNode(label.to_string()))
    }

    pub fn label(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        let d = self.nodes.len();
        if a >= d || b >= d {
            return Err(Error::Input(format!("node index out of range ({a}, {b})")));
        }
        if a == b {
            return Err(Error::Input(format!("self-loop on '{}'", self.nodes[a])));
        }
        Ok(())
    }

    /// Inserts `a -> b`, replacing any existing edge between the pair.
    pub fn add_directed(&mut self, a: usize, b: usize, weight: Option<f64>) -> Result<()> {
        self.check_pair(a, b)?;
        let mark = if a < b { Mark::Forward } else { Mark::Backward };
        self.edges.insert(key(a, b), PairEdge { mark, weight });
        Ok(())
    }

    /// Inserts `a -- b`, replacing any existing edge between the pair.
    pub fn add_undirected(&mut self, a: usize, b: usize, weight: Option<f64>) -> Result<()> {
        self.check_pair(a, b)?;
        self.edges.insert(
            key(a, b),
            PairEdge {
                mark: Mark::Undirected,
                weight,
            },
        );
        Ok(())
    }

    /// Label-based convenience for `add_directed`.
    pub fn add_edge(&mut self, from: &str, to: &str) -> Result<()> {
        let (a, b) = (self.require(from)?, self.require(to)?);
        self.add_directed(a, b, None)
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) -> bool {
        self.edges.remove(&key(a, b)).is_some()
    }

    /// Re-orients an existing edge as `a -> b`, keeping its weight.
    pub(crate) fn orient(&mut self, a: usize, b: usize) {
        if let Some(e) = self.edges.get_mut(&key(a, b)) {
            e.mark = if a < b { Mark::Forward } else { Mark::Backward };
        }
    }

    pub(crate) fn mark(&self, a: usize, b: usize) -> Option<Mark> {
        self.edges.get(&key(a, b)).map(|e| e.mark)
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.edges.contains_key(&key(a, b))
    }

    pub fn has_directed(&self, a: usize, b: usize) -> bool {
        matches!(
            (self.mark(a, b), a < b),
            (Some(Mark::Forward), true) | (Some(Mark::Backward), false)
        )
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.mark(a, b) == Some(Mark::Undirected)
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.edges.get(&key(a, b)).and_then(|e| e.weight)
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<Edge> {
        let (lo, hi) = key(a, b);
        self.edges.get(&(lo, hi)).map(|e| to_edge(lo, hi, e))
    }

    /// All edges ordered by their unordered pair.
    pub fn edges(&self) -> Vec<Edge> {
        self.edges
            .iter()
            .map(|(&(lo, hi), e)| to_edge(lo, hi, e))
            .collect()
    }

    /// Unordered adjacent pairs `(lo, hi)`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.keys().copied()
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&i| self.has_directed(i, j))
            .collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&j| self.has_directed(i, j))
            .collect()
    }

    pub fn undirected_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&j| self.has_undirected(i, j))
            .collect()
    }

    pub fn adjacent(&self, i: usize) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&j| j != i && self.is_adjacent(i, j))
            .collect()
    }

    pub fn has_undirected_edges(&self) -> bool {
        self.edges.values().any(|e| e.mark == Mark::Undirected)
    }

    /// Same nodes, every edge kept as undirected.
    pub fn skeleton(&self) -> CausalGraph {
        let mut g = CausalGraph {
            nodes: self.nodes.clone(),
            edges: BTreeMap::new(),
        };
        for (&k, e) in &self.edges {
            g.edges.insert(
                k,
                PairEdge {
                    mark: Mark::Undirected,
                    weight: e.weight,
                },
            );
        }
        g
    }

    /// A directed cycle among the directed edges, if one exists, as node indices
    /// with the first node repeated at the end.
    pub fn directed_cycle(&self) -> Option<Vec<usize>> {
        let d = self.n_nodes();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; d];
        let mut stack: Vec<usize> = Vec::new();
        fn visit(
            g: &CausalGraph,
            v: usize,
            state: &mut [u8],
            stack: &mut Vec<usize>,
        ) -> Option<Vec<usize>> {
            state[v] = 1;
            stack.push(v);
            for w in g.children(v) {
                if state[w] == 1 {
                    let start = stack.iter().position(|&x| x == w).unwrap();
                    let mut cyc = stack[start..].to_vec();
                    cyc.push(w);
                    return Some(cyc);
                }
                if state[w] == 0 {
                    if let Some(c) = visit(g, w, state, stack) {
                        return Some(c);
                    }
                }
            }
            stack.pop();
            state[v] = 2;
            None
        }
        for v in 0..d {
            if state[v] == 0 {
                if let Some(c) = visit(self, v, &mut state, &mut stack) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Builds a graph from labelled edges. Two opposing directed edges on one
    /// pair are a two-cycle; any other repeated pair is rejected.
    pub fn from_edge_list(
        nodes: Vec<String>,
        edges: &[(String, String, EdgeKind, Option<f64>)],
    ) -> Result<Self> {
        let mut g = Self::new(nodes)?;
        for (from, to, kind, weight) in edges {
            let (a, b) = (g.require(from)?, g.require(to)?);
            if let Some(prev) = g.edge(a, b) {
                if prev.kind == EdgeKind::Directed && *kind == EdgeKind::Directed && prev.from == b
                {
                    return Err(Error::Cycle(vec![to.clone(), from.clone(), to.clone()]));
                }
                return Err(Error::Input(format!(
                    "more than one edge between '{from}' and '{to}'"
                )));
            }
            match kind {
                EdgeKind::Directed => g.add_directed(a, b, *weight)?,
                EdgeKind::Undirected => g.add_undirected(a, b, *weight)?,
            }
        }
        Ok(g)
    }

    pub(crate) fn labels_of(&self, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&i| self.nodes[i].clone()).collect()
    }
}

fn to_edge(lo: usize, hi: usize, e: &PairEdge) -> Edge {
    let (from, to, kind) = match e.mark {
        Mark::Forward => (lo, hi, EdgeKind::Directed),
        Mark::Backward => (hi, lo, EdgeKind::Directed),
        Mark::Undirected => (lo, hi, EdgeKind::Undirected),
    };
    Edge {
        from,
        to,
        kind,
        weight: e.weight,
    }
}

/// A fully directed acyclic graph with a witness topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    graph: CausalGraph,
    order: Vec<usize>,
}

/// Checks that `g` is fully directed and acyclic.
///
/// The witness order is Kahn's algorithm taking the smallest ready index first.
pub fn validate_dag(g: &CausalGraph) -> Result<Dag> {
    if let Some(e) = g
        .edges()
        .into_iter()
        .find(|e| e.kind == EdgeKind::Undirected)
    {
        return Err(Error::EdgeKind(format!(
            "undirected edge {} -- {}",
            g.label(e.from),
            g.label(e.to)
        )));
    }
    let d = g.n_nodes();
    let mut indeg: Vec<usize> = (0..d).map(|j| g.parents(j).len()).collect();
    let mut ready: BTreeSet<usize> = (0..d).filter(|&j| indeg[j] == 0).collect();
    let mut order = Vec::with_capacity(d);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for c in g.children(v) {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() < d {
        let cyc = g.directed_cycle().expect("Kahn stalled so a cycle exists");
        return Err(Error::Cycle(g.labels_of(&cyc)));
    }
    Ok(Dag {
        graph: g.clone(),
        order,
    })
}

impl Dag {
    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn into_graph(self) -> CausalGraph {
        self.graph
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    pub fn nodes(&self) -> &[String] {
        self.graph.nodes()
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        self.graph.parents(j)
    }

    pub fn children(&self, j: usize) -> Vec<usize> {
        self.graph.children(j)
    }

    /// Strict ancestors of `j`.
    pub fn ancestors(&self, j: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = self.parents(j);
        while let Some(v) = stack.pop() {
            if out.insert(v) {
                stack.extend(self.parents(v));
            }
        }
        out
    }

    /// Strict descendants of `j`.
    pub fn descendants(&self, j: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = self.children(j);
        while let Some(v) = stack.pop() {
            if out.insert(v) {
                stack.extend(self.children(v));
            }
        }
        out
    }

    /// Weighted adjacency matrix, `w[i][j]` for `i -> j` (missing weights count as 1).
    pub fn weight_matrix(&self) -> Vec<Vec<f64>> {
        let d = self.n_nodes();
        let mut w = vec![vec![0.0; d]; d];
        for e in self.graph.edges() {
            w[e.from][e.to] = e.weight.unwrap_or(1.0);
        }
        w
    }
}
