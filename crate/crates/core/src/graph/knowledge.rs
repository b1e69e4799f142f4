use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CausalGraph, EdgeKind};
use crate::{Error, Result};

/// Background knowledge: ordered pairs that must not / must appear as directed edges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Knowledge {
    #[serde(default)]
    pub forbidden: BTreeSet<(String, String)>,
    #[serde(default)]
    pub required: BTreeSet<(String, String)>,
}

/// Incremental change to a [`Knowledge`] set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeDelta {
    #[serde(default)]
    pub forbidden: Vec<(String, String)>,
    #[serde(default)]
    pub required: Vec<(String, String)>,
    #[serde(default)]
    pub remove_forbidden: Vec<(String, String)>,
    #[serde(default)]
    pub remove_required: Vec<(String, String)>,
}

impl Knowledge {
    pub fn is_empty(&self) -> bool {
        self.forbidden.is_empty() && self.required.is_empty()
    }

    pub fn forbid(&mut self, from: &str, to: &str) {
        self.forbidden.insert((from.into(), to.into()));
    }

    pub fn require(&mut self, from: &str, to: &str) {
        self.required.insert((from.into(), to.into()));
    }

    pub fn is_forbidden(&self, from: &str, to: &str) -> bool {
        self.forbidden.contains(&(from.to_string(), to.to_string()))
    }

    pub fn is_required(&self, from: &str, to: &str) -> bool {
        self.required.contains(&(from.to_string(), to.to_string()))
    }

    /// Checks that no pair is both forbidden and required and that the required
    /// edges admit an acyclic extension.
    pub fn validate(&self) -> Result<()> {
        if let Some((a, b)) = self.forbidden.intersection(&self.required).next() {
            return Err(Error::Knowledge(format!(
                "{a} -> {b} is both forbidden and required"
            )));
        }
        for (a, b) in &self.required {
            if a == b {
                return Err(Error::Knowledge(format!("required self-loop on {a}")));
            }
        }
        let labels: BTreeSet<&String> = self.required.iter().flat_map(|(a, b)| [a, b]).collect();
        let mut g = CausalGraph::new(labels.iter().map(|s| s.to_string()))?;
        for (a, b) in &self.required {
            let (ia, ib) = (g.require(a)?, g.require(b)?);
            if g.has_directed(ib, ia) {
                return Err(Error::Knowledge(format!(
                    "required edges {a} -> {b} and {b} -> {a} form a cycle"
                )));
            }
            g.add_directed(ia, ib, None)?;
        }
        if let Some(cyc) = g.directed_cycle() {
            return Err(Error::Knowledge(format!(
                "required edges form a cycle: {}",
                g.labels_of(&cyc).join(" -> ")
            )));
        }
        Ok(())
    }

    pub fn apply_delta(&self, delta: &KnowledgeDelta) -> Result<Knowledge> {
        let mut k = self.clone();
        for p in &delta.remove_forbidden {
            k.forbidden.remove(p);
        }
        for p in &delta.remove_required {
            k.required.remove(p);
        }
        for p in &delta.forbidden {
            k.required.remove(p);
            k.forbidden.insert(p.clone());
        }
        for p in &delta.required {
            k.forbidden.remove(p);
            k.required.insert(p.clone());
        }
        k.validate()?;
        Ok(k)
    }

    /// Errors when the knowledge names a node the graph does not have.
    pub fn check_nodes(&self, nodes: &[String]) -> Result<()> {
        for (a, b) in self.forbidden.iter().chain(&self.required) {
            for n in [a, b] {
                if !nodes.contains(n) {
                    return Err(Error::UnknownNode(n.clone()));
                }
            }
        }
        Ok(())
    }

    /// Whether the unordered pair may be adjacent at all.
    pub(crate) fn pair_allowed(&self, a: &str, b: &str) -> bool {
        !(self.is_forbidden(a, b) && self.is_forbidden(b, a))
    }
}

/// Enforces background knowledge on a graph.
///
/// Forbidden directed edges are removed; forbidden undirected edges are
/// oriented the other way when that direction is allowed, removed otherwise.
/// Required pairs end up directed as required, inserting or re-orienting as
/// needed. Fails when the result has a directed cycle.
pub fn apply_knowledge(g: &CausalGraph, k: &Knowledge) -> Result<CausalGraph> {
    k.validate()?;
    k.check_nodes(g.nodes())?;
    let mut out = g.clone();
    for (a, b) in &k.forbidden {
        let (ia, ib) = (out.require(a)?, out.require(b)?);
        match out.edge(ia, ib) {
            Some(e) if e.kind == EdgeKind::Directed && e.from == ia => {
                out.remove_edge(ia, ib);
            }
            Some(e) if e.kind == EdgeKind::Undirected => {
                if k.is_forbidden(b, a) {
                    out.remove_edge(ia, ib);
                } else {
                    out.orient(ib, ia);
                }
            }
            _ => {}
        }
    }
    for (a, b) in &k.required {
        let (ia, ib) = (out.require(a)?, out.require(b)?);
        if out.is_adjacent(ia, ib) {
            out.orient(ia, ib);
        } else {
            out.add_directed(ia, ib, None)?;
        }
    }
    if let Some(cyc) = out.directed_cycle() {
        return Err(Error::Knowledge(format!(
            "constraints create a directed cycle: {}",
            out.labels_of(&cyc).join(" -> ")
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> CausalGraph {
        CausalGraph::new(["A", "B", "C"]).unwrap()
    }

    #[test]
    fn required_orients_undirected() {
        let mut g = abc();
        g.add_undirected(0, 1, None).unwrap();
        let mut k = Knowledge::default();
        k.require("A", "B");
        let out = apply_knowledge(&g, &k).unwrap();
        assert!(out.has_directed(0, 1));
    }

    #[test]
    fn forbidden_directed_edge_removed() {
        let mut g = abc();
        g.add_edge("A", "B").unwrap();
        let mut k = Knowledge::default();
        k.forbid("A", "B");
        let out = apply_knowledge(&g, &k).unwrap();
        assert!(!out.is_adjacent(0, 1));
    }

    #[test]
    fn forbidden_undirected_edge_orients_away() {
        let mut g = abc();
        g.add_undirected(0, 1, None).unwrap();
        let mut k = Knowledge::default();
        k.forbid("A", "B");
        assert!(apply_knowledge(&g, &k).unwrap().has_directed(1, 0));
        k.forbid("B", "A");
        assert!(!apply_knowledge(&g, &k).unwrap().is_adjacent(0, 1));
    }

    #[test]
    fn opposing_requirements_are_inconsistent() {
        let mut k = Knowledge::default();
        k.require("A", "B");
        k.require("B", "A");
        assert!(matches!(
            apply_knowledge(&abc(), &k),
            Err(Error::Knowledge(_))
        ));
    }

    #[test]
    fn required_edge_closing_a_cycle_is_rejected() {
        let mut g = abc();
        g.add_edge("A", "B").unwrap();
        g.add_edge("B", "C").unwrap();
        let mut k = Knowledge::default();
        k.require("C", "A");
        assert!(matches!(apply_knowledge(&g, &k), Err(Error::Knowledge(_))));
    }

    #[test]
    fn forbidden_and_required_overlap_is_rejected() {
        let mut k = Knowledge::default();
        k.require("A", "B");
        k.forbid("A", "B");
        assert!(k.validate().is_err());
    }

    #[test]
    fn delta_moves_pairs_between_sets() {
        let k = Knowledge::default()
            .apply_delta(&KnowledgeDelta {
                forbidden: vec![("A".into(), "B".into())],
                ..Default::default()
            })
            .unwrap();
        let k = k
            .apply_delta(&KnowledgeDelta {
                required: vec![("A".into(), "B".into())],
                ..Default::default()
            })
            .unwrap();
        assert!(k.is_required("A", "B") && !k.is_forbidden("A", "B"));
    }

    #[test]
    fn unknown_node_rejected() {
        let mut k = Knowledge::default();
        k.forbid("A", "Z");
        assert_eq!(
            apply_knowledge(&abc(), &k),
            Err(Error::UnknownNode("Z".into()))
        );
    }
}
