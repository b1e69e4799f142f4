use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CausalGraph, EdgeKind};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFormat {
    Json,
    Dot,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    nodes: Vec<String>,
    edges: Vec<EdgeJson>,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    from: String,
    to: String,
    kind: EdgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

impl From<&CausalGraph> for GraphJson {
    fn from(g: &CausalGraph) -> Self {
        GraphJson {
            nodes: g.nodes().to_vec(),
            edges: g
                .edges()
                .into_iter()
                .map(|e| EdgeJson {
                    from: g.label(e.from).to_string(),
                    to: g.label(e.to).to_string(),
                    kind: e.kind,
                    weight: e.weight,
                })
                .collect(),
        }
    }
}

impl TryFrom<GraphJson> for CausalGraph {
    type Error = crate::Error;

    fn try_from(j: GraphJson) -> Result<Self> {
        let edges: Vec<_> = j
            .edges
            .into_iter()
            .map(|e| (e.from, e.to, e.kind, e.weight))
            .collect();
        CausalGraph::from_edge_list(j.nodes, &edges)
    }
}

impl Serialize for CausalGraph {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CausalGraph {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = GraphJson::deserialize(d)?;
        CausalGraph::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// `{"nodes": [...], "edges": [{"from", "to", "kind", "weight"?}]}`, pretty-printed.
pub fn to_json(g: &CausalGraph) -> String {
    serde_json::to_string_pretty(&GraphJson::from(g)).expect("graph json is always serializable")
}

pub fn from_json(text: &str) -> Result<CausalGraph> {
    let j: GraphJson = serde_json::from_str(text)?;
    CausalGraph::try_from(j)
}

fn dot_id(label: &str) -> String {
    let plain = label
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(
            label.to_ascii_lowercase().as_str(),
            "graph" | "digraph" | "subgraph" | "node" | "edge" | "strict"
        );
    if plain {
        label.to_string()
    } else {
        format!("\"{}\"", label.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

fn weight_attr(w: Option<f64>) -> String {
    w.map(|w| format!(" [label=\"{w}\"]")).unwrap_or_default()
}

/// Graphviz rendering. Directed edges use `->`; undirected edges are grouped
/// in an `undirected` subgraph and written with `--`.
pub fn to_dot(g: &CausalGraph) -> String {
    let mut out = String::from("digraph G {\n");
    for n in g.nodes() {
        out.push_str(&format!("  {};\n", dot_id(n)));
    }
    let edges = g.edges();
    for e in edges.iter().filter(|e| e.kind == EdgeKind::Directed) {
        out.push_str(&format!(
            "  {} -> {}{};\n",
            dot_id(g.label(e.from)),
            dot_id(g.label(e.to)),
            weight_attr(e.weight)
        ));
    }
    let undirected: Vec<_> = edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Undirected)
        .collect();
    if !undirected.is_empty() {
        out.push_str("  subgraph undirected {\n    edge [dir=none];\n");
        for e in undirected {
            out.push_str(&format!(
                "    {} -- {}{};\n",
                dot_id(g.label(e.from)),
                dot_id(g.label(e.to)),
                weight_attr(e.weight)
            ));
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}
