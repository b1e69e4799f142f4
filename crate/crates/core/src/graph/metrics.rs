use serde::{Deserialize, Serialize};

use super::CausalGraph;
use crate::{Error, Result};

/// Structural Hamming distance and its normalization by the number of node pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shd {
    pub shd: usize,
    pub normalized: f64,
}

/// Pair state from `x`'s perspective: none, x→y, y→x, undirected.
fn state(g: &CausalGraph, x: usize, y: usize) -> u8 {
    if g.has_directed(x, y) {
        1
    } else if g.has_directed(y, x) {
        2
    } else if g.has_undirected(x, y) {
        3
    } else {
        0
    }
}

/// Counts unordered pairs whose edge status differs. Every mismatch costs one:
/// a missing or extra edge, a flipped orientation, or directed vs undirected.
/// Nodes are matched by label, so the two graphs may list them in different orders.
pub fn shd(g1: &CausalGraph, g2: &CausalGraph) -> Result<Shd> {
    let d = g1.n_nodes();
    if g2.n_nodes() != d {
        return Err(Error::NodeMismatch(format!(
            "{} vs {} nodes",
            d,
            g2.n_nodes()
        )));
    }
    let mut map = Vec::with_capacity(d);
    for n in g1.nodes() {
        map.push(
            g2.index(n)
                .ok_or_else(|| Error::NodeMismatch(format!("'{n}' missing from second graph")))?,
        );
    }
    let mut count = 0;
    for a in 0..d {
        for b in a + 1..d {
            if state(g1, a, b) != state(g2, map[a], map[b]) {
                count += 1;
            }
        }
    }
    let pairs = d * d.saturating_sub(1) / 2;
    Ok(Shd {
        shd: count,
        normalized: if pairs == 0 {
            0.0
        } else {
            count as f64 / pairs as f64
        },
    })
}
