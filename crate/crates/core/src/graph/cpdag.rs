use super::{CausalGraph, Dag};

/// Unshielded colliders `(a, c, b)` with `a -> c <- b`, `a < b`, `a` and `b` non-adjacent.
pub fn v_structures(g: &CausalGraph) -> Vec<(usize, usize, usize)> {
    let d = g.n_nodes();
    let mut out = Vec::new();
    for c in 0..d {
        let pa = g.parents(c);
        for (k, &a) in pa.iter().enumerate() {
            for &b in &pa[k + 1..] {
                if !g.is_adjacent(a, b) {
                    out.push((a, c, b));
                }
            }
        }
    }
    out
}

/// Completed partially directed graph of the DAG's Markov equivalence class.
pub fn to_cpdag(dag: &Dag) -> CausalGraph {
    let g = dag.graph();
    let mut out = g.skeleton();
    for (a, c, b) in v_structures(g) {
        out.orient(a, c);
        out.orient(b, c);
    }
    meek_closure(&mut out);
    out
}

/// Whether Meek's rules R1–R4 compel `x -> y` for the undirected edge `x -- y`.
fn compelled(g: &CausalGraph, x: usize, y: usize) -> bool {
    let d = g.n_nodes();
    // R1: z -> x -- y, z and y non-adjacent
    if (0..d).any(|z| z != y && g.has_directed(z, x) && !g.is_adjacent(z, y)) {
        return true;
    }
    // R2: x -> z -> y
    if (0..d).any(|z| g.has_directed(x, z) && g.has_directed(z, y)) {
        return true;
    }
    let und = g.undirected_neighbors(x);
    // R3: x -- z -> y, x -- w -> y, z and w non-adjacent
    for (k, &z) in und.iter().enumerate() {
        if z == y || !g.has_directed(z, y) {
            continue;
        }
        for &w in &und[k + 1..] {
            if w != y && g.has_directed(w, y) && !g.is_adjacent(z, w) {
                return true;
            }
        }
    }
    // R4: x -- z -> w -> y, z and y non-adjacent, x adjacent to w
    for &z in &und {
        if z == y || g.is_adjacent(z, y) {
            continue;
        }
        for w in g.children(z) {
            if w != x && g.has_directed(w, y) && g.is_adjacent(x, w) {
                return true;
            }
        }
    }
    false
}

/// Orients undirected edges by Meek's rules until no rule fires.
///
/// Edges are visited in lexicographic pair order on every sweep, so the
/// result is deterministic. Returns the number of edges oriented.
pub fn meek_closure(g: &mut CausalGraph) -> usize {
    let mut oriented = 0;
    loop {
        let mut changed = false;
        let undirected: Vec<(usize, usize)> =
            g.pairs().filter(|&(a, b)| g.has_undirected(a, b)).collect();
        for (a, b) in undirected {
            if !g.has_undirected(a, b) {
                continue;
            }
            if compelled(g, a, b) {
                g.orient(a, b);
            } else if compelled(g, b, a) {
                g.orient(b, a);
            } else {
                continue;
            }
            changed = true;
            oriented += 1;
        }
        if !changed {
            return oriented;
        }
    }
}
