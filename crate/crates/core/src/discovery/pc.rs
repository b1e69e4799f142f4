use std::collections::{BTreeMap, BTreeSet};

use super::ci::FisherZ;
use super::DiscoveryParams;
use crate::data::Dataset;
use crate::graph::{apply_knowledge, meek_closure, CausalGraph, Knowledge};
use crate::Result;

/// k-subsets of `items` in lexicographic order.
pub(crate) fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(
        items: &[usize],
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut cur, &mut out);
    out
}

/// PC-stable with Fisher-z tests. Returns a CPDAG-form graph.
pub fn pc(ds: &Dataset, params: &DiscoveryParams, k: &Knowledge) -> Result<CausalGraph> {
    params.validate()?;
    k.validate()?;
    let names = ds.names();
    k.check_nodes(&names)?;
    let tester = FisherZ::new(ds)?;
    let d = names.len();

    let required_pair = |a: usize, b: usize| {
        k.is_required(&names[a], &names[b]) || k.is_required(&names[b], &names[a])
    };

    let mut adj: Vec<BTreeSet<usize>> = (0..d)
        .map(|i| {
            (0..d)
                .filter(|&j| j != i && k.pair_allowed(&names[i], &names[j]))
                .collect()
        })
        .collect();
    let mut sepsets: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();

    let mut level = 0usize;
    loop {
        if params.max_cond_set.is_some_and(|m| level > m) {
            break;
        }
        let snapshot = adj.clone();
        if !(0..d).any(|i| snapshot[i].len() > level) {
            break;
        }
        for i in 0..d {
            for j in i + 1..d {
                if !adj[i].contains(&j) || required_pair(i, j) {
                    continue;
                }
                let mut found = None;
                for (x, y) in [(i, j), (j, i)] {
                    let pool: Vec<usize> =
                        snapshot[x].iter().copied().filter(|&v| v != y).collect();
                    if pool.len() < level {
                        continue;
                    }
                    for s in combinations(&pool, level) {
                        if tester.test(i, j, &s, params.alpha)?.independent {
                            found = Some(s);
                            break;
                        }
                    }
                    if found.is_some() {
                        break;
                    }
                }
                if let Some(s) = found {
                    adj[i].remove(&j);
                    adj[j].remove(&i);
                    sepsets.insert((i, j), s);
                }
            }
        }
        level += 1;
    }

    let mut g = CausalGraph::new(names.iter().cloned())?;
    for i in 0..d {
        for &j in adj[i].iter().filter(|&&j| j > i) {
            g.add_undirected(i, j, None)?;
        }
    }
    if !k.is_empty() {
        g = apply_knowledge(&g, k)?;
    }

    // Collect v-structure proposals; an edge proposed both ways stays as is.
    let mut proposals: BTreeMap<(usize, usize), BTreeSet<(usize, usize)>> = BTreeMap::new();
    for c in 0..d {
        let nb: Vec<usize> = adj[c].iter().copied().collect();
        for (ai, &a) in nb.iter().enumerate() {
            for &b in &nb[ai + 1..] {
                if adj[a].contains(&b) {
                    continue;
                }
                let sep = sepsets.get(&(a.min(b), a.max(b)));
                if sep.is_some_and(|s| !s.contains(&c)) {
                    for x in [a, b] {
                        proposals
                            .entry((x.min(c), x.max(c)))
                            .or_default()
                            .insert((x, c));
                    }
                }
            }
        }
    }
    for (_, dirs) in proposals {
        if dirs.len() == 1 {
            let (x, c) = *dirs.iter().next().expect("one proposal");
            if g.has_undirected(x, c) {
                g.orient(x, c);
            }
        }
    }

    loop {
        if !k.is_empty() {
            g = apply_knowledge(&g, k)?;
        }
        if meek_closure(&mut g) == 0 {
            break;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(
            combinations(&[1, 3, 5], 2),
            vec![vec![1, 3], vec![1, 5], vec![3, 5]]
        );
        assert_eq!(combinations(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert!(combinations(&[1], 2).is_empty());
    }
}
