use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng_from;
use crate::graph::{validate_dag, CausalGraph, Dag};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum GraphModel {
    /// Each pair is an edge with probability `expected_degree / (d - 1)`.
    ErdosRenyi { expected_degree: f64 },
    /// Preferential attachment grown from an `attachment_m` clique.
    ScaleFree { attachment_m: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    #[serde(flatten)]
    pub model: GraphModel,
    pub d: usize,
    pub seed: u64,
}

impl GraphSpec {
    pub fn erdos_renyi(d: usize, expected_degree: f64, seed: u64) -> Self {
        Self {
            model: GraphModel::ErdosRenyi { expected_degree },
            d,
            seed,
        }
    }

    pub fn scale_free(d: usize, attachment_m: usize, seed: u64) -> Self {
        Self {
            model: GraphModel::ScaleFree { attachment_m },
            d,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidSpec(format!(
                "d = {} must be at least 2",
                self.d
            )));
        }
        match self.model {
            GraphModel::ErdosRenyi { expected_degree: k } => {
                if !(k >= 0.0 && k <= (self.d - 1) as f64) {
                    return Err(Error::InvalidSpec(format!(
                        "expected degree {k} outside [0, d - 1]"
                    )));
                }
            }
            GraphModel::ScaleFree { attachment_m: m } => {
                if m < 1 || m >= self.d {
                    return Err(Error::InvalidSpec(format!(
                        "attachment m = {m} requires 1 <= m < d"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Samples a DAG over `x0..x{d-1}`.
///
/// A seeded permutation assigns labels to generation slots; edges run from the
/// earlier slot to the later one.
pub fn sample_graph(spec: &GraphSpec) -> Result<Dag> {
    spec.validate()?;
    let d = spec.d;
    let mut rng = rng_from(spec.seed);
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(&mut rng);
    let mut slot_edges = Vec::new();
    match spec.model {
        GraphModel::ErdosRenyi { expected_degree } => {
            let p = expected_degree / (d - 1) as f64;
            for a in 0..d {
                for b in a + 1..d {
                    if rng.random::<f64>() < p {
                        slot_edges.push((a, b));
                    }
                }
            }
        }
        GraphModel::ScaleFree { attachment_m: m } => {
            let mut degree = vec![0usize; d];
            for a in 0..m {
                for b in a + 1..m {
                    slot_edges.push((a, b));
                    degree[a] += 1;
                    degree[b] += 1;
                }
            }
            for v in m..d {
                let mut chosen: Vec<usize> = Vec::with_capacity(m);
                while chosen.len() < m {
                    let pool: Vec<usize> = (0..v).filter(|u| !chosen.contains(u)).collect();
                    let total: usize = pool.iter().map(|&u| degree[u]).sum();
                    let pick = if total == 0 {
                        pool[rng.random_range(0..pool.len())]
                    } else {
                        let mut r = rng.random_range(0..total);
                        let mut out = pool[pool.len() - 1];
                        for &u in &pool {
                            if r < degree[u] {
                                out = u;
                                break;
                            }
                            r -= degree[u];
                        }
                        out
                    };
                    chosen.push(pick);
                }
                chosen.sort_unstable();
                for u in chosen {
                    slot_edges.push((u, v));
                    degree[u] += 1;
                    degree[v] += 1;
                }
            }
        }
    }
    let mut g = CausalGraph::empty_numbered(d);
    for (a, b) in slot_edges {
        g.add_directed(perm[a], perm[b], None)?;
    }
    validate_dag(&g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(GraphSpec::erdos_renyi(1, 0.0, 0).validate().is_err());
        assert!(GraphSpec::erdos_renyi(5, 4.5, 0).validate().is_err());
        assert!(GraphSpec::erdos_renyi(5, 4.0, 0).validate().is_ok());
        assert!(GraphSpec::scale_free(5, 5, 0).validate().is_err());
        assert!(GraphSpec::scale_free(5, 0, 0).validate().is_err());
    }

    #[test]
    fn two_nodes_degree_one_is_single_edge() {
        let dag = sample_graph(&GraphSpec::erdos_renyi(2, 1.0, 42)).unwrap();
        assert_eq!(dag.graph().n_edges(), 1);
    }

    #[test]
    fn zero_degree_is_empty() {
        let dag = sample_graph(&GraphSpec::erdos_renyi(8, 0.0, 1)).unwrap();
        assert_eq!(dag.graph().n_edges(), 0);
    }

    #[test]
    fn complete_er_is_tournament() {
        let dag = sample_graph(&GraphSpec::erdos_renyi(6, 5.0, 1)).unwrap();
        assert_eq!(dag.graph().n_edges(), 15);
    }

    #[test]
    fn scale_free_edge_count() {
        for (d, m) in [(10, 1), (10, 2), (20, 3), (5, 4)] {
            let dag = sample_graph(&GraphSpec::scale_free(d, m, 7)).unwrap();
            assert_eq!(
                dag.graph().n_edges(),
                m * (m - 1) / 2 + m * (d - m),
                "d={d} m={m}"
            );
        }
    }

    #[test]
    fn seeded_reproducibility() {
        let s = GraphSpec::erdos_renyi(15, 2.0, 11);
        assert_eq!(sample_graph(&s).unwrap(), sample_graph(&s).unwrap());
    }

    #[test]
    fn serde_shape() {
        let s = GraphSpec::scale_free(10, 2, 3);
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["model"], "scale-free");
        assert_eq!(v["attachment_m"], 2);
        let back: GraphSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }
}
