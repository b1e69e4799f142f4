use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::function::erf::erfc;

use super::{LinearScmFit, RankedCauses};
use crate::sim::rng_from;
use crate::{Error, Result};

/// Above this many nodes Shapley values are estimated from permutations.
pub const EXACT_PLAYER_LIMIT: usize = 10;
pub const MIN_PERMUTATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterfactualParams {
    /// Monte Carlo draws per coalition; `None` uses the closed-form expectation.
    pub monte_carlo: Option<usize>,
    pub seed: u64,
    pub permutations: usize,
}

impl Default for CounterfactualParams {
    fn default() -> Self {
        Self {
            monte_carlo: None,
            seed: 0,
            permutations: MIN_PERMUTATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyAttribution {
    pub phi: Vec<f64>,
    pub g_empty: f64,
    pub g_all: f64,
    pub exact: bool,
}

/// `E|N(a, s²)|`.
fn folded_normal_mean(a: f64, s: f64) -> f64 {
    if s == 0.0 {
        return a.abs();
    }
    let u = a / s;
    s * (2.0 / std::f64::consts::PI).sqrt() * (-u * u / 2.0).exp()
        + a * (1.0 - erfc(u / std::f64::consts::SQRT_2))
}

/// Expected robust-z of the target with the noises in `mask` fixed.
struct Coalitions {
    coef: Vec<f64>,
    eps: Vec<f64>,
    sigma: Vec<f64>,
    scale: f64,
    draws: Option<Vec<Vec<f64>>>,
    cache: HashMap<u64, f64>,
}

impl Coalitions {
    fn value(&mut self, mask: u64) -> f64 {
        if let Some(v) = self.cache.get(&mask) {
            return *v;
        }
        let d = self.coef.len();
        let fixed = |j: usize| mask >> j & 1 == 1;
        let a: f64 = (0..d)
            .filter(|&j| fixed(j))
            .map(|j| self.coef[j] * self.eps[j])
            .sum();
        let v = match &self.draws {
            None => {
                let s2: f64 = (0..d)
                    .filter(|&j| !fixed(j))
                    .map(|j| (self.coef[j] * self.sigma[j]).powi(2))
                    .sum();
                folded_normal_mean(a, s2.sqrt())
            }
            Some(draws) => {
                let total: f64 = draws
                    .iter()
                    .map(|z| {
                        let free: f64 = (0..d)
                            .filter(|&j| !fixed(j))
                            .map(|j| self.coef[j] * self.sigma[j] * z[j])
                            .sum();
                        (a + free).abs()
                    })
                    .sum();
                total / draws.len() as f64
            }
        } / self.scale;
        self.cache.insert(mask, v);
        v
    }
}

fn binomial_weights(d: usize) -> Vec<f64> {
    // s! (d - s - 1)! / d!
    (0..d)
        .map(|s| {
            let mut w = 1.0 / d as f64;
            for k in 1..=s {
                w *= k as f64 / (d - k) as f64;
            }
            w
        })
        .collect()
}

/// Shapley values of each node's noise for the target's expected outlier score.
pub fn shapley_attribution(
    fit: &LinearScmFit,
    sample: &[f64],
    target: usize,
    params: &CounterfactualParams,
) -> Result<ShapleyAttribution> {
    let d = fit.n_nodes();
    if d > 63 {
        return Err(Error::CapExceeded {
            what: "counterfactual attribution".into(),
            detail: format!("{d} nodes; at most 63 supported"),
        });
    }
    if sample.len() != d {
        return Err(Error::Input(format!("sample must have {d} values")));
    }
    let coef = fit.noise_coefficients(target);
    let scale = (0..d)
        .map(|j| (coef[j] * fit.sigma[j]).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut rng = rng_from(params.seed);
    let draws = params.monte_carlo.map(|m| {
        (0..m.max(1))
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    });
    let mut g = Coalitions {
        coef,
        eps: fit.noises(sample),
        sigma: fit.sigma.clone(),
        scale,
        draws,
        cache: HashMap::new(),
    };
    let full = (1u64 << d) - 1;
    let mut phi = vec![0.0; d];
    let exact = d <= EXACT_PLAYER_LIMIT;
    if exact {
        let w = binomial_weights(d);
        for mask in 0..=full {
            let size = mask.count_ones() as usize;
            let base = g.value(mask);
            for (j, p) in phi.iter_mut().enumerate() {
                if mask >> j & 1 == 0 {
                    *p += w[size] * (g.value(mask | 1 << j) - base);
                }
            }
        }
    } else {
        let n_perm = params.permutations.max(MIN_PERMUTATIONS);
        let mut order: Vec<usize> = (0..d).collect();
        for _ in 0..n_perm {
            order.shuffle(&mut rng);
            let mut mask = 0u64;
            let mut prev = g.value(0);
            for &j in &order {
                mask |= 1 << j;
                let cur = g.value(mask);
                phi[j] += cur - prev;
                prev = cur;
            }
        }
        phi.iter_mut().for_each(|p| *p /= n_perm as f64);
    }
    Ok(ShapleyAttribution {
        g_empty: g.value(0),
        g_all: g.value(full),
        phi,
        exact,
    })
}

/// Ranks nodes by their Shapley share of the target's counterfactual outlier score.
pub fn rca_counterfactual(
    fit: &LinearScmFit,
    sample: &[f64],
    target: &str,
    params: &CounterfactualParams,
) -> Result<RankedCauses> {
    let t = fit.dag.graph().require(target)?;
    let attr = shapley_attribution(fit, sample, t, params)?;
    let mut flags = vec![];
    if attr.phi.iter().all(|p| p.abs() < 1e-12) {
        flags.push("degenerate: no node contributes to the target score".into());
    }
    let p = json!({
        "target": target,
        "monte_carlo": params.monte_carlo,
        "seed": params.seed,
        "shapley": if attr.exact { "exact".to_string() } else {
            format!("{} permutations", params.permutations.max(MIN_PERMUTATIONS))
        },
        "g_empty": attr.g_empty,
        "g_all": attr.g_all,
    });
    Ok(RankedCauses::new(
        "counterfactual",
        p,
        fit.nodes().iter().cloned().zip(attr.phi),
        flags,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folded_normal_limits() {
        assert!((folded_normal_mean(0.0, 1.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert_eq!(folded_normal_mean(-3.0, 0.0), 3.0);
        assert!((folded_normal_mean(40.0, 1.0) - 40.0).abs() < 1e-12);
        assert!((folded_normal_mean(-40.0, 1.0) - 40.0).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_over_coalitions_to_one() {
        // sum_s C(d-1, s) w(s) = 1
        for d in 1..8 {
            let w = binomial_weights(d);
            let mut c = 1.0;
            let mut total = 0.0;
            for s in 0..d {
                total += c * w[s];
                c = c * (d - 1 - s) as f64 / (s + 1) as f64;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
