use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::profile::DatasetProfile;
use crate::data::Dataset;
use crate::discovery::{fisher_z_test, NotearsObjective};
use crate::rca::EXHAUSTIVE_LIMIT;
use crate::{Error, Result};

/// Seconds per formula unit for each measured primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub ci_test: f64,
    pub ols: f64,
    pub notears_inner: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeEstimate {
    pub algorithm: String,
    pub seconds_low: f64,
    pub seconds_mid: f64,
    pub seconds_high: f64,
    pub formula: String,
    pub constant: f64,
}

const PROBE_N: usize = 2000;
const PROBE_D: usize = 5;
const PROBE_REPEATS: u32 = 5;
/// Conditioning-set exponent cap in the PC formula.
pub const PC_DEPTH_CAP: usize = 3;
pub const NOTEARS_OUTER: f64 = 10.0;
pub const NOTEARS_INNER: f64 = 100.0;
const FLOOR: f64 = 1e-12;

fn time<F: FnMut()>(mut f: F) -> f64 {
    f();
    let start = Instant::now();
    for _ in 0..PROBE_REPEATS {
        f();
    }
    start.elapsed().as_secs_f64() / PROBE_REPEATS as f64
}

/// Micro-benchmarks one CI test, one OLS and one inner NOTEARS evaluation.
pub fn calibrate() -> Calibration {
    let mut rng = crate::sim::rng_from(0xca1b);
    let cols: Vec<Vec<f64>> = (0..PROBE_D)
        .map(|_| (0..PROBE_N).map(|_| rng.random::<f64>()).collect())
        .collect();
    let names: Vec<String> = (0..PROBE_D).map(|j| format!("x{j}")).collect();
    let ds = Dataset::from_columns(&names, &cols).expect("probe data");

    // A test recomputes the correlation from the raw columns, so it scales with n.
    let ci = time(|| {
        let _ = fisher_z_test(&ds, 0, 1, &[2], 0.05);
    });
    let x = DMatrix::from_fn(PROBE_N, PROBE_D, |i, j| cols[j][i]);
    let y = DVector::from_fn(PROBE_N, |i, _| cols[0][i] + cols[1][i]);
    let ols = time(|| {
        let _ = crate::linalg::ols(&x, &y);
    });
    let obj = NotearsObjective::new(&ds, 0.1).expect("probe objective");
    let p = vec![0.01; obj.n_params()];
    let inner = time(|| {
        let _ = obj.value_grad(&p, 1.0, 0.0);
    });
    let d = PROBE_D as f64;
    Calibration {
        ci_test: (ci / PROBE_N as f64).max(FLOOR),
        ols: (ols / (PROBE_N as f64 * d * d)).max(FLOOR),
        notears_inner: (inner / (d * d * d)).max(FLOOR),
    }
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|i| i as f64).product()
}

/// Order-of-magnitude runtime from the method's cost formula. Accepts the
/// method tags produced by [`super::recommend`].
pub fn estimate_runtime(
    algo: &str,
    profile: &DatasetProfile,
    calibration: Option<&Calibration>,
) -> Result<RuntimeEstimate> {
    let c = calibration.ok_or(Error::MissingCalibration)?;
    let n = profile.n.max(1) as f64;
    let du = profile.d.max(1);
    let d = du as f64;
    let (formula, constant, units) = match algo {
        "pc" => {
            let depth = du.saturating_sub(2).min(PC_DEPTH_CAP);
            (
                "d^2 * n * 2^min(d-2, 3)",
                c.ci_test,
                d * d * n * 2f64.powi(depth as i32),
            )
        }
        // One OLS per candidate local score, about d iterations.
        "ges" => ("d^3 * n * d", c.ols, d.powi(3) * n * d),
        "notears" => (
            "outer * inner * d^3",
            c.notears_inner,
            NOTEARS_OUTER * NOTEARS_INNER * d.powi(3),
        ),
        "direct_lingam" => ("d^3 * n", c.ols, d.powi(3) * n),
        "rca_cholesky" => {
            if du > EXHAUSTIVE_LIMIT {
                return Err(Error::CapExceeded {
                    what: "exhaustive ordering search".into(),
                    detail: format!("d = {du} > {EXHAUSTIVE_LIMIT}"),
                });
            }
            ("d! * d^2", c.ols, factorial(du) * d * d)
        }
        "rca_cholesky_greedy" => ("d^4", c.ols, d.powi(4)),
        "rca_traversal" => ("n * d", c.ols, n * d),
        "rca_counterfactual" => {
            if du <= crate::rca::EXACT_PLAYER_LIMIT {
                (
                    "n * d^2 + 2^d * d",
                    c.ols,
                    n * d * d + 2f64.powi(du as i32) * d,
                )
            } else {
                ("n * d^2 + 200 * d^2", c.ols, n * d * d + 200.0 * d * d)
            }
        }
        "effect_linear" => ("n * d^2", c.ols, n * d * d),
        other => {
            return Err(Error::InvalidQuery(format!(
                "no runtime formula for '{other}'"
            )))
        }
    };
    let mid = (constant * units).max(FLOOR);
    Ok(RuntimeEstimate {
        algorithm: algo.into(),
        seconds_low: 0.5 * mid,
        seconds_mid: mid,
        seconds_high: 3.0 * mid,
        formula: formula.into(),
        constant,
    })
}
