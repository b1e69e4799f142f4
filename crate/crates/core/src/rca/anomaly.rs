use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::stats;
use crate::{Error, Result};

pub const MIN_NORMAL_ROWS: usize = 30;
/// Scales the MAD to a Gaussian standard deviation.
const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnomalyMethod {
    #[default]
    RobustZ,
    TailLogprob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScores {
    pub method: AnomalyMethod,
    pub nodes: Vec<String>,
    pub scores: Vec<f64>,
    /// Columns whose MAD was zero and fell back to the standard deviation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<String>,
}

impl AnomalyScores {
    pub fn get(&self, node: &str) -> Option<f64> {
        self.nodes
            .iter()
            .position(|n| n == node)
            .map(|i| self.scores[i])
    }
}

/// Scores one sample (aligned with `normal`'s columns) against the normal data.
pub fn anomaly_scores(
    normal: &Dataset,
    sample: &[f64],
    method: AnomalyMethod,
) -> Result<AnomalyScores> {
    if normal.n_rows() < MIN_NORMAL_ROWS {
        return Err(Error::SampleSize {
            n: normal.n_rows(),
            required: MIN_NORMAL_ROWS,
        });
    }
    if sample.len() != normal.n_cols() || sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input(format!(
            "sample must have {} finite values",
            normal.n_cols()
        )));
    }
    let mut scores = Vec::with_capacity(sample.len());
    let mut flagged = Vec::new();
    for (j, &x) in sample.iter().enumerate() {
        let name = &normal.columns()[j].name;
        let col: Vec<f64> = normal.column_cells(j).into_iter().flatten().collect();
        let med = stats::median(&col);
        let score = match method {
            AnomalyMethod::RobustZ => {
                let mut scale = MAD_SCALE * stats::mad(&col);
                if scale == 0.0 {
                    flagged.push(name.clone());
                    scale = stats::std_dev(&col);
                    if scale == 0.0 {
                        return Err(Error::UndefinedScore(format!(
                            "column '{name}' is constant"
                        )));
                    }
                }
                (x - med).abs() / scale
            }
            AnomalyMethod::TailLogprob => {
                let dev = (x - med).abs();
                let tail = col.iter().filter(|v| (*v - med).abs() >= dev).count();
                -((1 + tail) as f64 / (col.len() + 1) as f64).log2()
            }
        };
        scores.push(score);
    }
    Ok(AnomalyScores {
        method,
        nodes: normal.names(),
        scores,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(cols: Vec<Vec<f64>>) -> Dataset {
        let names: Vec<String> = (0..cols.len()).map(|i| format!("c{i}")).collect();
        Dataset::from_columns(&names, &cols).unwrap()
    }

    #[test]
    fn median_sample_scores_zero() {
        let d = ds(vec![
            (0..41).map(|i| i as f64).collect(),
            (0..41).map(|i| (i * i) as f64).collect(),
        ]);
        let med = [20.0, stats::median(&d.column_values(1))];
        for m in [AnomalyMethod::RobustZ, AnomalyMethod::TailLogprob] {
            assert!(anomaly_scores(&d, &med, m)
                .unwrap()
                .scores
                .iter()
                .all(|s| *s == 0.0));
        }
    }

    #[test]
    fn constant_column_is_undefined() {
        let d = ds(vec![vec![2.0; 40]]);
        assert!(matches!(
            anomaly_scores(&d, &[3.0], AnomalyMethod::RobustZ),
            Err(Error::UndefinedScore(_))
        ));
    }

    #[test]
    fn zero_mad_falls_back_to_sd() {
        let mut c = vec![0.0; 40];
        c[0] = 10.0;
        let d = ds(vec![c.clone()]);
        let s = anomaly_scores(&d, &[5.0], AnomalyMethod::RobustZ).unwrap();
        assert_eq!(s.flagged, ["c0"]);
        assert!((s.scores[0] - 5.0 / stats::std_dev(&c)).abs() < 1e-12);
    }

    #[test]
    fn tail_logprob_extreme() {
        let d = ds(vec![(0..63).map(|i| i as f64).collect()]);
        let s = anomaly_scores(&d, &[1e6], AnomalyMethod::TailLogprob).unwrap();
        assert_eq!(s.scores[0], 6.0);
    }

    #[test]
    fn too_few_rows() {
        let d = ds(vec![(0..10).map(|i| i as f64).collect()]);
        assert!(matches!(
            anomaly_scores(&d, &[1.0], AnomalyMethod::RobustZ),
            Err(Error::SampleSize { .. })
        ));
    }
}
