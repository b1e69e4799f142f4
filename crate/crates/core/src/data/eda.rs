use serde::{Deserialize, Serialize};

use super::{ColumnKind, Dataset};
use crate::stats;

/// Per-column descriptive statistics. `None` marks a statistic that is
/// undefined for the column (no values, or categorical data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub kind: ColumnKind,
    pub count: usize,
    pub missing_fraction: f64,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub median: Option<f64>,
    pub mad: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<CategoryCount>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaSummary {
    pub columns: Vec<ColumnStats>,
    /// Pearson correlations over pairwise-complete rows; `None` where undefined.
    pub correlation: Vec<Vec<Option<f64>>>,
    pub histograms: Vec<Histogram>,
}

const MAX_BINS: usize = 200;
const FALLBACK_BINS: usize = 10;

pub fn describe(ds: &Dataset) -> EdaSummary {
    let d = ds.n_cols();
    let n = ds.n_rows();
    let mut columns = Vec::with_capacity(d);
    let mut histograms = Vec::with_capacity(d);
    for (j, col) in ds.columns().iter().enumerate() {
        let xs = ds.column_values(j);
        let missing_fraction = if n == 0 {
            0.0
        } else {
            col.missing_count as f64 / n as f64
        };
        let numeric = col.kind == ColumnKind::Continuous && !xs.is_empty();
        let s = stats::sorted(&xs);
        let when = |v: f64| numeric.then_some(v);
        let categories = col.categories.as_ref().map(|cats| {
            cats.iter()
                .enumerate()
                .map(|(code, label)| CategoryCount {
                    label: label.clone(),
                    count: xs.iter().filter(|v| **v == code as f64).count(),
                })
                .collect()
        });
        columns.push(ColumnStats {
            name: col.name.clone(),
            kind: col.kind,
            count: xs.len(),
            missing_fraction,
            mean: when(stats::mean(&xs)),
            std: when(stats::std_dev(&xs)),
            median: when(stats::quantile_sorted(&s, 0.5)),
            mad: when(stats::mad(&xs)),
            min: when(s.first().copied().unwrap_or(f64::NAN)),
            max: when(s.last().copied().unwrap_or(f64::NAN)),
            q1: when(stats::quantile_sorted(&s, 0.25)),
            q3: when(stats::quantile_sorted(&s, 0.75)),
            categories,
        });
        histograms.push(match (&col.kind, &col.categories) {
            (ColumnKind::Categorical, Some(cats)) => categorical_histogram(&xs, cats.len()),
            _ => histogram(&s),
        });
    }

    let mut correlation = vec![vec![None; d]; d];
    for i in 0..d {
        if ds.columns()[i].kind != ColumnKind::Continuous {
            continue;
        }
        for j in i..d {
            if ds.columns()[j].kind != ColumnKind::Continuous {
                continue;
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = (0..n)
                .filter_map(|r| Some((ds.get(r, i)?, ds.get(r, j)?)))
                .unzip();
            if xs.len() < 2 {
                continue;
            }
            let r = if i == j {
                (stats::variance(&xs) > 0.0).then_some(1.0)
            } else {
                let r = stats::pearson(&xs, &ys);
                r.is_finite().then_some(r.clamp(-1.0, 1.0))
            };
            correlation[i][j] = r;
            correlation[j][i] = r;
        }
    }

    EdaSummary {
        columns,
        correlation,
        histograms,
    }
}

/// Freedman–Diaconis bins over sorted data; ten equal bins when the IQR is zero.
fn histogram(sorted: &[f64]) -> Histogram {
    if sorted.is_empty() {
        return Histogram {
            edges: vec![],
            counts: vec![],
        };
    }
    let n = sorted.len();
    let (mut lo, mut hi) = (sorted[0], sorted[n - 1]);
    let iqr = stats::quantile_sorted(sorted, 0.75) - stats::quantile_sorted(sorted, 0.25);
    let width = 2.0 * iqr / (n as f64).cbrt();
    let bins = if width > 0.0 && hi > lo {
        (((hi - lo) / width).ceil() as usize).clamp(1, MAX_BINS)
    } else {
        FALLBACK_BINS
    };
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let step = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + step * k as f64 })
        .collect();
    let mut counts = vec![0; bins];
    for &x in sorted {
        let k = (((x - lo) / step).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

fn categorical_histogram(codes: &[f64], k: usize) -> Histogram {
    let edges = (0..=k).map(|c| c as f64 - 0.5).collect();
    let mut counts = vec![0; k];
    for c in codes {
        counts[*c as usize] += 1;
    }
    Histogram { edges, counts }
}
