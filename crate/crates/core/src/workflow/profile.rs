use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Unknown,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::Unknown => "unknown",
        }
    }
}

/// Coarse dataset characteristics driving method recommendation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub n: usize,
    pub d: usize,
    pub fraction_continuous: f64,
    pub gaussian: Verdict,
    pub linear: Verdict,
    pub missing_fraction: f64,
}

/// Level of the per-column Jarque-Bera normality test.
pub const NORMALITY_ALPHA: f64 = 0.05;
/// Mean R² improvement of the tanh basis over the linear fit above which
/// the data is called nonlinear.
pub const LINEARITY_GAP: f64 = 0.01;
/// Pairs whose better fit explains less than this are ignored.
const MIN_PAIR_R2: f64 = 0.05;
const MAX_PAIRS: usize = 45;
const PAIR_SEED: u64 = 0x5eed;
const MIN_ROWS: usize = 8;

pub fn profile(ds: &Dataset) -> DatasetProfile {
    let n = ds.n_rows();
    let d = ds.n_cols();
    let cont: Vec<usize> = (0..d)
        .filter(|&j| ds.columns()[j].kind == ColumnKind::Continuous)
        .collect();
    let cells = (n * d).max(1);
    DatasetProfile {
        n,
        d,
        fraction_continuous: if d == 0 {
            0.0
        } else {
            cont.len() as f64 / d as f64
        },
        gaussian: gaussianity(ds, &cont),
        linear: linearity(ds, &cont),
        missing_fraction: ds.missing_cells() as f64 / cells as f64,
    }
}

fn gaussianity(ds: &Dataset, cont: &[usize]) -> Verdict {
    let (mut yes, mut no) = (0, 0);
    for &j in cont {
        let xs: Vec<f64> = ds.column_cells(j).into_iter().flatten().collect();
        if xs.len() < MIN_ROWS || stats::std_dev(&xs) == 0.0 {
            continue;
        }
        if jarque_bera_p(&xs) >= NORMALITY_ALPHA {
            yes += 1;
        } else {
            no += 1;
        }
    }
    match yes.cmp(&no) {
        std::cmp::Ordering::Greater => Verdict::Yes,
        std::cmp::Ordering::Less => Verdict::No,
        std::cmp::Ordering::Equal => Verdict::Unknown,
    }
}

/// JB = n/6 (S^2 + K^2/4) is chi-square with 2 df under normality, whose
/// survival function is exp(-x/2).
pub fn jarque_bera_p(xs: &[f64]) -> f64 {
    let s = stats::skewness(xs);
    let k = stats::excess_kurtosis(xs);
    let jb = xs.len() as f64 / 6.0 * (s * s + k * k / 4.0);
    (-jb / 2.0).exp()
}

fn linearity(ds: &Dataset, cont: &[usize]) -> Verdict {
    let mut pairs = Vec::new();
    for (a, &i) in cont.iter().enumerate() {
        for &j in &cont[a + 1..] {
            pairs.push((i, j));
        }
    }
    if pairs.len() > MAX_PAIRS {
        let mut rng = crate::sim::rng_from(PAIR_SEED);
        let mut picked = index::sample(&mut rng, pairs.len(), MAX_PAIRS).into_vec();
        picked.sort_unstable();
        pairs = picked.into_iter().map(|p| pairs[p]).collect();
    }
    let mut gaps = Vec::new();
    for (i, j) in pairs {
        let rows: Vec<(f64, f64)> = (0..ds.n_rows())
            .filter_map(|r| Some((ds.get(r, i)?, ds.get(r, j)?)))
            .collect();
        if rows.len() < MIN_ROWS {
            continue;
        }
        // Both directions: the tanh basis is only natural in the causal one.
        for (x, y) in [
            rows.iter().copied().unzip::<f64, f64, Vec<_>, Vec<_>>(),
            rows.iter().map(|&(a, b)| (b, a)).unzip(),
        ] {
            if let Some((lin, tanh)) = pair_fits(&x, &y) {
                if tanh >= MIN_PAIR_R2 {
                    gaps.push(tanh - lin);
                }
            }
        }
    }
    if gaps.is_empty() {
        return Verdict::Unknown;
    }
    if stats::mean(&gaps) <= LINEARITY_GAP {
        Verdict::Yes
    } else {
        Verdict::No
    }
}

/// R² of y on [1, x] and on [1, x, tanh(x)] with x standardized.
fn pair_fits(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let (mx, sx) = (stats::mean(x), stats::std_dev(x));
    let my = stats::mean(y);
    let tss: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sx == 0.0 || tss == 0.0 {
        return None;
    }
    let z: Vec<f64> = x.iter().map(|v| (v - mx) / sx).collect();
    let r2 = |cols: &[Vec<f64>]| -> Option<f64> {
        let n = y.len();
        let mut m = nalgebra::DMatrix::from_element(n, cols.len() + 1, 1.0);
        for (c, col) in cols.iter().enumerate() {
            m.set_column(c + 1, &nalgebra::DVector::from_column_slice(col));
        }
        let fit = crate::linalg::ols(&m, &nalgebra::DVector::from_column_slice(y)).ok()?;
        Some((1.0 - fit.rss / tss).max(0.0))
    };
    let t: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
    Some((r2(std::slice::from_ref(&z))?, r2(&[z, t])?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CausalGraph, EdgeKind};
    use crate::sim::{scm_from_weighted_graph, MechanismForm, MechanismSpec, NoiseKind};

    fn chain(form: MechanismForm, noise: NoiseKind) -> Dataset {
        let e =
            |a: &str, b: &str, w: f64| (a.to_string(), b.to_string(), EdgeKind::Directed, Some(w));
        let g = CausalGraph::from_edge_list(
            vec!["a".into(), "b".into(), "c".into()],
            &[e("a", "b", 1.5), e("b", "c", -1.2)],
        )
        .unwrap();
        let spec = MechanismSpec {
            form,
            noise,
            ..Default::default()
        };
        scm_from_weighted_graph(&g, &spec)
            .unwrap()
            .sample(4000, 3)
            .unwrap()
    }

    #[test]
    fn jarque_bera_oracle() {
        // Symmetric two-point data: S = 0, K = -2, JB = n/6 * 1.
        let xs: Vec<f64> = (0..60)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert!((jarque_bera_p(&xs) - (-5.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_linear() {
        let p = profile(&chain(MechanismForm::Linear, NoiseKind::Gaussian));
        assert_eq!((p.n, p.d), (4000, 3));
        assert_eq!(p.fraction_continuous, 1.0);
        assert_eq!(p.gaussian, Verdict::Yes);
        assert_eq!(p.linear, Verdict::Yes);
    }

    #[test]
    fn uniform_noise_is_non_gaussian() {
        let p = profile(&chain(MechanismForm::Linear, NoiseKind::Uniform));
        assert_eq!(p.gaussian, Verdict::No);
        assert_eq!(p.linear, Verdict::Yes);
    }

    #[test]
    fn tanh_mechanisms_are_nonlinear() {
        let p = profile(&chain(MechanismForm::Nonlinear, NoiseKind::Gaussian));
        assert_eq!(p.linear, Verdict::No);
    }

    #[test]
    fn independent_columns_give_unknown_linearity() {
        let ds = Dataset::from_columns(
            &["x".into(), "y".into()],
            &[
                (0..50).map(|i| (i as f64).sin()).collect(),
                (0..50).map(|i| ((i * 7) as f64).cos()).collect(),
            ],
        )
        .unwrap();
        let p = profile(&ds);
        assert!(matches!(p.linear, Verdict::Unknown | Verdict::Yes));
    }
}
