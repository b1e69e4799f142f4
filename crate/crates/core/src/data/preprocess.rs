use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ColumnKind, ColumnSchema, Dataset, LineageStep};
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Imputation {
    Mean,
    Median,
    Mode,
    DropRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    IntegerCodes,
    OneHot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaler {
    Zscore,
    Robust,
    Minmax,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessPlan {
    pub impute: Imputation,
    /// Columns with a larger missing fraction are dropped.
    pub drop_column_missing_frac: f64,
    /// Rows with a larger missing fraction are dropped.
    pub drop_row_missing_frac: f64,
    pub encode: Encoding,
    pub scaler: Scaler,
}

impl Default for PreprocessPlan {
    fn default() -> Self {
        Self {
            impute: Imputation::Mean,
            drop_column_missing_frac: 0.5,
            drop_row_missing_frac: 0.5,
            encode: Encoding::IntegerCodes,
            scaler: Scaler::None,
        }
    }
}

impl PreprocessPlan {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("drop_column_missing_frac", self.drop_column_missing_frac),
            ("drop_row_missing_frac", self.drop_row_missing_frac),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidSpec(format!("{name} = {f} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Runs drop-columns, drop-rows, impute, encode and scale, in that order.
///
/// Each stage appends one lineage descriptor. Columns that cannot be scaled
/// (zero spread) are left as they are and listed in the scale stage's flags.
pub fn preprocess(ds: &Dataset, plan: &PreprocessPlan) -> Result<Dataset> {
    plan.validate()?;
    let ds = drop_sparse_columns(ds, plan.drop_column_missing_frac)?;
    let ds = drop_sparse_rows(&ds, plan.drop_row_missing_frac)?;
    let ds = impute(&ds, plan.impute)?;
    let ds = encode(&ds, plan.encode);
    Ok(scale(&ds, plan.scaler))
}

fn drop_sparse_columns(ds: &Dataset, max_frac: f64) -> Result<Dataset> {
    let n = ds.n_rows() as f64;
    let (keep, dropped): (Vec<usize>, Vec<usize>) =
        (0..ds.n_cols()).partition(|&j| ds.columns()[j].missing_count as f64 / n <= max_frac);
    if keep.is_empty() {
        return Err(Error::EmptyOutput("column"));
    }
    let mut out = ds.select_columns(&keep);
    out.push_lineage(LineageStep {
        stage: "drop-columns".into(),
        detail: json!({
            "max_missing_frac": max_frac,
            "dropped": dropped.iter().map(|&j| ds.columns()[j].name.clone()).collect::<Vec<_>>(),
        }),
        flags: vec![],
    });
    Ok(out)
}

fn drop_sparse_rows(ds: &Dataset, max_frac: f64) -> Result<Dataset> {
    let d = ds.n_cols() as f64;
    let keep: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| {
            let miss = (0..ds.n_cols()).filter(|&j| ds.is_missing(i, j)).count();
            miss as f64 / d <= max_frac
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyOutput("row"));
    }
    let dropped = ds.n_rows() - keep.len();
    let mut out = ds.select_rows(&keep);
    out.push_lineage(LineageStep {
        stage: "drop-rows".into(),
        detail: json!({ "max_missing_frac": max_frac, "dropped": dropped }),
        flags: vec![],
    });
    Ok(out)
}

fn mode(values: &[f64]) -> f64 {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v.to_bits()).or_default() += 1;
    }
    // highest count; ties go to the smallest value
    let mut best: Option<(usize, f64)> = None;
    for (bits, c) in counts {
        let v = f64::from_bits(bits);
        match best {
            Some((bc, bv)) if c < bc || (c == bc && v >= bv) => {}
            _ => best = Some((c, v)),
        }
    }
    best.map_or(0.0, |(_, v)| v)
}

fn impute(ds: &Dataset, how: Imputation) -> Result<Dataset> {
    let n = ds.n_rows();
    let d = ds.n_cols();
    if how == Imputation::DropRows {
        let keep: Vec<usize> = (0..n)
            .filter(|&i| (0..d).all(|j| !ds.is_missing(i, j)))
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptyOutput("row"));
        }
        let mut out = ds.select_rows(&keep);
        out.push_lineage(LineageStep {
            stage: "impute".into(),
            detail: json!({ "method": "drop-rows", "dropped": n - keep.len() }),
            flags: vec![],
        });
        return Ok(out);
    }

    let mut fills = serde_json::Map::new();
    let mut flags = Vec::new();
    let mut values = Vec::with_capacity(n * d);
    let mut fill_for = Vec::with_capacity(d);
    for (j, col) in ds.columns().iter().enumerate() {
        if col.missing_count == 0 {
            fill_for.push(None);
            continue;
        }
        let present = ds.column_values(j);
        if present.is_empty() {
            return Err(Error::Input(format!(
                "column '{}' has no values to impute from",
                col.name
            )));
        }
        let effective = match (col.kind, how) {
            (ColumnKind::Categorical, Imputation::Mean | Imputation::Median) => {
                flags.push(format!("{}: categorical, imputed by mode", col.name));
                Imputation::Mode
            }
            (_, h) => h,
        };
        let fill = match effective {
            Imputation::Mean => stats::mean(&present),
            Imputation::Median => stats::median(&present),
            _ => mode(&present),
        };
        fills.insert(col.name.clone(), json!(fill));
        fill_for.push(Some(fill));
    }
    for i in 0..n {
        for (j, fill) in fill_for.iter().enumerate() {
            values.push(ds.get(i, j).or(*fill).unwrap_or(0.0));
        }
    }
    let method = match how {
        Imputation::Mean => "mean",
        Imputation::Median => "median",
        _ => "mode",
    };
    let mut out = Dataset::from_parts(
        ds.columns().to_vec(),
        n,
        values,
        vec![false; n * d],
        ds.lineage().to_vec(),
    );
    out.push_lineage(LineageStep {
        stage: "impute".into(),
        detail: json!({ "method": method, "fill_values": fills }),
        flags,
    });
    Ok(out)
}

fn encode(ds: &Dataset, how: Encoding) -> Dataset {
    let categorical: Vec<String> = ds
        .columns()
        .iter()
        .filter(|c| c.kind == ColumnKind::Categorical)
        .map(|c| c.name.clone())
        .collect();
    let step = |method: &str| LineageStep {
        stage: "encode".into(),
        detail: json!({ "method": method, "columns": categorical }),
        flags: vec![],
    };
    if how == Encoding::IntegerCodes || categorical.is_empty() {
        let mut out = ds.clone();
        out.push_lineage(step(match how {
            Encoding::IntegerCodes => "integer-codes",
            Encoding::OneHot => "one-hot",
        }));
        return out;
    }

    let n = ds.n_rows();
    let mut columns = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (j, col) in ds.columns().iter().enumerate() {
        match (&col.kind, &col.categories) {
            (ColumnKind::Categorical, Some(cats)) => {
                for (code, cat) in cats.iter().enumerate() {
                    columns.push(ColumnSchema::new(
                        format!("{}={}", col.name, cat),
                        ColumnKind::Continuous,
                        None,
                    ));
                    cols.push(
                        (0..n)
                            .map(|i| f64::from(u8::from(ds.get(i, j) == Some(code as f64))))
                            .collect(),
                    );
                }
            }
            _ => {
                columns.push(col.clone());
                cols.push((0..n).map(|i| ds.get(i, j).unwrap_or(0.0)).collect());
            }
        }
    }
    let d = columns.len();
    let mut values = vec![0.0; n * d];
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            values[i * d + j] = *v;
        }
    }
    let mut out = Dataset::from_parts(
        columns,
        n,
        values,
        vec![false; n * d],
        ds.lineage().to_vec(),
    );
    out.push_lineage(step("one-hot"));
    out
}

fn scale(ds: &Dataset, how: Scaler) -> Dataset {
    let n = ds.n_rows();
    let d = ds.n_cols();
    let mut out = ds.clone();
    let mut flags = Vec::new();
    let mut params = serde_json::Map::new();
    if how != Scaler::None {
        for (j, col) in ds.columns().iter().enumerate() {
            if col.kind != ColumnKind::Continuous {
                continue;
            }
            let xs = ds.column_values(j);
            let (center, spread) = match how {
                Scaler::Zscore => (stats::mean(&xs), stats::std_dev(&xs)),
                Scaler::Robust => {
                    let s = stats::sorted(&xs);
                    let iqr = stats::quantile_sorted(&s, 0.75) - stats::quantile_sorted(&s, 0.25);
                    (stats::quantile_sorted(&s, 0.5), iqr)
                }
                Scaler::Minmax => {
                    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi - lo)
                }
                Scaler::None => unreachable!(),
            };
            if !(spread > 0.0) || !spread.is_finite() {
                flags.push(format!("{}: zero spread, left unscaled", col.name));
                continue;
            }
            params.insert(
                col.name.clone(),
                json!({ "center": center, "scale": spread }),
            );
            for i in 0..n {
                let k = i * d + j;
                if !out.missing[k] {
                    out.values[k] = (out.values[k] - center) / spread;
                }
            }
        }
        out.refresh_counts();
    }
    let method = match how {
        Scaler::Zscore => "zscore",
        Scaler::Robust => "robust",
        Scaler::Minmax => "minmax",
        Scaler::None => "none",
    };
    out.push_lineage(LineageStep {
        stage: "scale".into(),
        detail: json!({ "method": method, "columns": params }),
        flags,
    });
    out
}
