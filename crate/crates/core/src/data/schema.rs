use std::collections::BTreeSet;

use serde_json::json;

use super::ingest::parse_number;
use super::{format_number, ColumnKind, ColumnSchema, Dataset, LineageStep};
use crate::Result;

/// Integer-valued columns with at most this many distinct values are categorical.
pub const DEFAULT_CATEGORICAL_THRESHOLD: usize = 20;

/// Fraction of non-missing cells that must parse numerically for a column to be continuous.
const NUMERIC_FRACTION: f64 = 0.99;

pub fn infer_schema(ds: &Dataset) -> Vec<ColumnSchema> {
    infer_schema_with(ds, DEFAULT_CATEGORICAL_THRESHOLD)
}

/// Re-derives column kinds.
///
/// A column is continuous when at least 99% of its non-missing cells parse as
/// numbers and it either has more than `threshold` distinct values or carries
/// fractional values. Low-cardinality integer columns (flags, codes) are
/// categorical.
pub fn infer_schema_with(ds: &Dataset, threshold: usize) -> Vec<ColumnSchema> {
    (0..ds.n_cols())
        .map(|j| {
            let col = &ds.columns()[j];
            let numeric = numeric_cells(ds, j);
            let present = ds.n_rows() - col.missing_count;
            let parsed: Vec<f64> = numeric.iter().flatten().copied().collect();
            let distinct = match col.kind {
                ColumnKind::Continuous => col.distinct_count,
                ColumnKind::Categorical => (0..ds.n_rows())
                    .filter_map(|i| ds.get(i, j).map(f64::to_bits))
                    .collect::<BTreeSet<_>>()
                    .len(),
            };
            let numeric_ok =
                present == 0 || parsed.len() as f64 >= NUMERIC_FRACTION * present as f64;
            let fractional = parsed.iter().any(|v| v.fract() != 0.0);
            let kind = if present > 0 && numeric_ok && (distinct > threshold || fractional) {
                ColumnKind::Continuous
            } else {
                ColumnKind::Categorical
            };
            ColumnSchema {
                name: col.name.clone(),
                kind,
                missing_count: col.missing_count,
                distinct_count: distinct,
                categories: None,
            }
        })
        .collect()
}

/// Per-row numeric interpretation of a column (`None` for missing or unparsable cells).
fn numeric_cells(ds: &Dataset, j: usize) -> Vec<Option<f64>> {
    match ds.columns()[j].kind {
        ColumnKind::Continuous => ds.column_cells(j),
        ColumnKind::Categorical => (0..ds.n_rows())
            .map(|i| ds.label(i, j).and_then(|l| parse_number(&l)))
            .collect(),
    }
}

/// Applies [`infer_schema_with`] and converts columns whose kind changed.
///
/// Continuous→categorical columns get one category per distinct value (in
/// numeric order). Categorical→continuous cells that do not parse become
/// missing and are counted in the lineage entry.
pub fn conform_schema(ds: &Dataset, threshold: usize) -> Result<Dataset> {
    let inferred = infer_schema_with(ds, threshold);
    let n = ds.n_rows();
    let d = ds.n_cols();
    let mut columns = Vec::with_capacity(d);
    let mut values = vec![0.0; n * d];
    let mut missing = vec![false; n * d];
    let mut changed = Vec::new();
    let mut flags = Vec::new();

    for (j, target) in inferred.iter().enumerate() {
        let col = &ds.columns()[j];
        let cells: Vec<Option<f64>> = match (col.kind, target.kind) {
            (a, b) if a == b => {
                columns.push(col.clone());
                ds.column_cells(j)
            }
            (_, ColumnKind::Continuous) => {
                let cells = numeric_cells(ds, j);
                let lost = (0..n)
                    .filter(|&i| !ds.is_missing(i, j) && cells[i].is_none())
                    .count();
                if lost > 0 {
                    flags.push(format!(
                        "{}: {lost} non-numeric cells set missing",
                        col.name
                    ));
                }
                changed.push(format!("{} -> continuous", col.name));
                columns.push(ColumnSchema::new(
                    col.name.clone(),
                    ColumnKind::Continuous,
                    None,
                ));
                cells
            }
            (_, ColumnKind::Categorical) => {
                let mut distinct: Vec<f64> = ds.column_values(j);
                distinct.sort_by(f64::total_cmp);
                distinct.dedup();
                let labels: Vec<String> = distinct.iter().map(|v| format_number(*v)).collect();
                changed.push(format!("{} -> categorical", col.name));
                columns.push(ColumnSchema::new(
                    col.name.clone(),
                    ColumnKind::Categorical,
                    Some(labels),
                ));
                ds.column_cells(j)
                    .into_iter()
                    .map(|c| {
                        c.map(|v| distinct.binary_search_by(|x| x.total_cmp(&v)).unwrap() as f64)
                    })
                    .collect()
            }
        };
        for (i, c) in cells.into_iter().enumerate() {
            values[i * d + j] = c.unwrap_or(0.0);
            missing[i * d + j] = c.is_none();
        }
    }

    let mut out = Dataset::from_parts(columns, n, values, missing, ds.lineage().to_vec());
    out.push_lineage(LineageStep {
        stage: "conform-schema".into(),
        detail: json!({ "categorical_threshold": threshold, "changed": changed }),
        flags,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_csv;
    use std::collections::BTreeMap;

    fn load(s: &str) -> Dataset {
        load_csv(s.as_bytes(), &BTreeMap::new()).unwrap()
    }

    #[test]
    fn fractional_column_is_continuous() {
        let s = infer_schema(&load("a\n1.0\n2.5\n3.1"));
        assert_eq!(s[0].kind, ColumnKind::Continuous);
    }

    #[test]
    fn text_column_is_categorical() {
        let s = infer_schema(&load("c\nred\nblue\nred"));
        assert_eq!(s[0].kind, ColumnKind::Categorical);
        assert_eq!(s[0].distinct_count, 2);
    }

    #[test]
    fn binary_flag_is_categorical() {
        let body: String = (0..1000).map(|i| format!("{}\n", i % 2)).collect();
        let ds = load(&format!("flag\n{body}"));
        assert_eq!(ds.columns()[0].kind, ColumnKind::Continuous);
        let s = infer_schema(&ds);
        assert_eq!(s[0].kind, ColumnKind::Categorical);
        assert_eq!(s[0].distinct_count, 2);
    }

    #[test]
    fn wide_integer_column_is_continuous() {
        let body: String = (0..100).map(|i| format!("{i}\n")).collect();
        let s = infer_schema(&load(&format!("x\n{body}")));
        assert_eq!(s[0].kind, ColumnKind::Continuous);
    }

    #[test]
    fn mostly_numeric_text_column_converts() {
        let mut body: String = (0..199).map(|i| format!("{}.5\n", i)).collect();
        body.push_str("oops\n");
        let ds = load(&format!("x\n{body}"));
        assert_eq!(ds.columns()[0].kind, ColumnKind::Categorical);
        let conformed = conform_schema(&ds, DEFAULT_CATEGORICAL_THRESHOLD).unwrap();
        assert_eq!(conformed.columns()[0].kind, ColumnKind::Continuous);
        assert_eq!(conformed.columns()[0].missing_count, 1);
        let step = conformed.lineage().last().unwrap();
        assert_eq!(step.detail["categorical_threshold"], 20);
        assert_eq!(step.flags.len(), 1);
    }

    #[test]
    fn conform_to_categorical_keeps_labels() {
        let ds = load("flag\n1\n0\n1\n");
        let c = conform_schema(&ds, DEFAULT_CATEGORICAL_THRESHOLD).unwrap();
        assert_eq!(
            c.columns()[0].categories.as_deref(),
            Some(&["0".to_string(), "1".to_string()][..])
        );
        assert_eq!(c.label(0, 0).as_deref(), Some("1"));
        assert_eq!(c.to_csv(), ds.to_csv());
    }
}
