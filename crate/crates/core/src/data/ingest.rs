use std::collections::{BTreeMap, BTreeSet};

use super::{check_unique, ColumnKind, ColumnSchema, Dataset};
use crate::{Error, Result};

/// Missing-value sentinels, compared case-insensitively after trimming.
pub(crate) fn is_missing_token(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

pub(crate) fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses RFC-4180 CSV with a mandatory header row.
///
/// Columns whose non-missing cells all parse as finite numbers become
/// continuous, everything else categorical, unless `hints` says otherwise.
/// Categorical codes index the sorted set of distinct labels.
pub fn load_csv(bytes: &[u8], hints: &BTreeMap<String, ColumnKind>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_unique(header.iter().map(String::as_str))?;
    for name in hints.keys() {
        if !header.contains(name) {
            return Err(Error::Schema(format!(
                "kind hint for unknown column '{name}'"
            )));
        }
    }

    let d = header.len();
    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); d];
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        for (j, cell) in rec.iter().enumerate() {
            cells[j].push((!is_missing_token(cell)).then(|| cell.trim().to_string()));
        }
    }
    let n = cells[0].len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }

    let mut columns = Vec::with_capacity(d);
    let mut col_values: Vec<Vec<Option<f64>>> = Vec::with_capacity(d);
    for (j, name) in header.iter().enumerate() {
        let numeric = cells[j].iter().flatten().all(|c| parse_number(c).is_some());
        let kind = hints.get(name).copied().unwrap_or(if numeric {
            ColumnKind::Continuous
        } else {
            ColumnKind::Categorical
        });
        match kind {
            ColumnKind::Continuous => {
                let mut vals = Vec::with_capacity(n);
                for c in &cells[j] {
                    match c {
                        None => vals.push(None),
                        Some(s) => match parse_number(s) {
                            Some(v) => vals.push(Some(v)),
                            None => return Err(Error::Schema(format!(
                                "column '{name}' declared continuous but cell '{s}' is not numeric"
                            ))),
                        },
                    }
                }
                columns.push(ColumnSchema::new(name.clone(), kind, None));
                col_values.push(vals);
            }
            ColumnKind::Categorical => {
                let labels: Vec<String> = cells[j]
                    .iter()
                    .flatten()
                    .cloned()
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let code = |s: &str| labels.binary_search_by(|l| l.as_str().cmp(s)).unwrap() as f64;
                col_values.push(cells[j].iter().map(|c| c.as_deref().map(code)).collect());
                columns.push(ColumnSchema::new(name.clone(), kind, Some(labels)));
            }
        }
    }

    let mut values = Vec::with_capacity(n * d);
    let mut missing = Vec::with_capacity(n * d);
    for i in 0..n {
        for col in &col_values {
            values.push(col[i].unwrap_or(0.0));
            missing.push(col[i].is_none());
        }
    }
    Ok(Dataset::from_parts(columns, n, values, missing, Vec::new()))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        csv::ErrorKind::Utf8 { .. } => "input is not valid UTF-8".to_string(),
        _ => e.to_string(),
    };
    Error::Parse { line, message }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> Result<Dataset> {
        load_csv(s.as_bytes(), &BTreeMap::new())
    }

    #[test]
    fn infers_kinds_from_cells() {
        let ds = load("a,b\n1,x\n2,y").unwrap();
        assert_eq!((ds.n_rows(), ds.n_cols()), (2, 2));
        assert_eq!(ds.columns()[0].kind, ColumnKind::Continuous);
        assert_eq!(ds.columns()[1].kind, ColumnKind::Categorical);
        assert_eq!(ds.label(1, 1).as_deref(), Some("y"));
    }

    #[test]
    fn trailing_blank_line_is_skipped() {
        assert_eq!(load("a\n1\n\n").unwrap().n_rows(), 1);
    }

    #[test]
    fn na_sentinels_are_missing() {
        let ds = load("a,b\n1,2\n3,NA").unwrap();
        assert_eq!(ds.columns()[1].missing_count, 1);
        let ds = load("a\nnan\n\n4\n na \n5").unwrap();
        // the blank line in the middle is skipped, not a missing cell
        assert_eq!(ds.n_rows(), 4);
        assert_eq!(ds.columns()[0].missing_count, 2);
    }

    #[test]
    fn ragged_rows_report_line_number() {
        match load("a,b\n1,2\n3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_headers_rejected() {
        assert!(matches!(load("a,a\n1,2"), Err(Error::Schema(_))));
    }

    #[test]
    fn header_only_is_empty_input() {
        assert_eq!(load("a,b\n"), Err(Error::EmptyInput));
        assert_eq!(load(""), Err(Error::EmptyInput));
    }

    #[test]
    fn invalid_utf8_is_parse_error() {
        let bytes = b"a,b\n1,\xff\xfe\n";
        assert!(matches!(
            load_csv(bytes, &BTreeMap::new()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn hints_override_inference() {
        let mut hints = BTreeMap::new();
        hints.insert("a".to_string(), ColumnKind::Categorical);
        let ds = load_csv(b"a\n3\n1\n3", &hints).unwrap();
        assert_eq!(ds.columns()[0].kind, ColumnKind::Categorical);
        assert_eq!(ds.columns()[0].distinct_count, 2);
        hints.insert("a".to_string(), ColumnKind::Continuous);
        assert!(matches!(load_csv(b"a\nx\n", &hints), Err(Error::Schema(_))));
    }

    #[test]
    fn export_round_trips() {
        let src = "a,b,c\n1.5,x,\n-2,\"y,z\",7\n";
        let ds = load(src).unwrap();
        let out = ds.to_csv();
        assert_eq!(out, src);
        assert_eq!(load(&out).unwrap(), ds);
    }
}
