//! Tabular datasets: ingestion, schema conformance, preprocessing and EDA.

mod eda;
mod ingest;
mod preprocess;
mod schema;

pub use eda::{describe, CategoryCount, ColumnStats, EdaSummary, Histogram};
pub use ingest::load_csv;
pub use preprocess::{preprocess, Encoding, Imputation, PreprocessPlan, Scaler};
pub use schema::{conform_schema, infer_schema, infer_schema_with, DEFAULT_CATEGORICAL_THRESHOLD};

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub missing_count: usize,
    pub distinct_count: usize,
    /// Category labels indexed by code. Present for categorical columns only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl ColumnSchema {
    fn new(name: impl Into<String>, kind: ColumnKind, categories: Option<Vec<String>>) -> Self {
        Self {
            name: name.into(),
            kind,
            missing_count: 0,
            distinct_count: 0,
            categories,
        }
    }
}

/// One applied preprocessing stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageStep {
    pub stage: String,
    pub detail: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Row-major numeric table with a missingness mask.
///
/// Categorical cells hold their integer code; missing cells hold `0.0` and are
/// marked in the mask so the struct stays `Eq`-comparable and serializable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    columns: Vec<ColumnSchema>,
    n: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
    lineage: Vec<LineageStep>,
}

impl Dataset {
    pub(crate) fn from_parts(
        columns: Vec<ColumnSchema>,
        n: usize,
        values: Vec<f64>,
        missing: Vec<bool>,
        lineage: Vec<LineageStep>,
    ) -> Self {
        debug_assert_eq!(values.len(), n * columns.len());
        debug_assert_eq!(missing.len(), values.len());
        let values = values
            .into_iter()
            .zip(&missing)
            .map(|(v, m)| if *m { 0.0 } else { v })
            .collect();
        let mut ds = Self {
            columns,
            n,
            values,
            missing,
            lineage,
        };
        ds.refresh_counts();
        ds
    }

    /// Builds a complete, all-continuous dataset from column vectors.
    pub fn from_columns(names: &[String], cols: &[Vec<f64>]) -> Result<Self> {
        if names.len() != cols.len() {
            return Err(Error::Input(
                "column name count differs from column count".into(),
            ));
        }
        let n = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::Input("columns have different lengths".into()));
        }
        check_unique(names.iter().map(String::as_str))?;
        let d = cols.len();
        let mut values = vec![0.0; n * d];
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                values[i * d + j] = *v;
            }
        }
        let missing = values.iter().map(|v: &f64| !v.is_finite()).collect();
        let columns = names
            .iter()
            .map(|nm| ColumnSchema::new(nm.clone(), ColumnKind::Continuous, None))
            .collect();
        Ok(Self::from_parts(columns, n, values, missing, Vec::new()))
    }

    /// Builds a complete, all-continuous dataset from rows.
    pub fn from_rows(names: &[String], rows: &[Vec<f64>]) -> Result<Self> {
        let d = names.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Input("row length differs from column count".into()));
        }
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        Self::from_columns(names, &cols)
    }

    pub(crate) fn refresh_counts(&mut self) {
        let d = self.columns.len();
        for j in 0..d {
            let mut seen = BTreeSet::new();
            let mut miss = 0;
            for i in 0..self.n {
                if self.missing[i * d + j] {
                    miss += 1;
                } else {
                    seen.insert(self.values[i * d + j].to_bits());
                }
            }
            self.columns[j].missing_count = miss;
            self.columns[j].distinct_count = seen.len();
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn lineage(&self) -> &[LineageStep] {
        &self.lineage
    }

    pub(crate) fn push_lineage(&mut self, step: LineageStep) {
        self.lineage.push(step);
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let k = row * self.columns.len() + col;
        (!self.missing[k]).then(|| self.values[k])
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.columns.len() + col]
    }

    pub fn missing_cells(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }

    pub fn is_complete(&self) -> bool {
        !self.missing.iter().any(|m| *m)
    }

    /// Non-missing values of a column, in row order.
    pub fn column_values(&self, col: usize) -> Vec<f64> {
        (0..self.n).filter_map(|i| self.get(i, col)).collect()
    }

    pub fn column_cells(&self, col: usize) -> Vec<Option<f64>> {
        (0..self.n).map(|i| self.get(i, col)).collect()
    }

    pub fn row(&self, row: usize) -> Vec<Option<f64>> {
        (0..self.n_cols()).map(|j| self.get(row, j)).collect()
    }

    /// The row as plain values, or `None` when any cell is missing.
    pub fn complete_row(&self, row: usize) -> Option<Vec<f64>> {
        self.row(row).into_iter().collect()
    }

    /// Decodes a categorical cell back to its label.
    pub fn label(&self, row: usize, col: usize) -> Option<String> {
        let code = self.get(row, col)?;
        match &self.columns[col].categories {
            Some(cats) => cats.get(code as usize).cloned(),
            None => Some(format_number(code)),
        }
    }

    pub fn all_continuous(&self) -> bool {
        self.columns
            .iter()
            .all(|c| c.kind == ColumnKind::Continuous)
    }

    /// Dense n×d matrix; fails when any cell is missing.
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if !self.is_complete() {
            return Err(Error::Input(format!(
                "dataset has {} missing cells; preprocess first",
                self.missing_cells()
            )));
        }
        Ok(DMatrix::from_row_slice(self.n, self.n_cols(), &self.values))
    }

    /// Dense matrix restricted to continuous columns; errors on categorical or missing data.
    pub fn continuous_matrix(&self) -> Result<DMatrix<f64>> {
        if let Some(c) = self
            .columns
            .iter()
            .find(|c| c.kind != ColumnKind::Continuous)
        {
            return Err(Error::Input(format!("column '{}' is categorical", c.name)));
        }
        self.to_matrix()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let d = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * d);
        let mut missing = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            values.extend_from_slice(&self.values[r * d..(r + 1) * d]);
            missing.extend_from_slice(&self.missing[r * d..(r + 1) * d]);
        }
        Dataset::from_parts(
            self.columns.clone(),
            rows.len(),
            values,
            missing,
            self.lineage.clone(),
        )
    }

    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        let d = self.n_cols();
        let mut values = Vec::with_capacity(self.n * cols.len());
        let mut missing = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            for &j in cols {
                values.push(self.values[i * d + j]);
                missing.push(self.missing[i * d + j]);
            }
        }
        let columns = cols.iter().map(|&j| self.columns[j].clone()).collect();
        Dataset::from_parts(columns, self.n, values, missing, self.lineage.clone())
    }

    /// Exports in the ingestion dialect: header row, empty cells for missing values.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .expect("in-memory write");
        for i in 0..self.n {
            let rec: Vec<String> = (0..self.n_cols())
                .map(|j| match self.columns[j].kind {
                    _ if self.is_missing(i, j) => String::new(),
                    ColumnKind::Categorical => self.label(i, j).unwrap_or_default(),
                    ColumnKind::Continuous => format_number(self.values[i * self.n_cols() + j]),
                })
                .collect();
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn format_number(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn check_unique<'a>(names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(Error::Schema(format!("duplicate column name '{n}'")));
        }
    }
    Ok(())
}
