use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{scm_from_weighted_graph, BenchmarkCase, BenchmarkMeta};
use crate::data::load_csv;
use crate::graph::{from_json, to_json};
use crate::Result;

/// Writes `meta.json`, `graph.json`, `normal.csv`, `anomalies.csv` and
/// `labels.json` into `dir`, creating it if needed.
pub fn write_bundle(case: &BenchmarkCase, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&case.meta)?,
    )?;
    fs::write(dir.join("graph.json"), to_json(case.scm.weighted_graph()))?;
    fs::write(dir.join("normal.csv"), case.normal.to_csv())?;
    fs::write(dir.join("anomalies.csv"), case.anomalies.to_csv())?;
    let labels: BTreeMap<usize, &Vec<String>> = case.labels.iter().enumerate().collect();
    fs::write(
        dir.join("labels.json"),
        serde_json::to_string_pretty(&labels)?,
    )?;
    Ok(())
}

pub fn read_bundle(dir: &Path) -> Result<BenchmarkCase> {
    let meta: BenchmarkMeta = serde_json::from_slice(&fs::read(dir.join("meta.json"))?)?;
    let graph = from_json(&fs::read_to_string(dir.join("graph.json"))?)?;
    let scm = scm_from_weighted_graph(&graph, &meta.mechanism)?;
    let hints = BTreeMap::new();
    let normal = load_csv(&fs::read(dir.join("normal.csv"))?, &hints)?;
    let anomalies = load_csv(&fs::read(dir.join("anomalies.csv"))?, &hints)?;
    let labels: BTreeMap<usize, Vec<String>> =
        serde_json::from_slice(&fs::read(dir.join("labels.json"))?)?;
    Ok(BenchmarkCase {
        scm,
        normal,
        anomalies,
        labels: labels.into_values().collect(),
        meta,
    })
}
