//! Synthetic benchmark generation: random DAGs, structural causal models,
//! ancestral sampling and root-cause injection.

mod bundle;
mod random_graph;

pub use bundle::{read_bundle, write_bundle};
pub use random_graph::{sample_graph, GraphModel, GraphSpec};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::graph::{validate_dag, CausalGraph, Dag};
use crate::{Error, Result};

pub(crate) fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismForm {
    Linear,
    /// `x_j = sum_i w_i * tanh(x_i) + e_j`
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Gumbel,
    Uniform,
}

/// Zero-mean additive noise with standard deviation `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub scale: f64,
}

impl NoiseSpec {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.scale == 0.0 {
            // keep the stream aligned with non-degenerate noise
            let _: f64 = rng.random();
            return 0.0;
        }
        let s = self.scale;
        match self.kind {
            NoiseKind::Gaussian => Normal::new(0.0, s).expect("positive scale").sample(rng),
            NoiseKind::Uniform => {
                let half = s * 3f64.sqrt();
                Uniform::new(-half, half)
                    .expect("positive width")
                    .sample(rng)
            }
            NoiseKind::Gumbel => {
                let beta = s * 6f64.sqrt() / std::f64::consts::PI;
                let mu = -beta * EULER_GAMMA;
                Gumbel::new(mu, beta).expect("positive scale").sample(rng)
            }
        }
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub form: MechanismForm,
    /// Magnitude interval; each weight also gets a random sign.
    pub weight_range: (f64, f64),
    pub noise: NoiseKind,
    pub noise_scale: f64,
}

impl Default for MechanismSpec {
    fn default() -> Self {
        Self {
            form: MechanismForm::Linear,
            weight_range: (0.5, 2.0),
            noise: NoiseKind::Gaussian,
            noise_scale: 1.0,
        }
    }
}

impl MechanismSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.weight_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "weight range ({lo}, {hi}) must satisfy 0 < lo <= hi"
            )));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidSpec("noise_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Structural equation of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub form: MechanismForm,
    /// `(parent index, weight)`, sorted by parent index.
    pub parents: Vec<(usize, f64)>,
    pub noise: NoiseSpec,
}

impl Mechanism {
    fn evaluate(&self, row: &[f64]) -> f64 {
        self.parents
            .iter()
            .map(|&(p, w)| match self.form {
                MechanismForm::Linear => w * row[p],
                MechanismForm::Nonlinear => w * row[p].tanh(),
            })
            .sum()
    }
}

/// A DAG with one additive-noise mechanism per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    dag: Dag,
    mechanisms: Vec<Mechanism>,
}

impl Scm {
    /// Mechanism parent lists must match the DAG's parents exactly.
    pub fn new(dag: Dag, mechanisms: Vec<Mechanism>) -> Result<Self> {
        if mechanisms.len() != dag.n_nodes() {
            return Err(Error::InvalidSpec("one mechanism per node required".into()));
        }
        for (j, m) in mechanisms.iter().enumerate() {
            let ps: Vec<usize> = m.parents.iter().map(|p| p.0).collect();
            if ps != dag.parents(j) {
                return Err(Error::InvalidSpec(format!(
                    "mechanism parents of '{}' differ from the graph",
                    dag.nodes()[j]
                )));
            }
            if !(m.noise.scale >= 0.0) {
                return Err(Error::InvalidSpec(
                    "noise scale must be non-negative".into(),
                ));
            }
        }
        let mut g = dag.graph().clone();
        for (j, m) in mechanisms.iter().enumerate() {
            for &(p, w) in &m.parents {
                g.add_directed(p, j, Some(w))?;
            }
        }
        Ok(Self {
            dag: validate_dag(&g)?,
            mechanisms,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn nodes(&self) -> &[String] {
        self.dag.nodes()
    }

    pub fn n_nodes(&self) -> usize {
        self.dag.n_nodes()
    }

    pub fn noise_scale(&self, j: usize) -> f64 {
        self.mechanisms[j].noise.scale
    }

    /// The DAG carrying each mechanism weight on its edge.
    pub fn weighted_graph(&self) -> &CausalGraph {
        self.dag.graph()
    }

    /// Analytic covariance `(I - Wᵀ)⁻¹ D (I - Wᵀ)⁻ᵀ` for linear mechanisms.
    pub fn linear_covariance(&self) -> Option<DMatrix<f64>> {
        if self
            .mechanisms
            .iter()
            .any(|m| m.form != MechanismForm::Linear)
        {
            return None;
        }
        let d = self.n_nodes();
        let mut a = DMatrix::<f64>::identity(d, d);
        for (j, m) in self.mechanisms.iter().enumerate() {
            for &(p, w) in &m.parents {
                a[(j, p)] -= w;
            }
        }
        let inv = a.try_inverse()?;
        let noise = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |j, _| {
            self.mechanisms[j].noise.scale.powi(2)
        }));
        Some(&inv * noise * inv.transpose())
    }

    fn draw_row(
        &self,
        rng: &mut ChaCha8Rng,
        noise_shift: &[f64],
        clamp: &[Option<f64>],
    ) -> Vec<f64> {
        let mut row = vec![0.0; self.n_nodes()];
        for &j in self.dag.topological_order() {
            let m = &self.mechanisms[j];
            let e = m.noise.draw(rng) + noise_shift[j];
            row[j] = match clamp[j] {
                Some(v) => v,
                None => m.evaluate(&row) + e,
            };
        }
        row
    }

    /// Ancestral sampling in topological order.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.sample_do(n, seed, &[])
    }

    /// Samples under hard interventions `do(x_j = v)`. Noise is drawn for every
    /// node, so two calls with the same seed share their noise realizations.
    pub fn sample_do(
        &self,
        n: usize,
        seed: u64,
        interventions: &[(usize, f64)],
    ) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidSpec("sample size must be at least 1".into()));
        }
        let d = self.n_nodes();
        let mut clamp = vec![None; d];
        for &(j, v) in interventions {
            if j >= d {
                return Err(Error::InvalidSpec(format!(
                    "intervention on unknown node {j}"
                )));
            }
            clamp[j] = Some(v);
        }
        let shift = vec![0.0; d];
        let mut rng = rng_from(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| self.draw_row(&mut rng, &shift, &clamp))
            .collect();
        Dataset::from_rows(self.nodes(), &rows)
    }
}

/// Draws a mechanism for every node of `dag`.
///
/// Edges are visited in pair order; each weight is uniform on the magnitude
/// range with a random sign.
pub fn attach_mechanisms(dag: &Dag, spec: &MechanismSpec, seed: u64) -> Result<Scm> {
    spec.validate()?;
    let mut rng = rng_from(seed);
    let (lo, hi) = spec.weight_range;
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in dag.graph().edges() {
        let mag = if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        };
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        weights.insert((e.to, e.from), sign * mag);
    }
    let noise = NoiseSpec {
        kind: spec.noise,
        scale: spec.noise_scale,
    };
    let mechanisms = (0..dag.n_nodes())
        .map(|j| Mechanism {
            form: spec.form,
            parents: dag
                .parents(j)
                .into_iter()
                .map(|p| (p, weights[&(j, p)]))
                .collect(),
            noise,
        })
        .collect();
    Scm::new(dag.clone(), mechanisms)
}

/// Rebuilds an SCM from a weighted DAG (weights on edges) and a mechanism spec.
pub fn scm_from_weighted_graph(g: &CausalGraph, spec: &MechanismSpec) -> Result<Scm> {
    let dag = validate_dag(g)?;
    let noise = NoiseSpec {
        kind: spec.noise,
        scale: spec.noise_scale,
    };
    let mechanisms = (0..dag.n_nodes())
        .map(|j| Mechanism {
            form: spec.form,
            parents: dag
                .parents(j)
                .into_iter()
                .map(|p| (p, g.weight(p, j).unwrap_or(1.0)))
                .collect(),
            noise,
        })
        .collect();
    Scm::new(dag, mechanisms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterventionMode {
    /// Clamp the target to `magnitude * sigma`, ignoring its parents.
    Hard,
    /// Shift the target's noise mean by `magnitude * sigma`.
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetCount {
    Single,
    Multiple(usize),
}

impl TargetCount {
    pub fn k(&self) -> usize {
        match self {
            TargetCount::Single => 1,
            TargetCount::Multiple(k) => *k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub mode: InterventionMode,
    pub targets: TargetCount,
    /// In units of the target's noise standard deviation.
    pub magnitude: f64,
    pub n_anomalies: usize,
    pub seed: u64,
}

impl InterventionSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.magnitude == 0.0 || !self.magnitude.is_finite() {
            return Err(Error::InvalidSpec(
                "intervention magnitude must be non-zero".into(),
            ));
        }
        let k = self.targets.k();
        if k == 0 || k >= d {
            return Err(Error::InvalidSpec(format!(
                "{k} targets per anomaly requires 1 <= k < d = {d}"
            )));
        }
        if self.n_anomalies == 0 {
            return Err(Error::InvalidSpec("n_anomalies must be at least 1".into()));
        }
        Ok(())
    }
}

/// Samples anomalous rows, each with freshly chosen root-cause targets.
///
/// Multiple targets co-occur within one row. Labels hold the sorted target
/// labels of each row.
pub fn inject_root_causes(
    scm: &Scm,
    spec: &InterventionSpec,
) -> Result<(Dataset, Vec<Vec<String>>)> {
    let d = scm.n_nodes();
    spec.validate(d)?;
    let mut pick_rng = rng_from(derive_seed(spec.seed, 0));
    let mut noise_rng = rng_from(derive_seed(spec.seed, 1));
    let mut rows = Vec::with_capacity(spec.n_anomalies);
    let mut labels = Vec::with_capacity(spec.n_anomalies);
    for _ in 0..spec.n_anomalies {
        let mut targets = index::sample(&mut pick_rng, d, spec.targets.k()).into_vec();
        targets.sort_unstable();
        let mut shift = vec![0.0; d];
        let mut clamp = vec![None; d];
        for &t in &targets {
            let v = spec.magnitude * scm.noise_scale(t);
            match spec.mode {
                InterventionMode::Soft => shift[t] = v,
                InterventionMode::Hard => clamp[t] = Some(v),
            }
        }
        rows.push(scm.draw_row(&mut noise_rng, &shift, &clamp));
        labels.push(targets.iter().map(|&t| scm.nodes()[t].clone()).collect());
    }
    Ok((Dataset::from_rows(scm.nodes(), &rows)?, labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSeeds {
    pub graph: u64,
    pub mechanisms: u64,
    pub normal_sample: u64,
    pub anomalies: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMeta {
    pub graph: GraphSpec,
    pub mechanism: MechanismSpec,
    pub intervention: InterventionSpec,
    pub n_normal: usize,
    pub seeds: BenchmarkSeeds,
    pub notes: Vec<String>,
}

/// A simulated root-cause benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCase {
    pub scm: Scm,
    pub normal: Dataset,
    pub anomalies: Dataset,
    /// True root-cause labels per anomalous row.
    pub labels: Vec<Vec<String>>,
    pub meta: BenchmarkMeta,
}

pub fn make_benchmark(
    gspec: &GraphSpec,
    mspec: &MechanismSpec,
    ispec: &InterventionSpec,
    n_normal: usize,
) -> Result<BenchmarkCase> {
    gspec.validate()?;
    mspec.validate()?;
    ispec.validate(gspec.d)?;
    let seeds = BenchmarkSeeds {
        graph: gspec.seed,
        mechanisms: derive_seed(gspec.seed, 1),
        normal_sample: derive_seed(gspec.seed, 2),
        anomalies: ispec.seed,
    };
    let dag = sample_graph(gspec)?;
    let scm = attach_mechanisms(&dag, mspec, seeds.mechanisms)?;
    let normal = scm.sample(n_normal, seeds.normal_sample)?;
    let (anomalies, labels) = inject_root_causes(&scm, ispec)?;
    let mut notes = vec![format!(
        "noise is zero-mean with standard deviation {}; intervention magnitudes are in noise-sd units",
        mspec.noise_scale
    )];
    if ispec.targets.k() > 1 {
        notes.push("multiple targets co-occur within each anomalous row".into());
    }
    Ok(BenchmarkCase {
        scm,
        normal,
        anomalies,
        labels,
        meta: BenchmarkMeta {
            graph: gspec.clone(),
            mechanism: mspec.clone(),
            intervention: ispec.clone(),
            n_normal,
            seeds,
            notes,
        },
    })
}

impl BenchmarkCase {
    /// Re-runs generation from the recorded specs and seeds.
    pub fn regenerate(meta: &BenchmarkMeta) -> Result<BenchmarkCase> {
        make_benchmark(
            &meta.graph,
            &meta.mechanism,
            &meta.intervention,
            meta.n_normal,
        )
    }
}
