//! TOML experiment files.
//!
//! A file names one experiment, the model and weight scheme it runs on and
//! the replication settings. Unknown keys are rejected everywhere, defaults
//! are filled in on parse, and [`ExperimentConfig::hash`] fingerprints the
//! validated result so that outputs can be traced back to their inputs.
//!
//! ```toml
//! experiment = "clt"
//! seed = "0x2a"
//! reps = 10000
//!
//! [model]
//! family = "kernel"
//! dim = 2
//! innovation = { law = "rademacher" }
//! terms = [{ offset = [0, 0], coefficient = 1.0 }, { offset = [1, 1], coefficient = 0.5 }]
//!
//! [scheme]
//! kind = "rectangle"
//! n = 64
//! ```

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{IntervalModel, IntervalPreset, FieldModel, Kernel};
use crate::innovations::{parse_seed, InnovationField, InnovationSpec, LatticePoint};
use crate::sums::SumMethod;
use crate::weights::{
    oscillating_set, AxisKernel, Cuboid, ExplicitWeights, IndexSetWeights, PowerMeasure, ProductLinearWeights,
    RectangleWeights, Region, SetIndexedWeights, WeightScheme,
};

pub const MIN_REPS: usize = 100;
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Clt,
    Fdd,
    Paths,
    Counterexample1,
    Counterexample2,
    Dependence,
    OracleCheck,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Clt => "clt",
            ExperimentKind::Fdd => "fdd",
            ExperimentKind::Paths => "paths",
            ExperimentKind::Counterexample1 => "counterexample1",
            ExperimentKind::Counterexample2 => "counterexample2",
            ExperimentKind::Dependence => "dependence",
            ExperimentKind::OracleCheck => "oracle_check",
        }
    }

    fn needs_model(&self) -> bool {
        matches!(self, ExperimentKind::Clt | ExperimentKind::Fdd | ExperimentKind::Paths | ExperimentKind::Dependence)
    }

    fn needs_scheme(&self) -> bool {
        matches!(self, ExperimentKind::Clt | ExperimentKind::Fdd | ExperimentKind::Paths)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `S_n / σ_n`, target `N(0, 1)`.
    BySigmaN,
    /// `S_n / b_n`, target `N(0, σ²)`.
    #[default]
    ByBN,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    KsNormal,
    VarianceRatio,
    CovarianceMatch,
    TwoSampleKs,
    /// Fitted scaling exponent of a product-linear scheme against `2H`.
    HurstScaling,
    /// Pearson goodness of fit against an exact probability mass function.
    ChiSquare,
    /// Deterministic identities and closed forms.
    ExactIdentity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub offset: Vec<i64>,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub k: Vec<i64>,
    pub l: Vec<i64>,
    pub coefficient: f64,
}

fn default_innovation() -> InnovationSpec {
    InnovationSpec::Rademacher
}

fn default_k_max() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Kernel {
        dim: usize,
        #[serde(default = "default_innovation")]
        innovation: InnovationSpec,
        terms: Vec<TermSpec>,
    },
    Volterra {
        dim: usize,
        #[serde(default = "default_innovation")]
        innovation: InnovationSpec,
        #[serde(default)]
        linear: Vec<TermSpec>,
        #[serde(default)]
        pairs: Vec<PairSpec>,
    },
    Difference {
        #[serde(default = "default_innovation")]
        innovation: InnovationSpec,
    },
    Interval {
        #[serde(default)]
        preset: Option<IntervalPreset>,
        #[serde(default = "default_k_max")]
        k_max: usize,
        #[serde(default)]
        alpha: Option<Vec<f64>>,
        #[serde(default)]
        n_seq: Option<Vec<i64>>,
        #[serde(default)]
        d_seq: Option<Vec<f64>>,
    },
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Kernel { dim, .. } | ModelSpec::Volterra { dim, .. } => *dim,
            ModelSpec::Difference { .. } | ModelSpec::Interval { .. } => 1,
        }
    }

    /// The model with its innovation field seeded by `seed`.
    pub fn build(&self, seed: u64) -> Result<FieldModel> {
        let terms = |dim: usize, t: &[TermSpec]| {
            Kernel::new(dim, t.iter().map(|t| (t.offset.clone(), t.coefficient)).collect())
        };
        match self {
            ModelSpec::Kernel { dim, innovation, terms: t } => {
                innovation.validate()?;
                if t.is_empty() {
                    return Err(Error::Config("model.terms: kernel needs at least one term".into()));
                }
                FieldModel::kernel(terms(*dim, t)?, InnovationField::new(*innovation, *dim, seed)?)
            }
            ModelSpec::Volterra { dim, innovation, linear, pairs } => {
                innovation.validate()?;
                let pairs = pairs.iter().map(|p| (p.k.clone(), p.l.clone(), p.coefficient)).collect();
                FieldModel::volterra(terms(*dim, linear)?, pairs, InnovationField::new(*innovation, *dim, seed)?)
            }
            ModelSpec::Difference { innovation } => {
                innovation.validate()?;
                FieldModel::difference(InnovationField::new(*innovation, 1, seed)?)
            }
            ModelSpec::Interval { preset, k_max, alpha, n_seq, d_seq } => {
                let model = match (preset, alpha, n_seq, d_seq) {
                    (Some(p), None, None, None) => IntervalModel::preset(*p, *k_max, seed)?,
                    (None, Some(a), Some(n), Some(d)) => IntervalModel::new(a.clone(), n.clone(), d.clone(), seed)?,
                    _ => {
                        return Err(Error::Config(
                            "model: interval takes either `preset` or all of `alpha`, `n_seq`, `d_seq`".into(),
                        ))
                    }
                };
                Ok(FieldModel::Interval(model))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSpec {
    fn build(&self) -> Result<Cuboid> {
        Cuboid::new(self.lo.clone(), self.hi.clone())
    }
}

pub fn region_from_boxes(boxes: &[BoxSpec]) -> Result<Region> {
    Region::new(boxes.iter().map(BoxSpec::build).collect::<Result<_>>()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AxisKernelSpec {
    /// `a_i = i^{H − 3/2}` on `1..=length`.
    Fractional { hurst: f64, length: i64 },
    Terms { terms: Vec<(i64, f64)> },
}

impl AxisKernelSpec {
    pub fn build(&self) -> Result<AxisKernel> {
        match self {
            AxisKernelSpec::Fractional { hurst, length } => AxisKernel::fractional(*hurst, *length),
            AxisKernelSpec::Terms { terms } => AxisKernel::new(terms.clone()),
        }
    }

    /// Hurst index of the limiting sheet along this axis; summable kernels give `1/2`.
    pub fn limit_hurst(&self) -> f64 {
        match self {
            AxisKernelSpec::Fractional { hurst, .. } => *hurst,
            AxisKernelSpec::Terms { .. } => 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteWeight {
    pub site: Vec<i64>,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeSpec {
    /// `1{j ∈ [1, ⌊n t⌋]}`, `t` defaulting to the unit vector of ones.
    Rectangle {
        n: u64,
        #[serde(default)]
        t: Option<Vec<f64>>,
    },
    /// `Γ = {0, …, n − 1}` in one dimension.
    Contiguous { n: i64 },
    IndexSet { points: Vec<Vec<i64>> },
    /// The oscillating-ratio sets `Γ_n`.
    Oscillating { n: u32 },
    SetIndexed {
        n: u64,
        #[serde(default)]
        gamma: Option<Vec<f64>>,
        boxes: Vec<BoxSpec>,
    },
    ProductLinear {
        n: u64,
        kernels: Vec<AxisKernelSpec>,
        #[serde(default)]
        t: Option<Vec<f64>>,
    },
    Explicit { coefficients: Vec<SiteWeight> },
}

impl SchemeSpec {
    pub fn build(&self, dim: usize) -> Result<WeightScheme> {
        let scheme = match self {
            SchemeSpec::Rectangle { n, t } => {
                let t = t.clone().unwrap_or_else(|| vec![1.0; dim]);
                WeightScheme::Rectangle(RectangleWeights::new(*n, t)?)
            }
            SchemeSpec::Contiguous { n } => {
                if *n < 1 {
                    return Err(Error::Config(format!("scheme.n: contiguous set needs n >= 1, got {n}")));
                }
                WeightScheme::IndexSet(IndexSetWeights::contiguous(*n))
            }
            SchemeSpec::IndexSet { points } => {
                let d = points.first().map(|p| p.len()).unwrap_or(dim);
                WeightScheme::IndexSet(IndexSetWeights::new(d, points.iter().cloned().map(LatticePoint).collect())?)
            }
            SchemeSpec::Oscillating { n } => {
                if *n == 0 || *n > 24 {
                    return Err(Error::Config(format!("scheme.n: oscillating level must be in 1..=24, got {n}")));
                }
                WeightScheme::IndexSet(IndexSetWeights::from_1d(&oscillating_set(*n)))
            }
            SchemeSpec::SetIndexed { n, gamma, boxes } => {
                let measure = match gamma {
                    Some(g) => PowerMeasure::new(g.clone())?,
                    None => PowerMeasure::lebesgue(dim),
                };
                WeightScheme::SetIndexed(SetIndexedWeights::new(measure, region_from_boxes(boxes)?, *n)?)
            }
            SchemeSpec::ProductLinear { n, kernels, t } => {
                let kernels = kernels.iter().map(AxisKernelSpec::build).collect::<Result<Vec<_>>>()?;
                let t = t.clone().unwrap_or_else(|| vec![1.0; kernels.len()]);
                WeightScheme::ProductLinear(ProductLinearWeights::new(kernels, *n, t)?)
            }
            SchemeSpec::Explicit { coefficients } => {
                let list = coefficients.iter().map(|c| (LatticePoint(c.site.clone()), c.coefficient)).collect();
                WeightScheme::Explicit(ExplicitWeights::new(dim, list)?)
            }
        };
        if scheme.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: scheme.dim() });
        }
        Ok(scheme)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FddTarget {
    /// `σ² μ(A ∩ B)`, `σ² Π min(s_q, t_q)` or the fractional sheet kernel.
    #[default]
    Limit,
    /// `E(S_n(t) S_n(τ)) / b_n²` computed exactly at the simulated `n`.
    ExactFinite,
}

fn default_fdd_tolerance() -> f64 {
    0.10
}

fn default_hurst_tolerance() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FddSpec {
    /// Evaluation points `t ∈ [0,1]^d` for rectangle and product-linear schemes.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    /// Evaluation sets, each a union of disjoint boxes, for set-indexed schemes.
    #[serde(default)]
    pub regions: Vec<Vec<BoxSpec>>,
    #[serde(default)]
    pub target: FddTarget,
    /// Relative tolerance per covariance entry.
    #[serde(default = "default_fdd_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_hurst_tolerance")]
    pub hurst_tolerance: f64,
}

fn default_grid() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    /// Grid `{0, 1/g, …, 1}` per axis.
    #[serde(default = "default_grid")]
    pub grid: usize,
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec { grid: default_grid() }
    }
}

fn default_even_k() -> usize {
    2
}
fn default_odd_k() -> usize {
    3
}
fn default_even_preset() -> IntervalPreset {
    IntervalPreset::Full
}
fn default_odd_preset() -> IntervalPreset {
    IntervalPreset::Small
}
fn default_min_expected() -> f64 {
    5.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counterexample1Spec {
    #[serde(default = "default_even_k")]
    pub even_k: usize,
    #[serde(default = "default_even_preset")]
    pub even_preset: IntervalPreset,
    #[serde(default = "default_odd_k")]
    pub odd_k: usize,
    #[serde(default = "default_odd_preset")]
    pub odd_preset: IntervalPreset,
    /// Simulate all layers, `S_{n_k} / (α_k √n_k)`, instead of layer `k` alone.
    #[serde(default)]
    pub full_sum: bool,
    #[serde(default = "default_min_expected")]
    pub min_expected: f64,
}

impl Default for Counterexample1Spec {
    fn default() -> Self {
        Counterexample1Spec {
            even_k: default_even_k(),
            even_preset: default_even_preset(),
            odd_k: default_odd_k(),
            odd_preset: default_odd_preset(),
            full_sum: false,
            min_expected: default_min_expected(),
        }
    }
}

fn default_n_max() -> u32 {
    16
}
fn default_mc_levels() -> Vec<u32> {
    vec![6, 9, 12]
}
fn default_from_n() -> u32 {
    8
}
fn default_spread() -> f64 {
    1.5
}
fn default_liminf_floor() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counterexample2Spec {
    #[serde(default = "default_n_max")]
    pub n_max: u32,
    #[serde(default = "default_mc_levels")]
    pub monte_carlo_levels: Vec<u32>,
    /// Steps `n ≥ from_n` enter the liminf and spread checks.
    #[serde(default = "default_from_n")]
    pub from_n: u32,
    #[serde(default = "default_spread")]
    pub min_spread: f64,
    /// Lower bound on `σ²_{Γ_n} / (|Γ_n| m_2)` for `n ≥ from_n`.
    #[serde(default = "default_liminf_floor")]
    pub liminf_floor: f64,
    #[serde(default = "default_innovation")]
    pub innovation: InnovationSpec,
}

impl Default for Counterexample2Spec {
    fn default() -> Self {
        Counterexample2Spec {
            n_max: default_n_max(),
            monte_carlo_levels: default_mc_levels(),
            from_n: default_from_n(),
            min_spread: default_spread(),
            liminf_floor: default_liminf_floor(),
            innovation: default_innovation(),
        }
    }
}

fn default_ps() -> Vec<u32> {
    vec![2]
}
fn default_window() -> i64 {
    3
}
fn default_outer() -> usize {
    2000
}
fn default_inner() -> usize {
    32
}
fn default_k_se() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependenceSpec {
    #[serde(default = "default_ps")]
    pub p: Vec<u32>,
    #[serde(default = "default_window")]
    pub window_radius: i64,
    #[serde(default = "default_outer")]
    pub n_outer: usize,
    #[serde(default = "default_inner")]
    pub n_inner: usize,
    /// Agreement band in standard errors between exact and Monte Carlo values.
    #[serde(default = "default_k_se")]
    pub k_se: f64,
}

impl Default for DependenceSpec {
    fn default() -> Self {
        DependenceSpec {
            p: default_ps(),
            window_radius: default_window(),
            n_outer: default_outer(),
            n_inner: default_inner(),
            k_se: default_k_se(),
        }
    }
}

fn default_oracle_vectors() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    /// Random weight vectors per window for the moment inequality.
    #[serde(default = "default_oracle_vectors")]
    pub weight_vectors: usize,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec { weight_vectors: default_oracle_vectors() }
    }
}

fn default_reps() -> usize {
    10_000
}
fn default_variance_tolerance() -> f64 {
    0.05
}
fn default_sigma_floor() -> f64 {
    1e-3
}
fn default_degenerate_tolerance() -> f64 {
    0.01
}
fn default_significance() -> f64 {
    0.01
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn de_seed<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }
    match Raw::deserialize(d).map_err(|_| {
        serde::de::Error::custom("seed: expected a non-negative integer or a decimal/0x-hex string")
    })? {
        Raw::Int(v) if v >= 0 => Ok(v as u64),
        Raw::Int(v) => Err(serde::de::Error::custom(format!("seed: {v} is negative"))),
        Raw::Text(s) => parse_seed(&s).map_err(serde::de::Error::custom),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_seed", deserialize_with = "de_seed")]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Worker threads, 0 for all cores. Excluded from the config hash.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub normalization: Normalization,
    /// `None` selects the experiment's default battery; an empty list runs no tests.
    #[serde(default)]
    pub tests: Option<Vec<TestKind>>,
    #[serde(default = "default_significance")]
    pub significance: f64,
    /// Relative tolerance of the empirical variance.
    #[serde(default = "default_variance_tolerance")]
    pub variance_tolerance: f64,
    /// Smallest `σ_n² / b_n²` for which `S_n / σ_n` is accepted.
    #[serde(default = "default_sigma_floor")]
    pub sigma_floor: f64,
    /// Bound on the empirical variance when the limit is degenerate.
    #[serde(default = "default_degenerate_tolerance")]
    pub degenerate_tolerance: f64,
    #[serde(default)]
    pub sum_method: SumMethod,
    /// Simulate the m-dependent approximation `X^(m)` instead of `X`.
    #[serde(default)]
    pub truncation: Option<i64>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub scheme: Option<SchemeSpec>,
    #[serde(default)]
    pub fdd: Option<FddSpec>,
    #[serde(default)]
    pub paths: Option<PathSpec>,
    #[serde(default)]
    pub counterexample1: Option<Counterexample1Spec>,
    #[serde(default)]
    pub counterexample2: Option<Counterexample2Spec>,
    #[serde(default)]
    pub dependence: Option<DependenceSpec>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
}

impl ExperimentConfig {
    /// A config with every optional section absent.
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            seed: DEFAULT_SEED,
            reps: default_reps(),
            workers: 0,
            normalization: Normalization::default(),
            tests: None,
            significance: default_significance(),
            variance_tolerance: default_variance_tolerance(),
            sigma_floor: default_sigma_floor(),
            degenerate_tolerance: default_degenerate_tolerance(),
            sum_method: SumMethod::default(),
            truncation: None,
            model: None,
            scheme: None,
            fdd: None,
            paths: None,
            counterexample1: None,
            counterexample2: None,
            dependence: None,
            oracle: None,
        }
    }

    /// Fills in the experiment-specific sections and checks cross-field constraints.
    pub fn validate(mut self) -> Result<Self> {
        if self.reps < MIN_REPS {
            return Err(Error::Config(format!("reps: {} is below the minimum of {MIN_REPS}", self.reps)));
        }
        if !(self.significance > 0.0 && self.significance < 0.5) {
            return Err(Error::Config(format!("significance: {} outside (0, 0.5)", self.significance)));
        }
        for (key, v) in [
            ("variance_tolerance", self.variance_tolerance),
            ("degenerate_tolerance", self.degenerate_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{key}: expected a positive number, got {v}")));
            }
        }
        if !(self.sigma_floor >= 0.0 && self.sigma_floor.is_finite()) {
            return Err(Error::Config(format!("sigma_floor: expected a non-negative number, got {}", self.sigma_floor)));
        }
        if let Some(m) = self.truncation {
            if m < 0 {
                return Err(Error::Config(format!("truncation: m = {m} must be non-negative")));
            }
        }
        let kind = self.experiment;
        if kind.needs_model() && self.model.is_none() {
            return Err(Error::Config(format!("model: required for experiment `{}`", kind.name())));
        }
        if kind.needs_scheme() && self.scheme.is_none() {
            return Err(Error::Config(format!("scheme: required for experiment `{}`", kind.name())));
        }
        if let (Some(model), Some(scheme)) = (&self.model, &self.scheme) {
            scheme.build(model.dim())?;
            model.build(self.seed)?;
        }
        match kind {
            ExperimentKind::Fdd => {
                let fdd = self.fdd.as_ref().ok_or_else(|| Error::Config("fdd: required for experiment `fdd`".into()))?;
                let count = fdd.points.len() + fdd.regions.len();
                if count < 2 {
                    return Err(Error::Config(format!("fdd: need at least 2 evaluation points or regions, got {count}")));
                }
                if !fdd.points.is_empty() && !fdd.regions.is_empty() {
                    return Err(Error::Config("fdd: give either `points` or `regions`, not both".into()));
                }
                if !(fdd.tolerance > 0.0) || !(fdd.hurst_tolerance > 0.0) {
                    return Err(Error::Config("fdd: tolerances must be positive".into()));
                }
            }
            ExperimentKind::Paths => {
                let p = self.paths.get_or_insert_with(PathSpec::default);
                if p.grid == 0 || p.grid > 4096 {
                    return Err(Error::Config(format!("paths.grid: {} outside 1..=4096", p.grid)));
                }
            }
            ExperimentKind::Counterexample1 => {
                let c = self.counterexample1.get_or_insert_with(Counterexample1Spec::default);
                if c.even_k == 0 || !c.even_k.is_multiple_of(2) {
                    return Err(Error::Config(format!("counterexample1.even_k: {} is not a positive even level", c.even_k)));
                }
                if c.odd_k % 2 != 1 {
                    return Err(Error::Config(format!("counterexample1.odd_k: {} is not odd", c.odd_k)));
                }
            }
            ExperimentKind::Counterexample2 => {
                let c = self.counterexample2.get_or_insert_with(Counterexample2Spec::default);
                c.innovation.validate()?;
                if c.n_max < 2 || c.n_max > 24 {
                    return Err(Error::Config(format!("counterexample2.n_max: {} outside 2..=24", c.n_max)));
                }
                if c.from_n + 1 > c.n_max {
                    return Err(Error::Config("counterexample2.from_n: must leave at least one adjacent pair".into()));
                }
                if let Some(bad) = c.monte_carlo_levels.iter().find(|&&n| n == 0 || n > c.n_max) {
                    return Err(Error::Config(format!("counterexample2.monte_carlo_levels: {bad} outside 1..=n_max")));
                }
            }
            ExperimentKind::Dependence => {
                let d = self.dependence.get_or_insert_with(DependenceSpec::default);
                if d.p.is_empty() {
                    return Err(Error::Config("dependence.p: need at least one moment order".into()));
                }
                if d.window_radius < 0 || d.n_outer < 2 || d.n_inner < 2 {
                    return Err(Error::Config("dependence: window_radius >= 0, n_outer >= 2, n_inner >= 2".into()));
                }
            }
            ExperimentKind::OracleCheck => {
                self.oracle.get_or_insert_with(OracleSpec::default);
            }
            ExperimentKind::Clt => {}
        }
        Ok(self)
    }

    /// Hex SHA-256 of the canonical JSON of the config with `workers` cleared.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn battery(&self) -> Vec<TestKind> {
        if let Some(t) = &self.tests {
            let mut t = t.clone();
            t.sort();
            t.dedup();
            return t;
        }
        match self.experiment {
            ExperimentKind::Clt => vec![TestKind::KsNormal, TestKind::VarianceRatio],
            ExperimentKind::Fdd => vec![TestKind::CovarianceMatch, TestKind::HurstScaling, TestKind::ExactIdentity],
            ExperimentKind::Paths => vec![TestKind::VarianceRatio, TestKind::CovarianceMatch, TestKind::ExactIdentity],
            ExperimentKind::Counterexample1 => vec![TestKind::KsNormal, TestKind::TwoSampleKs, TestKind::ChiSquare],
            ExperimentKind::Counterexample2 => vec![TestKind::VarianceRatio, TestKind::ExactIdentity],
            ExperimentKind::Dependence => vec![TestKind::VarianceRatio, TestKind::CovarianceMatch, TestKind::ExactIdentity],
            ExperimentKind::OracleCheck => vec![TestKind::ExactIdentity],
        }
    }

    pub fn build_model(&self) -> Result<FieldModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("model: missing".into()))?
            .build(self.seed)
    }

    pub fn build_scheme(&self) -> Result<WeightScheme> {
        let dim = self.model.as_ref().map(ModelSpec::dim).unwrap_or(1);
        self.scheme.as_ref().ok_or_else(|| Error::Config("scheme: missing".into()))?.build(dim)
    }
}

/// Parses and validates a TOML document.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let raw: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    raw.validate()
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

#[derive(Clone, Copy, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub label: &'static str,
    pub source: &'static str,
}

impl Preset {
    pub fn config(&self) -> Result<ExperimentConfig> {
        parse_config_str(self.source)
    }
}

macro_rules! preset {
    ($name:literal, $label:literal) => {
        Preset { name: $name, label: $label, source: include_str!(concat!("../presets/", $name, ".toml")) }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("clt-iid-2d", "weighted-sum CLT: i.i.d. Rademacher, 64x64 rectangle, S_n/sigma_n"),
    preset!("clt-kernel-2d", "weighted-sum CLT: kernel on {0,1}^2, 64x64 rectangle, S_n/b_n"),
    preset!("clt-difference", "degenerate limit: difference field, n = 1024, S_n/b_n -> 0"),
    preset!("clt-difference-sigma", "degenerate limit: difference field, Gaussian, S_n/sigma_n"),
    preset!("clt-volterra-1d", "weighted-sum CLT: Volterra field, contiguous n = 2048"),
    preset!("counterexample1", "interval construction: even layer k=2 (full scale), odd layer k=3 (small preset)"),
    preset!("counterexample2", "oscillating variance ratio sets Gamma_n, n <= 16"),
    preset!("fdd-set-indexed-lebesgue", "set-indexed sums: Lebesgue measure on [0,1]^2, n = 64"),
    preset!("fdd-set-indexed-power", "set-indexed sums: density |x_1|, beta = 3, n = 64"),
    preset!("fdd-fbs-h05", "fractional sheet: H = 0.5 fractional kernel, L = 512, n = 2048"),
    preset!("fdd-fbs-h08", "fractional sheet: H = 0.8 fractional kernel, L = 512, n = 2048"),
    preset!("paths-iid-1d", "invariance principle: i.i.d. paths on a 16-point grid, n = 1024"),
    preset!("dependence-volterra", "dependence coefficients: Volterra field in d = 1"),
    preset!("dependence-kernel-2d", "dependence coefficients: four-point kernel in d = 2"),
    preset!("oracle", "exact identity suite on Rademacher windows"),
];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            Error::Config(format!("unknown preset `{name}`; available: {}", names.join(", ")))
        })?
        .config()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "clt"
reps = 500
[model]
family = "kernel"
dim = 1
terms = [{ offset = [0], coefficient = 1.0 }]
[scheme]
kind = "contiguous"
n = 100
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.seed, DEFAULT_SEED);
        assert_eq!(c.normalization, Normalization::ByBN);
        assert_eq!(c.variance_tolerance, 0.05);
        assert_eq!(c.significance, 0.01);
        assert_eq!(c.battery(), vec![TestKind::KsNormal, TestKind::VarianceRatio]);
        assert!(matches!(c.model, Some(ModelSpec::Kernel { innovation: InnovationSpec::Rademacher, .. })));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = format!("{MINIMAL}\n[fdd]\nhurst_exponentt = 0.7\n");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("hurst_exponentt"), "{err}");
    }

    #[test]
    fn too_few_reps_cites_minimum() {
        let err = parse_config_str(&MINIMAL.replace("reps = 500", "reps = 50")).unwrap_err().to_string();
        assert!(err.contains("100") && err.contains("reps"), "{err}");
    }

    #[test]
    fn wrong_type_names_key() {
        let err = parse_config_str(&MINIMAL.replace("reps = 500", "reps = \"many\"")).unwrap_err().to_string();
        assert!(err.contains("reps"), "{err}");
    }

    #[test]
    fn seeds_accept_hex_strings() {
        let a = parse_config_str(&format!("seed = \"0x10\"\n{MINIMAL}")).unwrap();
        let b = parse_config_str(&format!("seed = 16\n{MINIMAL}")).unwrap();
        assert_eq!(a.seed, 16);
        assert_eq!(a.hash(), b.hash());
        assert!(parse_config_str(&format!("seed = -3\n{MINIMAL}")).is_err());
    }

    #[test]
    fn hash_ignores_workers_only() {
        let a = parse_config_str(MINIMAL).unwrap();
        let mut b = a.clone();
        b.workers = 7;
        assert_eq!(a.hash(), b.hash());
        b.reps += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn dimension_mismatch_is_a_config_error() {
        let text = MINIMAL.replace("kind = \"contiguous\"\nn = 100", "kind = \"rectangle\"\nn = 10\nt = [1.0, 1.0]");
        assert!(matches!(parse_config_str(&text), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn every_preset_parses() {
        for p in PRESETS {
            let c = p.config().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert!(c.reps >= MIN_REPS);
        }
    }

    #[test]
    fn fdd_needs_two_points() {
        let text = MINIMAL.replace("experiment = \"clt\"", "experiment = \"fdd\"") + "[fdd]\npoints = [[1.0]]\n";
        assert!(parse_config_str(&text).is_err());
    }
}
