//! Experiment configuration: a single JSON document describing what to run.
//!
//! Unknown keys are rejected everywhere (`deny_unknown_fields`), and
//! [`ExperimentConfig::validate`] checks every field before anything
//! executes, so a config that loads and validates will not fail halfway
//! through a multi-run experiment for reasons of its own making.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use attnclust::mixtures::{make_orthonormal_centroids, CentroidMode, MixtureSpec};
use attnclust::optimize::{InitScheme, OptimizerConfig, Projection};
use attnclust::risk::{canonical_star_pair, oracle_unbiasing_lambda, RegForm};
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Which command a config drives. Matches the CLI subcommand names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Train,
    VerifyRisk,
    VerifyMoments,
    SweepReg,
    SweepDim,
    CtxStats,
    Embed,
    CriticalPoints,
}

impl ExperimentKind {
    /// The kebab-case name used on the command line and in config files.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Train => "train",
            ExperimentKind::VerifyRisk => "verify-risk",
            ExperimentKind::VerifyMoments => "verify-moments",
            ExperimentKind::SweepReg => "sweep-reg",
            ExperimentKind::SweepDim => "sweep-dim",
            ExperimentKind::CtxStats => "ctx-stats",
            ExperimentKind::Embed => "embed",
            ExperimentKind::CriticalPoints => "critical-points",
        }
    }
}

/// Data model (mirrors `attnclust::mixtures::MixtureSpec`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixtureKindConfig {
    Dirac,
    Gaussian,
    InContext,
}

/// How fixed centroids are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CentroidConfig {
    /// Deterministic signed-axis placement.
    Canonical,
    /// A fresh uniformly random orthonormal frame per run.
    Random,
}

/// Mixture parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    #[serde(default = "default_mixture_kind")]
    pub kind: MixtureKindConfig,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_seq_len")]
    pub seq_len: usize,
    /// Number of mixture components (and heads).
    #[serde(default = "default_components")]
    pub n_components: usize,
    #[serde(default = "default_centroid_config")]
    pub centroids: CentroidConfig,
}

fn default_mixture_kind() -> MixtureKindConfig {
    MixtureKindConfig::Gaussian
}
fn default_dim() -> usize {
    5
}
fn default_sigma() -> f64 {
    0.3
}
fn default_seq_len() -> usize {
    30
}
fn default_components() -> usize {
    2
}
fn default_centroid_config() -> CentroidConfig {
    CentroidConfig::Canonical
}

impl Default for MixtureConfig {
    fn default() -> Self {
        MixtureConfig {
            kind: default_mixture_kind(),
            dim: default_dim(),
            sigma: default_sigma(),
            seq_len: default_seq_len(),
            n_components: default_components(),
            centroids: default_centroid_config(),
        }
    }
}

/// Predictor family evaluated or trained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKindConfig {
    /// Multi-head linear attention with trainable heads.
    Linear,
    /// Shaped softmax attention (trainable heads, temperature, and shift).
    ShapedSoftmax,
    /// Linear attention with the true centroids as heads.
    Oracle,
    /// The parameter-free Gram predictor.
    Ctx,
}

/// Predictor parameters: kind, temperature, shift, and (optionally) explicit
/// head rows.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorConfig {
    #[serde(default = "default_predictor_kind")]
    pub kind: PredictorKindConfig,
    /// Temperature; `None` picks a kind-appropriate default (see
    /// [`ExperimentConfig::resolved_lambda`]).
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Shift parameter for the shaped softmax predictor.
    #[serde(default)]
    pub psi: Option<f64>,
    /// Explicit head rows, used when the optimizer init is `explicit`.
    #[serde(default)]
    pub heads: Option<Vec<Vec<f64>>>,
}

fn default_predictor_kind() -> PredictorKindConfig {
    PredictorKindConfig::Linear
}

impl Default for PredictorKindConfig {
    fn default() -> Self {
        default_predictor_kind()
    }
}

/// Head initialization for training runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitConfig {
    Sphere,
    Manifold,
    Explicit,
}

/// Multi-head overlap penalty shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegFormConfig {
    Pairwise,
    Product,
}

/// Optimizer hyperparameters (mirrors `attnclust::optimize::OptimizerConfig`;
/// the temperature and shift initials live in [`PredictorConfig`]).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub rho: f64,
    #[serde(default = "default_projection")]
    pub projection: ProjectionConfig,
    #[serde(default = "default_init")]
    pub init: InitConfig,
    #[serde(default = "default_reg_form")]
    pub reg_form: RegFormConfig,
    #[serde(default)]
    pub train_psi: bool,
    #[serde(default)]
    pub train_lambda: bool,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

/// Sphere projection style.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionConfig {
    Riemannian,
    Euclidean,
}

fn default_gamma() -> f64 {
    0.01
}
fn default_iterations() -> usize {
    10_000
}
fn default_batch_size() -> usize {
    256
}
fn default_projection() -> ProjectionConfig {
    ProjectionConfig::Riemannian
}
fn default_init() -> InitConfig {
    InitConfig::Sphere
}
fn default_reg_form() -> RegFormConfig {
    RegFormConfig::Pairwise
}
fn default_record_every() -> usize {
    10
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            gamma: default_gamma(),
            iterations: default_iterations(),
            batch_size: default_batch_size(),
            rho: 0.0,
            projection: default_projection(),
            init: default_init(),
            reg_form: default_reg_form(),
            train_psi: false,
            train_lambda: false,
            record_every: default_record_every(),
        }
    }
}

/// Value grid for the sweep experiments: either an explicit list or an
/// inclusive evenly spaced range.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepGrid {
    Values {
        values: Vec<f64>,
    },
    Range {
        start: f64,
        stop: f64,
        count: usize,
    },
}

impl SweepGrid {
    /// Materializes the grid values in order.
    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepGrid::Values { values } => values.clone(),
            SweepGrid::Range { start, stop, count } => {
                if *count == 1 {
                    vec![*start]
                } else {
                    let step = (stop - start) / (*count as f64 - 1.0);
                    (0..*count).map(|i| start + step * i as f64).collect()
                }
            }
        }
    }
}

/// The complete experiment description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub mixture: MixtureConfig,
    #[serde(default)]
    pub predictor: PredictorConfig,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    /// Number of independent runs; run `i` uses seed `seed + i`.
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    /// Base seed.
    #[serde(default)]
    pub seed: u64,
    /// Monte-Carlo sample budget for the verification and statistics
    /// commands.
    #[serde(default = "default_samples")]
    pub samples: u64,
    /// Grid for the sweep experiments.
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
    /// Output directory; `None` falls back to the CLI `--out` flag.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_runs() -> usize {
    10
}
fn default_samples() -> u64 {
    100_000
}

impl ExperimentConfig {
    /// A fresh config for `kind` with every other field at its default.
    pub fn for_kind(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment: kind,
            mixture: MixtureConfig::default(),
            predictor: PredictorConfig::default(),
            optimizer: OptimizerSettings::default(),
            n_runs: default_runs(),
            seed: 0,
            samples: default_samples(),
            sweep: None,
            out: None,
        }
    }

    /// Loads and validates a config file, rejecting unknown keys.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: ExperimentConfig = serde_json::from_str(&raw)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks every field; called before any run starts.
    pub fn validate(&self) -> Result<()> {
        let m = &self.mixture;
        if m.dim == 0 {
            bail!("mixture dimension must be positive");
        }
        if !(m.sigma.is_finite() && m.sigma >= 0.0) {
            bail!("noise scale must be finite and non-negative, got {}", m.sigma);
        }
        if m.seq_len == 0 {
            bail!("sequence length must be positive");
        }
        if m.n_components == 0 || m.n_components > m.dim {
            bail!(
                "need 1..=dim components, got {} in dimension {}",
                m.n_components,
                m.dim
            );
        }
        if m.kind == MixtureKindConfig::InContext && m.n_components != 2 {
            bail!("in-context mixtures always carry a centroid pair");
        }
        if let Some(l) = self.predictor.lambda {
            if !(l.is_finite() && l > 0.0) {
                bail!("temperature must be positive and finite, got {l}");
            }
        }
        if let Some(p) = self.predictor.psi {
            if !p.is_finite() {
                bail!("shift must be finite, got {p}");
            }
        }
        if self.n_runs == 0 {
            bail!("need at least one run");
        }
        if self.samples == 0 {
            bail!("need a positive sample budget");
        }
        if let Some(grid) = &self.sweep {
            let values = grid.values();
            if values.is_empty() {
                bail!("sweep grid is empty");
            }
            if values.iter().any(|v| !v.is_finite()) {
                bail!("sweep grid contains a non-finite value");
            }
        }
        match self.experiment {
            ExperimentKind::Train => {
                if !matches!(
                    self.predictor.kind,
                    PredictorKindConfig::Linear | PredictorKindConfig::ShapedSoftmax
                ) {
                    bail!("training needs a linear or shaped-softmax predictor");
                }
                if m.kind == MixtureKindConfig::InContext {
                    bail!("training against in-context data has no fixed reference centroids");
                }
                if self.predictor.kind == PredictorKindConfig::ShapedSoftmax
                    && m.n_components != 2
                {
                    bail!("the shaped softmax trainer is defined for a head pair");
                }
                self.optimizer_config()?.validate()?;
            }
            ExperimentKind::SweepReg => {
                if self.sweep.is_none() {
                    bail!("sweep-reg needs a sweep grid of regularization strengths");
                }
                if let Some(grid) = &self.sweep {
                    if grid.values().iter().any(|v| *v < 0.0) {
                        bail!("regularization strengths must be non-negative");
                    }
                }
                self.optimizer_config()?.validate()?;
            }
            ExperimentKind::SweepDim => {
                let grid = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| anyhow::anyhow!("sweep-dim needs a grid of dimensions"))?;
                for v in grid.values() {
                    if v.fract() != 0.0 || v < 3.0 {
                        bail!("sweep-dim grid entries must be integers >= 3, got {v}");
                    }
                }
                if !matches!(
                    self.predictor.kind,
                    PredictorKindConfig::Oracle | PredictorKindConfig::Ctx
                ) {
                    bail!("sweep-dim evaluates the oracle or ctx predictor");
                }
            }
            ExperimentKind::Embed => {
                if self.predictor.kind == PredictorKindConfig::ShapedSoftmax {
                    bail!("the embedding command projects linear-family predictors");
                }
                if m.dim < 2 {
                    bail!("embedding needs dimension >= 2 for a two-axis projection");
                }
            }
            ExperimentKind::VerifyRisk
            | ExperimentKind::VerifyMoments
            | ExperimentKind::CtxStats
            | ExperimentKind::CriticalPoints => {}
        }
        if let Some(rows) = &self.predictor.heads {
            if rows.len() != m.n_components {
                bail!(
                    "explicit heads carry {} rows for {} components",
                    rows.len(),
                    m.n_components
                );
            }
            if rows.iter().any(|r| r.len() != m.dim) {
                bail!("explicit head rows must have the mixture dimension {}", m.dim);
            }
        } else if self.optimizer.init == InitConfig::Explicit {
            bail!("explicit initialization needs predictor.heads");
        }
        Ok(())
    }

    /// The temperature to use, defaulting per predictor kind: 1 for linear,
    /// 3 for shaped softmax (the trainer's start), and the unbiasing
    /// temperature for the oracle and ctx predictors.
    pub fn resolved_lambda(&self) -> Result<f64> {
        if let Some(l) = self.predictor.lambda {
            return Ok(l);
        }
        Ok(match self.predictor.kind {
            PredictorKindConfig::Linear => 1.0,
            PredictorKindConfig::ShapedSoftmax => 3.0,
            PredictorKindConfig::Oracle => {
                oracle_unbiasing_lambda(self.mixture.sigma, self.mixture.seq_len)?
            }
            PredictorKindConfig::Ctx => attnclust::risk::ctx_unbiasing_lambda(
                self.mixture.sigma,
                self.mixture.dim,
                self.mixture.seq_len,
            )?,
        })
    }

    /// The shift parameter, defaulting to 2 for the shaped softmax predictor
    /// and 0 otherwise.
    pub fn resolved_psi(&self) -> f64 {
        self.predictor.psi.unwrap_or(match self.predictor.kind {
            PredictorKindConfig::ShapedSoftmax => 2.0,
            _ => 0.0,
        })
    }

    /// Assembles the library optimizer config.
    pub fn optimizer_config(&self) -> Result<OptimizerConfig> {
        let o = &self.optimizer;
        let init = match o.init {
            InitConfig::Sphere => InitScheme::UniformSphere,
            InitConfig::Manifold => InitScheme::OnManifold,
            InitConfig::Explicit => {
                let rows = self
                    .predictor
                    .heads
                    .as_ref()
                    .ok_or_else(|| anyhow::anyhow!("explicit initialization needs predictor.heads"))?;
                InitScheme::Explicit(heads_matrix(rows)?)
            }
        };
        Ok(OptimizerConfig {
            gamma: o.gamma,
            iterations: o.iterations,
            batch_size: o.batch_size,
            rho: o.rho,
            projection: match o.projection {
                ProjectionConfig::Riemannian => Projection::Riemannian,
                ProjectionConfig::Euclidean => Projection::Euclidean,
            },
            init,
            reg_form: match o.reg_form {
                RegFormConfig::Pairwise => RegForm::Pairwise,
                RegFormConfig::Product => RegForm::Product,
            },
            train_psi: o.train_psi,
            train_lambda: o.train_lambda,
            lambda_init: self.resolved_lambda()?,
            psi_init: self.resolved_psi(),
            record_every: o.record_every,
        })
    }

    /// The fixed centroids for this config (`None` for in-context data,
    /// which draws its own pair per sequence). Random mode consumes `rng`.
    pub fn centroid_matrix<R: Rng>(&self, rng: &mut R) -> Result<Option<Array2<f64>>> {
        let m = &self.mixture;
        if m.kind == MixtureKindConfig::InContext {
            return Ok(None);
        }
        let mode = match m.centroids {
            CentroidConfig::Canonical => CentroidMode::Canonical,
            CentroidConfig::Random => CentroidMode::Random,
        };
        let centroids = if m.n_components == 2 && mode == CentroidMode::Canonical {
            canonical_star_pair(m.dim)?
        } else {
            make_orthonormal_centroids(m.dim, m.n_components, mode, rng)?
        };
        Ok(Some(centroids))
    }

    /// Builds the mixture spec around `centroids` (ignored for in-context
    /// data).
    pub fn mixture_spec(&self, centroids: Option<&Array2<f64>>) -> Result<MixtureSpec> {
        let m = &self.mixture;
        Ok(match m.kind {
            MixtureKindConfig::InContext => MixtureSpec::in_context(m.dim, m.sigma)?,
            MixtureKindConfig::Dirac => MixtureSpec::dirac(
                centroids
                    .ok_or_else(|| anyhow::anyhow!("dirac mixtures need centroids"))?
                    .clone(),
            )?,
            MixtureKindConfig::Gaussian => MixtureSpec::gaussian(
                centroids
                    .ok_or_else(|| anyhow::anyhow!("gaussian mixtures need centroids"))?
                    .clone(),
                m.sigma,
            )?,
        })
    }
}

/// Converts explicit head rows into a matrix.
pub fn heads_matrix(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let k = rows.len();
    let d = rows.first().map(|r| r.len()).unwrap_or(0);
    if k == 0 || d == 0 {
        bail!("explicit heads must be a non-empty matrix");
    }
    let mut heads = Array2::zeros((k, d));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            bail!("explicit head rows have inconsistent lengths");
        }
        for (j, v) in row.iter().enumerate() {
            heads[[i, j]] = *v;
        }
    }
    Ok(heads)
}
