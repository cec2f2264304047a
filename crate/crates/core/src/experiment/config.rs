//! Experiment configuration: a TOML file with one flat table per concern.
//!
//! ```toml
//! [model]
//! name = "linreg_m1"
//!
//! [data]
//! source = "radiata"
//!
//! [estimators]
//! compute = ["exact", "wbic", "adjusted_wbic"]
//!
//! [sampler]
//! warmup = 5000
//!
//! [experiment]
//! replicates = 50
//! seed = 1
//! output_path = "out/m1"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::TemperatureLadder;
use crate::sampler::ChainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NormalMean,
    Mixture2,
    LinregM1,
    LinregM2,
    /// Regression on user-named CSV columns.
    Linreg,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::NormalMean => "normal_mean",
            ModelKind::Mixture2 => "mixture2",
            ModelKind::LinregM1 => "linreg_m1",
            ModelKind::LinregM2 => "linreg_m2",
            ModelKind::Linreg => "linreg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [Self::NormalMean, Self::Mixture2, Self::LinregM1, Self::LinregM2, Self::Linreg]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model '{s}'")))
    }

    pub fn is_regression(self) -> bool {
        matches!(self, ModelKind::LinregM1 | ModelKind::LinregM2 | ModelKind::Linreg)
    }

    /// Whether a closed-form log marginal likelihood exists.
    pub fn has_exact_oracle(self) -> bool {
        self != ModelKind::Mixture2
    }

    fn default_replicates(self) -> usize {
        match self {
            ModelKind::Mixture2 => 100,
            _ => 50,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Exact,
    Wbic,
    AdjustedWbic,
    NuHat,
    Ti,
    PriorMc,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Exact => "exact",
            EstimatorKind::Wbic => "wbic",
            EstimatorKind::AdjustedWbic => "adjusted_wbic",
            EstimatorKind::NuHat => "nu_hat",
            EstimatorKind::Ti => "ti",
            EstimatorKind::PriorMc => "prior_mc",
        }
    }

    /// Estimators computed from the draws of a single run at `t_w`.
    pub fn uses_wbic_draws(self) -> bool {
        matches!(self, EstimatorKind::Wbic | EstimatorKind::AdjustedWbic | EstimatorKind::NuHat)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Model identifier and optional hyperparameters. Unset hyperparameters take
/// the model's defaults; setting one that the model does not use is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: ModelKind,
    /// Normal-mean prior mean.
    pub prior_mean: Option<f64>,
    /// Normal-mean prior variance, or the component-mean prior variance of
    /// the mixture.
    pub prior_var: Option<f64>,
    pub alpha_mean: Option<f64>,
    pub beta_mean: Option<f64>,
    pub q_alpha: Option<f64>,
    pub q_beta: Option<f64>,
    /// Gamma prior on the precision: shape `a / 2`, rate `b / 2`.
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl ModelSection {
    pub fn named(name: ModelKind) -> Self {
        Self {
            name,
            prior_mean: None,
            prior_var: None,
            alpha_mean: None,
            beta_mean: None,
            q_alpha: None,
            q_beta: None,
            a: None,
            b: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// The bundled radiata pine fixture.
    Radiata,
    Csv,
    /// `n` draws of `N(mean, sd^2)`, regenerated for every replicate.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    pub path: Option<PathBuf>,
    /// Observation column for single-column models; defaults to the only column.
    pub column: Option<String>,
    pub covariate: Option<String>,
    pub response: Option<String>,
    pub n: Option<usize>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

impl DataSection {
    pub fn of(source: DataSource) -> Self {
        Self { source, path: None, column: None, covariate: None, response: None, n: None, mean: None, sd: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub compute: Vec<EstimatorKind>,
    pub prior_mc_draws: usize,
    pub ti_rungs: usize,
    pub ti_power: f64,
    pub ti_endpoint_draws: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            compute: vec![EstimatorKind::Wbic, EstimatorKind::AdjustedWbic],
            prior_mc_draws: 100_000,
            ti_rungs: 30,
            ti_power: 5.0,
            ti_endpoint_draws: crate::estimators::DEFAULT_ENDPOINT_DRAWS,
        }
    }
}

/// [`ChainConfig`] without the seed, which is derived per replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub n_chains: usize,
    pub warmup: usize,
    pub keep: usize,
    pub thin: usize,
    pub init_scale: f64,
    pub target_accept: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let c = ChainConfig::default();
        Self {
            n_chains: c.n_chains,
            warmup: c.warmup,
            keep: c.keep,
            thin: c.thin,
            init_scale: c.init_scale,
            target_accept: c.target_accept,
        }
    }
}

impl SamplerSection {
    pub fn chain_config(&self, seed: u64) -> ChainConfig {
        ChainConfig {
            n_chains: self.n_chains,
            warmup: self.warmup,
            keep: self.keep,
            thin: self.thin,
            init_scale: self.init_scale,
            target_accept: self.target_accept,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Defaults to 100 for the mixture and 50 otherwise.
    pub replicates: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; not part of the config hash.
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Also write the `t_w` draws of every replicate as tab-separated text.
    #[serde(default)]
    pub dump_draws: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub data: DataSection,
    #[serde(default)]
    pub estimators: EstimatorSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub experiment: RunSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(model: ModelSection, data: DataSection) -> Self {
        Self {
            model,
            data,
            estimators: EstimatorSection::default(),
            sampler: SamplerSection::default(),
            experiment: RunSection::default(),
            base_dir: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a config file; relative paths inside it resolve against its directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    pub fn replicates(&self) -> usize {
        self.experiment.replicates.unwrap_or_else(|| self.model.name.default_replicates())
    }

    /// Requested estimators, deduplicated, in canonical order.
    pub fn estimator_set(&self) -> Vec<EstimatorKind> {
        let mut v = self.estimators.compute.clone();
        v.sort();
        v.dedup();
        v
    }

    pub fn ladder(&self) -> Result<TemperatureLadder> {
        TemperatureLadder::power(self.estimators.ti_rungs, self.estimators.ti_power)
    }

    pub(crate) fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn data_path(&self) -> Option<PathBuf> {
        self.data.path.as_deref().map(|p| self.resolve(p))
    }

    pub fn output_path(&self) -> Option<PathBuf> {
        self.experiment.output_path.as_deref().map(|p| self.resolve(p))
    }

    /// SHA-256 over every field that affects results. The output path, the
    /// draw-dump flag and the config file's location are excluded, and the
    /// estimator list is taken as a set.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.experiment.output_path = None;
        canonical.experiment.dump_draws = false;
        canonical.experiment.replicates = Some(self.replicates());
        canonical.estimators.compute = self.estimator_set();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
