//! Configuration-driven replicated estimation runs.
//!
//! Replicate `r` draws every random quantity from `seeds::derive(seed, [r])`,
//! further split by purpose (data, sampler, TI, prior Monte Carlo). Adding or
//! removing an estimator therefore never changes the values of the others.

pub mod config;
mod report;

use std::path::PathBuf;
use std::time::Instant;

pub use config::{
    DataSection, DataSource, EstimatorKind, EstimatorSection, ExperimentConfig, ModelKind, ModelSection, RunSection,
    SamplerSection,
};
pub use report::{summarize, EstimatorSummary, ReplicateRecord, Report};

use crate::data::{self, RadiataDesign};
use crate::error::{Error, Result};
use crate::estimators::{self, TemperatureLadder};
use crate::model::{Dataset, LinReg, Mixture2, Model, NormalGammaPrior, NormalMean, TemperedTarget};
use crate::oracles::{self, RegressionDesign};
use crate::sampler::{diagnostics::RHAT_WARN, sample_tempered, ChainConfig};
use crate::{par, seeds};

/// Environment variable overriding the number of worker threads.
pub const THREADS_ENV: &str = "WBIC_THREADS";

/// Worker count from [`THREADS_ENV`], or the build's default.
pub fn worker_threads() -> Result<usize> {
    parse_threads(std::env::var(THREADS_ENV).ok().as_deref())
}

fn parse_threads(value: Option<&str>) -> Result<usize> {
    match value {
        Some(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{s}'"))),
        },
        None => Ok(par::default_threads()),
    }
}

#[derive(Debug, Clone, Copy)]
enum Oracle {
    Normal { m: f64, v: f64 },
    Regression(NormalGammaPrior),
    None,
}

#[derive(Debug, Clone, Copy)]
struct Generator {
    n: usize,
    mean: f64,
    sd: f64,
}

/// A validated experiment: model built, fixed data loaded, settings checked.
#[derive(Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    model: Box<dyn Model>,
    oracle: Oracle,
    fixed_data: Option<Dataset>,
    generator: Option<Generator>,
    estimators: Vec<EstimatorKind>,
    ladder: TemperatureLadder,
    sampler: ChainConfig,
    output_path: Option<PathBuf>,
}

fn unused(name: &str, value: Option<f64>, model: ModelKind) -> Result<()> {
    match value {
        Some(_) => Err(Error::Config(format!("hyperparameter '{name}' does not apply to model {model}"))),
        None => Ok(()),
    }
}

fn build_model(section: &ModelSection) -> Result<(Box<dyn Model>, Oracle)> {
    let kind = section.name;
    let regression_keys = [
        ("alpha_mean", section.alpha_mean),
        ("beta_mean", section.beta_mean),
        ("q_alpha", section.q_alpha),
        ("q_beta", section.q_beta),
        ("a", section.a),
        ("b", section.b),
    ];
    match kind {
        ModelKind::NormalMean => {
            for (k, v) in regression_keys {
                unused(k, v, kind)?;
            }
            let (m, v) = (section.prior_mean.unwrap_or(0.0), section.prior_var.unwrap_or(1.0));
            Ok((Box::new(NormalMean::new(m, v)?), Oracle::Normal { m, v }))
        }
        ModelKind::Mixture2 => {
            for (k, v) in regression_keys {
                unused(k, v, kind)?;
            }
            unused("prior_mean", section.prior_mean, kind)?;
            let model = match section.prior_var {
                Some(v) => Mixture2::new(v)?,
                None => Mixture2::default(),
            };
            Ok((Box::new(model), Oracle::None))
        }
        ModelKind::LinregM1 | ModelKind::LinregM2 | ModelKind::Linreg => {
            unused("prior_mean", section.prior_mean, kind)?;
            unused("prior_var", section.prior_var, kind)?;
            let d = NormalGammaPrior::RADIATA;
            let prior = NormalGammaPrior {
                mean: [section.alpha_mean.unwrap_or(d.mean[0]), section.beta_mean.unwrap_or(d.mean[1])],
                q: [section.q_alpha.unwrap_or(d.q[0]), section.q_beta.unwrap_or(d.q[1])],
                a: section.a.unwrap_or(d.a),
                b: section.b.unwrap_or(d.b),
            };
            Ok((Box::new(LinReg::new(kind.as_str(), prior)?), Oracle::Regression(prior)))
        }
    }
}

fn design(kind: ModelKind) -> Option<RadiataDesign> {
    match kind {
        ModelKind::LinregM1 => Some(RadiataDesign::M1),
        ModelKind::LinregM2 => Some(RadiataDesign::M2),
        _ => None,
    }
}

fn reject_keys(source: DataSource, keys: &[(&str, bool)]) -> Result<()> {
    match keys.iter().find(|(_, set)| *set) {
        Some((k, _)) => Err(Error::Config(format!("data key '{k}' does not apply to source {source:?}"))),
        None => Ok(()),
    }
}

/// Regression column names: implied by the design for the radiata models,
/// required for the generic regression.
fn regression_columns(config: &ExperimentConfig) -> Result<(String, String)> {
    let d = &config.data;
    match design(config.model.name) {
        Some(des) => Ok((
            d.covariate.clone().unwrap_or_else(|| des.covariate().to_string()),
            d.response.clone().unwrap_or_else(|| data::RADIATA_RESPONSE.to_string()),
        )),
        None => match (&d.covariate, &d.response) {
            (Some(c), Some(r)) => Ok((c.clone(), r.clone())),
            _ => Err(Error::Config("model linreg needs data.covariate and data.response".into())),
        },
    }
}

fn load_fixed(config: &ExperimentConfig) -> Result<Option<Dataset>> {
    let d = &config.data;
    let kind = config.model.name;
    let synthetic_keys = [("n", d.n.is_some()), ("mean", d.mean.is_some()), ("sd", d.sd.is_some())];
    match d.source {
        DataSource::Synthetic => Ok(None),
        DataSource::Radiata => {
            reject_keys(d.source, &synthetic_keys)?;
            reject_keys(d.source, &[("path", d.path.is_some()), ("column", d.column.is_some())])?;
            if !kind.is_regression() {
                return Err(Error::Config(format!("the radiata data only fits the regression models, not {kind}")));
            }
            let (cov, resp) = regression_columns(config)?;
            data::regression_dataset(&data::radiata_raw(), &cov, &resp).map(Some)
        }
        DataSource::Csv => {
            reject_keys(d.source, &synthetic_keys)?;
            let path = config.data_path().ok_or_else(|| Error::Config("data.source = \"csv\" needs data.path".into()))?;
            let raw = Dataset::from_csv_path(&path)?;
            if kind.is_regression() {
                reject_keys(d.source, &[("column", d.column.is_some())])?;
                let (cov, resp) = regression_columns(config)?;
                return data::regression_dataset(&raw, &cov, &resp).map(Some);
            }
            reject_keys(d.source, &[("covariate", d.covariate.is_some()), ("response", d.response.is_some())])?;
            let name = match &d.column {
                Some(c) => c.clone(),
                None if raw.width() == 1 => raw.column_names()[0].clone(),
                None => {
                    return Err(Error::Config(format!(
                        "{} has {} columns; set data.column",
                        path.display(),
                        raw.width()
                    )))
                }
            };
            let values = raw
                .column(&name)
                .ok_or_else(|| Error::InvalidDataset(format!("missing column '{name}' in {}", path.display())))?;
            Dataset::from_column(&name, values).map(Some)
        }
    }
}

impl Experiment {
    /// Parses and checks everything that can be checked without sampling.
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        let (model, oracle) = build_model(&config.model)?;
        let kind = config.model.name;
        let estimators = config.estimator_set();
        if estimators.is_empty() {
            return Err(Error::Config("estimators.compute is empty".into()));
        }
        if estimators.contains(&EstimatorKind::Exact) && !kind.has_exact_oracle() {
            return Err(Error::Config(format!("no exact oracle exists for model {kind}")));
        }
        if config.replicates() == 0 {
            return Err(Error::Config("experiment.replicates must be positive".into()));
        }
        if config.estimators.prior_mc_draws == 0 {
            return Err(Error::Config("estimators.prior_mc_draws must be positive".into()));
        }
        if config.estimators.ti_endpoint_draws < 2 {
            return Err(Error::Config("estimators.ti_endpoint_draws must be at least 2".into()));
        }
        let ladder = config.ladder()?;
        let sampler = config.sampler.chain_config(config.experiment.seed);
        sampler.validate()?;
        let output_path = config.output_path();
        if config.experiment.dump_draws && output_path.is_none() {
            return Err(Error::Config("experiment.dump_draws needs experiment.output_path".into()));
        }

        let generator = match config.data.source {
            DataSource::Synthetic => {
                let d = &config.data;
                reject_keys(
                    d.source,
                    &[
                        ("path", d.path.is_some()),
                        ("column", d.column.is_some()),
                        ("covariate", d.covariate.is_some()),
                        ("response", d.response.is_some()),
                    ],
                )?;
                if kind.is_regression() {
                    return Err(Error::Config("synthetic data is only available for normal_mean and mixture2".into()));
                }
                let n = d.n.ok_or_else(|| Error::Config("synthetic data needs data.n".into()))?;
                let g = Generator { n, mean: d.mean.unwrap_or(0.0), sd: d.sd.unwrap_or(1.0) };
                if n < 2 {
                    return Err(Error::Config(format!("synthetic data needs n >= 2, got {n}")));
                }
                if !(g.sd > 0.0 && g.sd.is_finite() && g.mean.is_finite()) {
                    return Err(Error::Config(format!("invalid generator N({}, {}^2)", g.mean, g.sd)));
                }
                Some(g)
            }
            _ => None,
        };
        let fixed_data = load_fixed(&config)?;
        if let Some(d) = &fixed_data {
            // the regression oracle also checks its own preconditions here
            if let Oracle::Regression(prior) = oracle {
                RegressionDesign::from_dataset(d, prior)?;
            }
        }
        Ok(Self { config, model, oracle, fixed_data, generator, estimators, ladder, sampler, output_path })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn model(&self) -> &dyn Model {
        self.model.as_ref()
    }

    /// The fixed dataset, or `None` when data is regenerated per replicate.
    pub fn fixed_data(&self) -> Option<&Dataset> {
        self.fixed_data.as_ref()
    }

    pub fn n_obs(&self) -> usize {
        match (&self.fixed_data, &self.generator) {
            (Some(d), _) => d.n(),
            (None, Some(g)) => g.n,
            (None, None) => unreachable!("prepared experiments have data"),
        }
    }

    /// Closed-form log marginal likelihood on `data`, where one exists.
    pub fn exact(&self, data: &Dataset) -> Result<Option<f64>> {
        match self.oracle {
            Oracle::Normal { m, v } => {
                let xs: Vec<f64> = data.rows().map(|r| r[0]).collect();
                oracles::normal_mean_exact_log_marginal(&xs, m, v).map(Some)
            }
            Oracle::Regression(prior) => {
                oracles::linreg_exact_log_marginal(&RegressionDesign::from_dataset(data, prior)?).map(Some)
            }
            Oracle::None => Ok(None),
        }
    }

    /// Dataset used by replicate `r`.
    pub fn replicate_data(&self, r: usize) -> Result<Dataset> {
        match (&self.fixed_data, self.generator) {
            (Some(d), _) => Ok(d.clone()),
            (None, Some(g)) => {
                let seed = seeds::derive(self.replicate_seed(r), &[seeds::tag("data")]);
                data::synthetic_normal(g.n, g.mean, g.sd, seed)
            }
            (None, None) => unreachable!("prepared experiments have data"),
        }
    }

    pub fn replicate_seed(&self, r: usize) -> u64 {
        seeds::derive(self.config.experiment.seed, &[r as u64])
    }

    fn run_replicate(&self, r: usize) -> Result<(Vec<ReplicateRecord>, Vec<String>)> {
        let seed = self.replicate_seed(r);
        let data = self.replicate_data(r)?;
        let model = self.model.as_ref();
        let mut records = Vec::with_capacity(self.estimators.len());
        let mut notes = Vec::new();
        let record = |estimator, value, mcse, rhat_max| ReplicateRecord { replicate: r, estimator, value, mcse, rhat_max, seed };

        if self.estimators.contains(&EstimatorKind::Exact) {
            let v = self.exact(&data)?.expect("checked in prepare");
            records.push(record(EstimatorKind::Exact, v, 0.0, None));
        }
        if self.estimators.iter().any(|e| e.uses_wbic_draws()) {
            let t = estimators::inverse_temperature_wbic(data.n())?;
            let target = TemperedTarget::new(model, &data, t)?;
            let cfg = self.sampler.clone().with_seed(seeds::derive(seed, &[seeds::tag("sampler")]));
            let (draws, diag) = sample_tempered(&target, &cfg)?;
            let rhat = diag.rhat_max();
            if !(rhat <= RHAT_WARN) {
                notes.push(format!("replicate {r}: max R-hat {rhat:.3} at t_w"));
            }
            if self.config.experiment.dump_draws {
                self.dump(r, &draws)?;
            }
            for &e in &self.estimators {
                let est = match e {
                    EstimatorKind::Wbic => estimators::wbic(&draws)?,
                    EstimatorKind::AdjustedWbic => estimators::adjusted_wbic(&draws)?,
                    EstimatorKind::NuHat => estimators::singular_fluctuation_hat(&draws)?,
                    _ => continue,
                };
                records.push(record(e, est.value, est.mcse, Some(rhat)));
            }
        }
        if self.estimators.contains(&EstimatorKind::Ti) {
            let cfg = self.sampler.clone().with_seed(seeds::derive(seed, &[seeds::tag("ti")]));
            let ti = estimators::thermodynamic_integration_with(
                model,
                &data,
                &self.ladder,
                &cfg,
                self.config.estimators.ti_endpoint_draws,
            )?;
            let rhat = ti.rungs[1..].iter().map(|g| g.rhat_max).fold(f64::NAN, f64::max);
            if !ti.monotonicity_violations.is_empty() {
                notes.push(format!(
                    "replicate {r}: TI integrand decreases beyond 2 MCSE after rungs {:?}",
                    ti.monotonicity_violations
                ));
            }
            notes.extend(ti.warnings.iter().map(|w| format!("replicate {r}: TI {w}")));
            records.push(record(EstimatorKind::Ti, ti.estimate.value, ti.estimate.mcse, Some(rhat)));
        }
        if self.estimators.contains(&EstimatorKind::PriorMc) {
            let s = seeds::derive(seed, &[seeds::tag("prior_mc")]);
            let est = estimators::prior_monte_carlo(model, &data, self.config.estimators.prior_mc_draws, s)?;
            records.push(record(EstimatorKind::PriorMc, est.value, est.mcse, None));
        }
        Ok((records, notes))
    }

    fn dump(&self, r: usize, draws: &crate::sampler::DrawMatrix) -> Result<()> {
        let dir = self.output_path.as_ref().expect("checked in prepare").join("draws");
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
        let path = dir.join(format!("replicate_{r:04}.tsv"));
        let file = std::fs::File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        let mut w = std::io::BufWriter::new(file);
        draws.write_text(self.model.spec(), &mut w).map_err(|e| Error::Io { path, source: e })
    }

    /// Runs every replicate (in parallel) and aggregates in replicate order.
    pub fn run(&self) -> Result<Report> {
        let started = Instant::now();
        let threads = worker_threads()?;
        let n_rep = self.config.replicates();
        log::info!(
            "running {} replicates of {} with {threads} worker(s)",
            n_rep,
            self.config.model.name
        );
        let results = par::with_threads(threads, || par::map_indexed(n_rep, |r| self.run_replicate(r)));
        let mut records = Vec::with_capacity(n_rep * self.estimators.len());
        let mut notes = Vec::new();
        for res in results {
            let (rec, nts) = res?;
            records.extend(rec);
            notes.extend(nts);
        }
        if self.estimators.contains(&EstimatorKind::PriorMc) {
            notes.push(format!(
                "prior Monte Carlo uses {} prior draws per replicate",
                self.config.estimators.prior_mc_draws
            ));
        }
        let mut report = Report::assemble(
            self.config.model.name.to_string(),
            self.n_obs(),
            n_rep,
            self.config.hash(),
            &self.estimators,
            records,
            notes,
        )?;
        report.wall_time_secs = started.elapsed().as_secs_f64();
        Ok(report)
    }

    /// Writes the report files into the configured output directory, if any.
    pub fn write_outputs(&self, report: &Report) -> Result<Option<PathBuf>> {
        match &self.output_path {
            Some(dir) => report.write_outputs(dir).map(|_| Some(dir.clone())),
            None => Ok(None),
        }
    }
}

/// Validates `config` and runs it.
pub fn run_experiment(config: ExperimentConfig) -> Result<Report> {
    Experiment::prepare(config)?.run()
}
