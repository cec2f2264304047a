//! Multi-chain sampling of tempered posteriors.

pub mod diagnostics;
pub mod rwm;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use diagnostics::{effective_sample_size, potential_scale_reduction, Diagnostics, Ess, ScaleReduction};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, TemperedTarget};
use crate::par;

/// Sampler settings shared by every chain of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub n_chains: usize,
    pub warmup: usize,
    pub keep: usize,
    pub thin: usize,
    pub init_scale: f64,
    pub target_accept: f64,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { n_chains: 4, warmup: 5_000, keep: 20_000, thin: 4, init_scale: 1.0, target_accept: 0.3, seed: 0 }
    }
}

/// Minimum number of retained draws per chain.
pub const MIN_RETAINED_PER_CHAIN: usize = 100;

impl ChainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn retained_per_chain(&self) -> usize {
        self.keep / self.thin.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidChainConfig(msg));
        if self.n_chains == 0 || self.warmup == 0 || self.keep == 0 || self.thin == 0 {
            return fail(format!(
                "n_chains, warmup, keep and thin must be positive (got {}, {}, {}, {})",
                self.n_chains, self.warmup, self.keep, self.thin
            ));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return fail(format!("init_scale must be positive, got {}", self.init_scale));
        }
        if !(self.target_accept > 0.1 && self.target_accept < 0.6) {
            return fail(format!("target_accept must lie in (0.1, 0.6), got {}", self.target_accept));
        }
        if self.retained_per_chain() < MIN_RETAINED_PER_CHAIN {
            return fail(format!(
                "keep / thin = {} retained draws per chain; at least {MIN_RETAINED_PER_CHAIN} required",
                self.retained_per_chain()
            ));
        }
        Ok(())
    }
}

/// Retained draws with cached per-observation log-likelihoods.
///
/// Draws are stored chain by chain in chain-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    dim: usize,
    n_obs: usize,
    n_chains: usize,
    t: f64,
    draws: Vec<f64>,
    log_lik_rows: Vec<f64>,
    totals: Vec<f64>,
}

impl DrawMatrix {
    /// `draws` is `S x dim` and `log_lik_rows` is `S x n_obs`, both row-major.
    /// `S` must be divisible by `n_chains`.
    pub fn new(
        dim: usize,
        n_obs: usize,
        n_chains: usize,
        t: f64,
        draws: Vec<f64>,
        log_lik_rows: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 || n_obs == 0 || n_chains == 0 {
            return Err(Error::Empty("draw matrix dimensions"));
        }
        if !draws.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { what: "draw matrix", expected: dim, got: draws.len() % dim });
        }
        let s = draws.len() / dim;
        if log_lik_rows.len() != s * n_obs {
            return Err(Error::DimensionMismatch {
                what: "log-likelihood rows",
                expected: s * n_obs,
                got: log_lik_rows.len(),
            });
        }
        if s == 0 || !s.is_multiple_of(n_chains) {
            return Err(Error::InvalidChainConfig(format!("{s} draws cannot be split into {n_chains} chains")));
        }
        let totals = log_lik_rows.chunks_exact(n_obs).map(|r| r.iter().sum()).collect();
        Ok(Self { dim, n_obs, n_chains, t, draws, log_lik_rows, totals })
    }

    pub fn n_draws(&self) -> usize {
        self.totals.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_chains(&self) -> usize {
        self.n_chains
    }

    pub fn draws_per_chain(&self) -> usize {
        self.n_draws() / self.n_chains
    }

    /// Inverse temperature the draws target.
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Unconstrained parameters of draw `s`.
    pub fn draw(&self, s: usize) -> &[f64] {
        &self.draws[s * self.dim..(s + 1) * self.dim]
    }

    pub fn log_lik_row(&self, s: usize) -> &[f64] {
        &self.log_lik_rows[s * self.n_obs..(s + 1) * self.n_obs]
    }

    /// Per-draw total log-likelihood (row sums of the cached matrix).
    pub fn total_log_lik(&self) -> &[f64] {
        &self.totals
    }

    /// Values of unconstrained parameter `j`, one slice-able vector per chain.
    pub fn param_chains(&self, j: usize) -> Vec<Vec<f64>> {
        let per = self.draws_per_chain();
        (0..self.n_chains)
            .map(|c| (c * per..(c + 1) * per).map(|s| self.draws[s * self.dim + j]).collect())
            .collect()
    }

    /// Split `series` (length `S`) into per-chain slices.
    pub fn split_by_chain<'s>(&self, series: &'s [f64]) -> Vec<&'s [f64]> {
        series.chunks_exact(self.draws_per_chain()).collect()
    }

    /// Copy with observation columns reordered by `order`.
    pub fn permute_observations(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_obs {
            return Err(Error::DimensionMismatch { what: "permutation", expected: self.n_obs, got: order.len() });
        }
        let rows = (0..self.n_draws())
            .flat_map(|s| {
                let row = self.log_lik_row(s);
                order.iter().map(move |&i| row[i])
            })
            .collect();
        Self::new(self.dim, self.n_obs, self.n_chains, self.t, self.draws.clone(), rows)
    }

    /// Plain-text dump: a `#` header naming the columns, then one draw per line,
    /// tab-separated native parameters followed by the total log-likelihood,
    /// each with 17 significant digits.
    pub fn write_text<W: Write>(&self, spec: &ModelSpec, mut out: W) -> std::io::Result<()> {
        let names: Vec<&str> = spec.params().iter().map(|p| p.name.as_str()).collect();
        writeln!(out, "# {}\tlog_lik", names.join("\t"))?;
        for s in 0..self.n_draws() {
            let native = spec.to_native(self.draw(s));
            let fields: Vec<String> = native.iter().chain([self.totals[s]].iter()).map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", fields.join("\t"))?;
        }
        Ok(())
    }
}

/// Samples the tempered posterior with `config.n_chains` independent chains.
/// Output is a deterministic function of `(target, config)`.
pub fn sample_tempered(target: &TemperedTarget<'_>, config: &ChainConfig) -> Result<(DrawMatrix, Diagnostics)> {
    config.validate()?;
    if !(target.t() > 0.0 && target.t() <= 1.0) {
        return Err(Error::InvalidTemperature(target.t()));
    }
    let outputs = par::map_indexed(config.n_chains, |chain| {
        rwm::warmup_chain(target, config, chain)
            .map(|state| rwm::sample_chain(target, state, config.keep, config.thin))
    });
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let dim = target.dim();
    let n = target.data().n();
    let mut draws = Vec::with_capacity(outputs.iter().map(|o| o.draws.len()).sum());
    let mut rows = Vec::with_capacity(outputs.iter().map(|o| o.log_lik_rows.len()).sum());
    let mut accept_rate = Vec::with_capacity(outputs.len());
    for out in outputs {
        draws.extend_from_slice(&out.draws);
        rows.extend_from_slice(&out.log_lik_rows);
        accept_rate.push(out.accept_rate);
    }
    let matrix = DrawMatrix::new(dim, n, config.n_chains, target.t(), draws, rows)?;
    let diagnostics = diagnose(&matrix, accept_rate)?;
    if diagnostics.rhat_warning {
        log::warn!(
            "{} at t = {:.5}: max R-hat {:.3} exceeds {}",
            target.model().spec().name(),
            target.t(),
            diagnostics.rhat_max(),
            diagnostics::RHAT_WARN
        );
    }
    Ok((matrix, diagnostics))
}

fn diagnose(m: &DrawMatrix, accept_rate: Vec<f64>) -> Result<Diagnostics> {
    let mut ess = Vec::with_capacity(m.dim());
    let mut rhat = Vec::with_capacity(m.dim());
    for j in 0..m.dim() {
        let chains = m.param_chains(j);
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        ess.push(diagnostics::multi_chain_ess(&refs)?);
        rhat.push(diagnostics::multi_chain_rhat(&refs)?);
    }
    let ll = m.split_by_chain(m.total_log_lik());
    let log_lik_ess = diagnostics::multi_chain_ess(&ll)?;
    let log_lik_rhat = diagnostics::multi_chain_rhat(&ll)?;
    let rhat_warning = rhat.iter().any(|&r| !(r <= diagnostics::RHAT_WARN));
    Ok(Diagnostics { accept_rate, ess, rhat, log_lik_ess, log_lik_rhat, rhat_warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_normal;
    use crate::model::{Mixture2, Model, NormalMean};

    fn small() -> ChainConfig {
        ChainConfig { n_chains: 2, warmup: 500, keep: 1_000, thin: 2, seed: 11, ..ChainConfig::default() }
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::default().validate().is_ok());
        let bad = [
            ChainConfig { n_chains: 0, ..ChainConfig::default() },
            ChainConfig { keep: 300, thin: 4, ..ChainConfig::default() },
            ChainConfig { target_accept: 0.6, ..ChainConfig::default() },
            ChainConfig { target_accept: 0.1, ..ChainConfig::default() },
            ChainConfig { init_scale: 0.0, ..ChainConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn draw_count_and_row_sums() {
        let model = NormalMean::new(0.0, 1.0).unwrap();
        let data = synthetic_normal(30, 0.0, 1.0, 1).unwrap();
        let target = TemperedTarget::new(&model, &data, 0.5).unwrap();
        let cfg = small();
        let (m, diag) = sample_tempered(&target, &cfg).unwrap();
        assert_eq!(m.n_draws(), cfg.n_chains * cfg.keep / cfg.thin);
        assert_eq!(diag.accept_rate.len(), 2);
        for s in (0..m.n_draws()).step_by(100) {
            let native = model.spec().to_native(m.draw(s));
            let direct = model.total_log_lik_native(&native, &data);
            assert!((direct - m.total_log_lik()[s]).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_zero_temperature_target() {
        let model = NormalMean::new(0.0, 1.0).unwrap();
        let data = synthetic_normal(30, 0.0, 1.0, 1).unwrap();
        let target = TemperedTarget::at_prior(&model, &data).unwrap();
        assert!(matches!(sample_tempered(&target, &small()), Err(Error::InvalidTemperature(_))));
    }

    #[test]
    fn degenerate_mixture_data_is_handled() {
        let model = Mixture2::default();
        let data = Dataset::from_column("x", vec![1.5; 20]).unwrap();
        let target = TemperedTarget::new(&model, &data, 0.4).unwrap();
        let (m, _) = sample_tempered(&target, &small()).unwrap();
        assert!((0..m.n_draws()).all(|s| m.draw(s).iter().all(|v| v.is_finite())));
        assert!(m.total_log_lik().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn draw_matrix_shape_checks() {
        assert!(DrawMatrix::new(1, 2, 1, 1.0, vec![0.0, 1.0], vec![0.0; 3]).is_err());
        assert!(DrawMatrix::new(1, 2, 2, 1.0, vec![0.0; 3], vec![0.0; 6]).is_err());
        let m = DrawMatrix::new(1, 2, 1, 1.0, vec![0.0, 1.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.total_log_lik(), &[3.0, 7.0]);
        let p = m.permute_observations(&[1, 0]).unwrap();
        assert_eq!(p.log_lik_row(1), &[4.0, 3.0]);
    }

    #[test]
    fn text_dump_format() {
        let model = NormalMean::new(0.0, 1.0).unwrap();
        let m = DrawMatrix::new(1, 2, 1, 1.0, vec![0.1, -0.2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        m.write_text(model.spec(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# theta\tlog_lik");
        assert_eq!(lines.len(), 3);
        let fields: Vec<f64> = lines[1].split('\t').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields, vec![0.1, 3.0]);
    }

    use crate::model::Dataset;
}
