//! WBIC, the singular-fluctuation estimate and reference estimators of the
//! log marginal likelihood.

mod prior_mc;
mod ti;

use serde::{Deserialize, Serialize};

pub use prior_mc::{prior_mean_log_lik, prior_monte_carlo};
pub use ti::{
    thermodynamic_integration, thermodynamic_integration_with, Rung, TemperatureLadder, TiResult,
    DEFAULT_ENDPOINT_DRAWS,
};

use crate::error::{Error, Result};
use crate::sampler::diagnostics::{multi_chain_ess, MIN_SERIES_LEN};
use crate::sampler::{Diagnostics, DrawMatrix};

/// One estimator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimator_name: String,
    pub value: f64,
    /// Monte Carlo standard error; zero for deterministic estimators.
    pub mcse: f64,
    /// Inverse temperature the estimate refers to.
    pub t_used: f64,
    pub diagnostics: Option<Diagnostics>,
}

impl EstimateResult {
    pub fn new(name: &str, value: f64, mcse: f64, t_used: f64) -> Self {
        Self { estimator_name: name.to_string(), value, mcse, t_used, diagnostics: None }
    }

    pub fn with_diagnostics(mut self, diagnostics: Diagnostics) -> Self {
        self.diagnostics = Some(diagnostics);
        self
    }
}

/// `t_w = 1 / ln n`, clamped to 1 (with a warning) when `n` is so small that
/// `1 / ln n > 1`.
pub fn inverse_temperature_wbic(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::SampleSizeTooSmall(n));
    }
    let t = 1.0 / (n as f64).ln();
    if t > 1.0 {
        log::warn!("t_w = 1/ln({n}) = {t:.4} exceeds 1; clamping to 1");
        return Ok(1.0);
    }
    Ok(t)
}

/// Shifted mean and sample variance; identical inputs give exactly zero.
fn mean_and_variance(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut it = xs.clone();
    let Some(shift) = it.next() else { return (f64::NAN, f64::NAN) };
    let (mut n, mut s, mut ss) = (0usize, 0.0, 0.0);
    for x in xs {
        let d = x - shift;
        n += 1;
        s += d;
        ss += d * d;
    }
    let nf = n as f64;
    let mean_d = s / nf;
    let var = if n > 1 { (ss - s * mean_d) / (nf - 1.0) } else { 0.0 };
    (shift + mean_d, var.max(0.0))
}

/// Standard error of the mean of a per-draw series, deflated by its ESS when
/// chains are long enough to estimate one.
pub(crate) fn series_mcse(draws: &DrawMatrix, series: &[f64]) -> f64 {
    let s = series.len();
    if s < 2 {
        return 0.0;
    }
    let (_, var) = mean_and_variance(series.iter().copied());
    if var == 0.0 {
        return 0.0;
    }
    let ess = if draws.draws_per_chain() >= MIN_SERIES_LEN {
        multi_chain_ess(&draws.split_by_chain(series)).unwrap_or(s as f64)
    } else {
        s as f64
    };
    (var / ess).sqrt()
}

/// Posterior mean of the total log-likelihood at the draws' temperature.
pub fn posterior_mean_log_lik(draws: &DrawMatrix) -> EstimateResult {
    let totals = draws.total_log_lik();
    let (mean, _) = mean_and_variance(totals.iter().copied());
    EstimateResult::new("mean_log_lik", mean, series_mcse(draws, totals), draws.t())
}

fn check_wbic_temperature(draws: &DrawMatrix) -> Result<f64> {
    let tw = inverse_temperature_wbic(draws.n_obs())?;
    if (draws.t() - tw).abs() > 1e-12 {
        return Err(Error::TemperatureMismatch { expected: tw, found: draws.t() });
    }
    Ok(tw)
}

/// WBIC: posterior mean of `ln p(X^n | theta)` at `t_w = 1 / ln n`.
pub fn wbic(draws: &DrawMatrix) -> Result<EstimateResult> {
    check_wbic_temperature(draws)?;
    let mut r = posterior_mean_log_lik(draws);
    r.estimator_name = "wbic".into();
    Ok(r)
}

/// Gibbs training loss `GL(t_w) = -WBIC / n`.
pub fn gibbs_training_loss(draws: &DrawMatrix, n: usize) -> Result<f64> {
    if n != draws.n_obs() {
        return Err(Error::DimensionMismatch { what: "sample size", expected: draws.n_obs(), got: n });
    }
    Ok(-wbic(draws)?.value / n as f64)
}

/// Per-draw contributions `h_s` whose mean is `nu_hat`.
fn fluctuation_series(draws: &DrawMatrix) -> Result<Vec<f64>> {
    let s = draws.n_draws();
    if s < 2 {
        return Err(Error::TooFewDraws { min: 2, got: s });
    }
    let n = draws.n_obs();
    let means: Vec<f64> = (0..n)
        .map(|i| mean_and_variance((0..s).map(|k| draws.log_lik_row(k)[i])).0)
        .collect();
    let scale = 0.5 * draws.t() * s as f64 / (s as f64 - 1.0);
    Ok((0..s)
        .map(|k| {
            let g: f64 = draws.log_lik_row(k).iter().zip(&means).map(|(l, m)| (l - m) * (l - m)).sum();
            scale * g
        })
        .collect())
}

/// `nu_hat(t) = (t/2) Σ_i Var_s[ln p(x_i | theta_s)]` with the Bessel-corrected
/// sample variance pooled over all retained draws.
pub fn singular_fluctuation_hat(draws: &DrawMatrix) -> Result<EstimateResult> {
    let s = draws.n_draws();
    if s < 2 {
        return Err(Error::TooFewDraws { min: 2, got: s });
    }
    let n = draws.n_obs();
    let sum_var: f64 = (0..n)
        .map(|i| mean_and_variance((0..s).map(|k| draws.log_lik_row(k)[i])).1)
        .sum();
    let value = 0.5 * draws.t() * sum_var;
    let series = fluctuation_series(draws)?;
    Ok(EstimateResult::new("nu_hat", value, series_mcse(draws, &series), draws.t()))
}

/// `WBIC - nu_hat(t_w)`.
pub fn adjusted_wbic(draws: &DrawMatrix) -> Result<EstimateResult> {
    let w = wbic(draws)?;
    let nu = singular_fluctuation_hat(draws)?;
    let series: Vec<f64> = fluctuation_series(draws)?
        .iter()
        .zip(draws.total_log_lik())
        .map(|(h, l)| l - h)
        .collect();
    Ok(EstimateResult::new("adjusted_wbic", w.value - nu.value, series_mcse(draws, &series), w.t_used))
}
