use serde::{Deserialize, Serialize};

use super::{posterior_mean_log_lik, prior_mean_log_lik, EstimateResult};
use crate::error::{Error, Result};
use crate::model::{Dataset, Model, TemperedTarget};
use crate::sampler::{sample_tempered, ChainConfig};
use crate::{par, seeds};

/// Prior draws used for the `t = 0` endpoint when none is specified.
pub const DEFAULT_ENDPOINT_DRAWS: usize = 100_000;

/// Inverse temperatures `t_k = (k / K)^power`, `k = 1..K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureLadder {
    ts: Vec<f64>,
    schedule_power: f64,
}

impl TemperatureLadder {
    pub fn power(rungs: usize, schedule_power: f64) -> Result<Self> {
        if rungs == 0 {
            return Err(Error::InvalidLadder("at least one rung is required".into()));
        }
        if !(schedule_power > 0.0 && schedule_power.is_finite()) {
            return Err(Error::InvalidLadder(format!("schedule power must be positive, got {schedule_power}")));
        }
        let k = rungs as f64;
        let ts = (1..=rungs).map(|i| (i as f64 / k).powf(schedule_power)).collect();
        Ok(Self { ts, schedule_power })
    }

    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    pub fn schedule_power(&self) -> f64 {
        self.schedule_power
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }
}

impl Default for TemperatureLadder {
    fn default() -> Self {
        Self::power(30, 5.0).expect("valid default ladder")
    }
}

/// Posterior mean log-likelihood at one inverse temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub t: f64,
    pub mean_log_lik: f64,
    pub mcse: f64,
    pub rhat_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiResult {
    pub estimate: EstimateResult,
    /// Rungs including the `t = 0` prior endpoint.
    pub rungs: Vec<Rung>,
    /// Indices `k` where rung `k + 1` falls below rung `k` by more than
    /// `2 (mcse_k + mcse_{k+1})`, i.e. further than both rungs being two
    /// standard errors off can explain.
    pub monotonicity_violations: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Trapezoid weights on the grid `t_0 < ... < t_K`.
fn trapezoid_weights(ts: &[f64]) -> Vec<f64> {
    let k = ts.len();
    (0..k)
        .map(|i| {
            let left = if i > 0 { ts[i] - ts[i - 1] } else { 0.0 };
            let right = if i + 1 < k { ts[i + 1] - ts[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Thermodynamic integration of `E_t[ln p(X^n | theta)]` over `t in [0, 1]`
/// with the default number of prior draws at `t = 0`.
pub fn thermodynamic_integration(
    model: &dyn Model,
    data: &Dataset,
    ladder: &TemperatureLadder,
    config: &ChainConfig,
) -> Result<TiResult> {
    thermodynamic_integration_with(model, data, ladder, config, DEFAULT_ENDPOINT_DRAWS)
}

/// Thermodynamic integration: one tempered sampling run per ladder rung, the
/// `t = 0` endpoint from exact prior draws, and trapezoid quadrature.
pub fn thermodynamic_integration_with(
    model: &dyn Model,
    data: &Dataset,
    ladder: &TemperatureLadder,
    config: &ChainConfig,
    endpoint_draws: usize,
) -> Result<TiResult> {
    config.validate()?;
    let (prior_mean, prior_se) =
        prior_mean_log_lik(model, data, endpoint_draws, seeds::derive(config.seed, &[seeds::tag("ti-prior")]))?;

    let sampled = par::map_indexed(ladder.len(), |k| -> Result<Rung> {
        let t = ladder.ts()[k];
        let target = TemperedTarget::new(model, data, t)?;
        let rung_config = config.clone().with_seed(seeds::derive(config.seed, &[seeds::tag("ti-rung"), k as u64]));
        let (draws, diag) = sample_tempered(&target, &rung_config)?;
        let est = posterior_mean_log_lik(&draws);
        Ok(Rung { t, mean_log_lik: est.value, mcse: est.mcse, rhat_max: diag.rhat_max() })
    });

    let mut rungs = vec![Rung { t: 0.0, mean_log_lik: prior_mean, mcse: prior_se, rhat_max: 1.0 }];
    for r in sampled {
        rungs.push(r?);
    }

    let mut warnings = Vec::new();
    if ladder.len() == 1 {
        warnings.push("single-rung ladder: quadrature is a two-point trapezoid and strongly biased".to_string());
    }
    for r in &rungs[1..] {
        if !(r.rhat_max <= crate::sampler::diagnostics::RHAT_WARN) {
            warnings.push(format!("rung t = {:.3e}: max R-hat {:.3}", r.t, r.rhat_max));
        }
    }
    for w in &warnings {
        log::warn!("thermodynamic integration ({}): {w}", model.spec().name());
    }

    let ts: Vec<f64> = rungs.iter().map(|r| r.t).collect();
    let weights = trapezoid_weights(&ts);
    let value: f64 = weights.iter().zip(&rungs).map(|(w, r)| w * r.mean_log_lik).sum();
    let mcse = weights.iter().zip(&rungs).map(|(w, r)| (w * r.mcse).powi(2)).sum::<f64>().sqrt();

    let monotonicity_violations = rungs
        .windows(2)
        .enumerate()
        .filter(|(_, p)| p[1].mean_log_lik < p[0].mean_log_lik - 2.0 * (p[0].mcse + p[1].mcse))
        .map(|(k, _)| k)
        .collect();

    Ok(TiResult {
        estimate: EstimateResult::new("ti", value, mcse, 1.0),
        rungs,
        monotonicity_violations,
        warnings,
    })
}
