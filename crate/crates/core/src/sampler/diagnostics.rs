//! Convergence diagnostics: Geyer initial-monotone-sequence ESS and split-R̂.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{mean, sample_variance};

/// Minimum series length accepted by [`effective_sample_size`] and
/// [`potential_scale_reduction`].
pub const MIN_SERIES_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ess {
    pub value: f64,
    /// The series was constant; `value` is its length by convention.
    pub constant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleReduction {
    pub value: f64,
    /// Every chain was constant at the same value; `value` is 1 by convention.
    pub constant: bool,
}

/// Effective sample size of a single series using Geyer's initial monotone
/// sequence estimator of the integrated autocorrelation time. The result lies
/// in `(0, len]`.
pub fn effective_sample_size(series: &[f64]) -> Result<Ess> {
    let n = series.len();
    if n < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort { len: n, min: MIN_SERIES_LEN });
    }
    let m = mean(series);
    let centered: Vec<f64> = series.iter().map(|x| x - m).collect();
    let acov = |lag: usize| -> f64 {
        centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let c0 = acov(0);
    if !(c0 > 0.0) || series.iter().all(|&x| x == series[0]) {
        return Ok(Ess { value: n as f64, constant: true });
    }

    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (acov(lag) + acov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum_pairs += pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = (2.0 * sum_pairs - 1.0).max(1.0 / n as f64);
    Ok(Ess { value: (n as f64 / tau).min(n as f64), constant: false })
}

/// Split-R̂ over equally long chains: each chain is cut in half and the
/// classic between/within variance ratio is computed over the halves.
pub fn potential_scale_reduction(chains: &[&[f64]]) -> Result<ScaleReduction> {
    if chains.len() < 2 {
        return Err(Error::TooFewChains { min: 2, got: chains.len() });
    }
    let len = chains[0].len();
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::UnequalChainLengths);
    }
    if len < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort { len, min: MIN_SERIES_LEN });
    }
    let half = len / 2;
    let splits: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[len - half..]]).collect();

    let means: Vec<f64> = splits.iter().map(|c| mean(c)).collect();
    let within = mean(&splits.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    let between_over_n = sample_variance(&means);
    if within == 0.0 {
        if between_over_n == 0.0 {
            return Ok(ScaleReduction { value: 1.0, constant: true });
        }
        return Ok(ScaleReduction { value: f64::INFINITY, constant: false });
    }
    let n = half as f64;
    let var_plus = (n - 1.0) / n * within + between_over_n;
    Ok(ScaleReduction { value: (var_plus / within).sqrt(), constant: false })
}

/// Per-chain acceptance rates plus per-parameter ESS and split-R̂.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub accept_rate: Vec<f64>,
    pub ess: Vec<f64>,
    pub rhat: Vec<f64>,
    /// ESS of the per-draw total log-likelihood.
    pub log_lik_ess: f64,
    pub log_lik_rhat: f64,
    /// Some parameter has R̂ above [`RHAT_WARN`].
    pub rhat_warning: bool,
}

pub const RHAT_WARN: f64 = 1.1;

impl Diagnostics {
    pub fn rhat_max(&self) -> f64 {
        self.rhat.iter().copied().fold(f64::NAN, f64::max)
    }
}

/// ESS summed over chains.
pub(crate) fn multi_chain_ess(chains: &[&[f64]]) -> Result<f64> {
    chains.iter().map(|c| effective_sample_size(c).map(|e| e.value)).sum()
}

/// Split-R̂; a single chain is treated as two halves.
pub(crate) fn multi_chain_rhat(chains: &[&[f64]]) -> Result<f64> {
    if chains.len() == 1 {
        let c = chains[0];
        let half = c.len() / 2;
        return potential_scale_reduction(&[&c[..half], &c[c.len() - half..]]).map(|r| r.value);
    }
    potential_scale_reduction(chains).map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn iid_ess_close_to_length() {
        let ess = effective_sample_size(&normals(10_000, 1)).unwrap();
        assert!(!ess.constant);
        assert!((8_000.0..=12_000.0).contains(&ess.value), "{}", ess.value);
    }

    #[test]
    fn ar1_ess_matches_theory() {
        let z = normals(10_000, 2);
        let mut x = vec![0.0; z.len()];
        for i in 1..z.len() {
            x[i] = 0.9 * x[i - 1] + z[i];
        }
        let expected = 10_000.0 * 0.1 / 1.9;
        let ess = effective_sample_size(&x).unwrap().value;
        assert!((ess - expected).abs() < 0.4 * expected, "{ess} vs {expected}");
    }

    #[test]
    fn constant_series_is_flagged() {
        let ess = effective_sample_size(&[3.0; 200]).unwrap();
        assert_eq!(ess, Ess { value: 200.0, constant: true });
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(effective_sample_size(&[1.0; 50]), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn rhat_of_iid_chains_near_one() {
        let chains: Vec<Vec<f64>> = (0..4).map(|s| normals(2_000, 10 + s)).collect();
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        let r = potential_scale_reduction(&refs).unwrap();
        assert!(r.value <= 1.01, "{}", r.value);
    }

    #[test]
    fn rhat_detects_separated_chains() {
        let a = normals(1_000, 3);
        let b: Vec<f64> = normals(1_000, 4).iter().map(|x| x + 10.0).collect();
        let r = potential_scale_reduction(&[&a, &b]).unwrap();
        assert!(r.value > 1.5, "{}", r.value);
    }

    #[test]
    fn rhat_constant_chains() {
        let a = [2.0; 200];
        let r = potential_scale_reduction(&[&a, &a]).unwrap();
        assert_eq!(r, ScaleReduction { value: 1.0, constant: true });
    }

    #[test]
    fn rhat_needs_two_chains() {
        let a = normals(200, 5);
        assert!(matches!(potential_scale_reduction(&[&a]), Err(Error::TooFewChains { .. })));
        let b = normals(300, 6);
        assert!(matches!(potential_scale_reduction(&[&a, &b]), Err(Error::UnequalChainLengths)));
    }
}
