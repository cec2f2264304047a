use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::EstimateResult;
use crate::error::{Error, Result};
use crate::model::{Dataset, Model};
use crate::par;

const CHUNK: usize = 4096;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Calls `f` with the total log-likelihood of each of `n_draws` exact prior
/// draws, chunk by chunk; chunk results are returned in order.
fn over_prior_draws<T, F>(model: &dyn Model, data: &Dataset, n_draws: usize, seed: u64, init: T, f: F) -> Vec<T>
where
    T: Clone + Send + Sync,
    F: Fn(&mut T, f64) + Sync + Send,
{
    let chunks = n_draws.div_ceil(CHUNK);
    par::map_indexed(chunks, |c| {
        let mut rng = chunk_rng(seed, c);
        let mut theta = vec![0.0; model.spec().dim()];
        let mut acc = init.clone();
        let count = CHUNK.min(n_draws - c * CHUNK);
        for _ in 0..count {
            model.sample_prior_native(&mut rng, &mut theta);
            f(&mut acc, model.total_log_lik_native(&theta, data));
        }
        acc
    })
}

/// Running `(max, Σ e^{l - max}, Σ e^{2(l - max)})`.
#[derive(Debug, Clone, Copy)]
struct LogMeanExp {
    max: f64,
    s1: f64,
    s2: f64,
}

impl LogMeanExp {
    const EMPTY: Self = Self { max: f64::NEG_INFINITY, s1: 0.0, s2: 0.0 };

    fn push(&mut self, l: f64) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if l > self.max {
            let r = (self.max - l).exp();
            self.s1 = self.s1 * r + 1.0;
            self.s2 = self.s2 * r * r + 1.0;
            self.max = l;
        } else {
            let w = (l - self.max).exp();
            self.s1 += w;
            self.s2 += w * w;
        }
    }

    fn merge(self, other: Self) -> Self {
        if other.max == f64::NEG_INFINITY {
            return self;
        }
        if self.max == f64::NEG_INFINITY {
            return other;
        }
        let max = self.max.max(other.max);
        let ra = (self.max - max).exp();
        let rb = (other.max - max).exp();
        Self { max, s1: self.s1 * ra + other.s1 * rb, s2: self.s2 * ra * ra + other.s2 * rb * rb }
    }
}

/// Prior Monte Carlo estimate of `ln ∫ p(X^n | theta) phi(theta) dtheta`:
/// the log-mean-exp of the total log-likelihood over `n_draws` exact prior
/// draws. The MCSE uses the delta method on the log of the sample mean.
pub fn prior_monte_carlo(model: &dyn Model, data: &Dataset, n_draws: usize, seed: u64) -> Result<EstimateResult> {
    if n_draws == 0 {
        return Err(Error::Empty("prior Monte Carlo draws"));
    }
    let acc = over_prior_draws(model, data, n_draws, seed, LogMeanExp::EMPTY, |acc, l| {
        if l.is_nan() {
            return;
        }
        acc.push(l)
    })
    .into_iter()
    .fold(LogMeanExp::EMPTY, LogMeanExp::merge);
    if !acc.max.is_finite() {
        return Err(Error::LikelihoodUnderflow);
    }
    let n = n_draws as f64;
    let mean_w = acc.s1 / n;
    let var_w = (acc.s2 / n - mean_w * mean_w).max(0.0);
    let mcse = (var_w / n).sqrt() / mean_w;
    Ok(EstimateResult::new("prior_mc", acc.max + mean_w.ln(), mcse, 1.0))
}

/// Prior expectation of the total log-likelihood (the `t = 0` end of the
/// thermodynamic path) with its standard error.
pub fn prior_mean_log_lik(model: &dyn Model, data: &Dataset, n_draws: usize, seed: u64) -> Result<(f64, f64)> {
    if n_draws < 2 {
        return Err(Error::TooFewDraws { min: 2, got: n_draws });
    }
    // (count, shift, Σd, Σd²) with d = l - shift
    let parts = over_prior_draws(model, data, n_draws, seed, (0usize, f64::NAN, 0.0, 0.0), |acc, l| {
        if acc.0 == 0 {
            acc.1 = l;
        }
        let d = l - acc.1;
        acc.0 += 1;
        acc.2 += d;
        acc.3 += d * d;
    });
    let shift = parts[0].1;
    let (mut s, mut ss) = (0.0, 0.0);
    for (count, c_shift, cs, css) in parts {
        // re-center chunk sums on the global shift
        let delta = c_shift - shift;
        let k = count as f64;
        s += cs + k * delta;
        ss += css + 2.0 * delta * cs + k * delta * delta;
    }
    let n = n_draws as f64;
    let mean = s / n;
    let var = ((ss - s * mean) / (n - 1.0)).max(0.0);
    if !(shift + mean).is_finite() {
        return Err(Error::LikelihoodUnderflow);
    }
    Ok((shift + mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NormalMean;

    #[test]
    fn single_draw_returns_its_log_lik() {
        let model = NormalMean::new(0.0, 1.0).unwrap();
        let data = Dataset::from_column("x", vec![0.3, -0.8, 1.1]).unwrap();
        let r = prior_monte_carlo(&model, &data, 1, 5).unwrap();
        let mut rng = chunk_rng(5, 0);
        let mut theta = [0.0];
        model.sample_prior_native(&mut rng, &mut theta);
        assert_eq!(r.value, model.total_log_lik_native(&theta, &data));
        assert_eq!(r.mcse, 0.0);
    }

    #[test]
    fn merge_matches_sequential_push() {
        let ls = [-1000.0, -1002.5, -999.0, -1010.0, -998.7];
        let mut all = LogMeanExp::EMPTY;
        ls.iter().for_each(|&l| all.push(l));
        let (mut a, mut b) = (LogMeanExp::EMPTY, LogMeanExp::EMPTY);
        ls[..2].iter().for_each(|&l| a.push(l));
        ls[2..].iter().for_each(|&l| b.push(l));
        let m = a.merge(b);
        assert_eq!(m.max, all.max);
        assert!((m.s1 - all.s1).abs() < 1e-12 && (m.s2 - all.s2).abs() < 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let model = NormalMean::new(0.0, 1.0).unwrap();
        let data = Dataset::from_column("x", vec![0.3, -0.8, 1.1]).unwrap();
        let a = prior_monte_carlo(&model, &data, 10_000, 9).unwrap();
        let b = prior_monte_carlo(&model, &data, 10_000, 9).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn prior_mean_matches_closed_form() {
        // E over theta ~ N(0, 1) of Σ ln N(x_i | theta, 1)
        let xs = vec![0.3, -0.8, 1.1, 2.0];
        let model = NormalMean::new(0.0, 1.0).unwrap();
        let data = Dataset::from_column("x", xs.clone()).unwrap();
        let n = xs.len() as f64;
        let exact = -0.5 * n * crate::math::LN_2PI - 0.5 * (xs.iter().map(|x| x * x).sum::<f64>() + n);
        let (mean, se) = prior_mean_log_lik(&model, &data, 200_000, 3).unwrap();
        assert!((mean - exact).abs() < 4.0 * se, "{mean} vs {exact} (se {se})");
    }
}
