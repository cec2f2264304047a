use rand::RngCore;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{Dataset, Model, ModelSpec, ParamDescriptor, RlctInfo, Support};
use crate::error::{Error, Result};
use crate::math::LN_2PI;

/// Conjugate normal-gamma prior for a simple regression with precision `tau`:
/// `(alpha, beta) | tau ~ N(mean, (tau Q)^-1)` with `Q = diag(q)`, and
/// `tau ~ Gamma(shape = a / 2, rate = b / 2)`.
///
/// The halved shape and rate are the parameterization under which the usual
/// closed-form log marginal likelihood holds (see [`crate::oracles`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalGammaPrior {
    pub mean: [f64; 2],
    pub q: [f64; 2],
    pub a: f64,
    pub b: f64,
}

impl NormalGammaPrior {
    /// Prior used for the radiata pine regressions.
    pub const RADIATA: NormalGammaPrior =
        NormalGammaPrior { mean: [3000.0, 185.0], q: [0.06, 6.0], a: 6.0, b: 360_000.0 };

    pub fn validate(&self) -> Result<()> {
        let ok = self.q.iter().all(|&q| q > 0.0 && q.is_finite())
            && self.a > 0.0
            && self.b > 0.0
            && self.a.is_finite()
            && self.b.is_finite()
            && self.mean.iter().all(|m| m.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidHyperparameter(format!("invalid normal-gamma prior {self:?}")))
        }
    }

    pub fn gamma_shape(&self) -> f64 {
        0.5 * self.a
    }

    pub fn gamma_rate(&self) -> f64 {
        0.5 * self.b
    }
}

/// `y_i = alpha + beta x_i + eps_i`, `eps_i ~ N(0, 1/tau)`, on rows
/// `(x_i, y_i)` whose covariate has already been centered
/// (see [`crate::data::regression_dataset`]).
#[derive(Debug, Clone)]
pub struct LinReg {
    spec: ModelSpec,
    prior: NormalGammaPrior,
    log_gamma_norm: f64,
}

impl LinReg {
    pub fn new(name: &str, prior: NormalGammaPrior) -> Result<Self> {
        prior.validate()?;
        let spec = ModelSpec::new(
            name,
            vec![
                ParamDescriptor::new("alpha", Support::Real),
                ParamDescriptor::new("beta", Support::Real),
                ParamDescriptor::new("tau", Support::Positive),
            ],
            Some(RlctInfo { lambda: 1.5, multiplicity: 1 }),
            2,
        )?;
        let shape = prior.gamma_shape();
        let log_gamma_norm = shape * prior.gamma_rate().ln() - ln_gamma(shape);
        Ok(Self { spec, prior, log_gamma_norm })
    }

    /// Model with the radiata pine prior.
    pub fn radiata_prior(name: &str) -> Self {
        Self::new(name, NormalGammaPrior::RADIATA).expect("radiata prior is valid")
    }

    pub fn prior(&self) -> &NormalGammaPrior {
        &self.prior
    }
}

impl Model for LinReg {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn log_lik_native(&self, theta: &[f64], row: &[f64]) -> f64 {
        let (alpha, beta, tau) = (theta[0], theta[1], theta[2]);
        let r = row[1] - alpha - beta * row[0];
        0.5 * (tau.ln() - LN_2PI) - 0.5 * tau * r * r
    }

    fn total_log_lik_native(&self, theta: &[f64], data: &Dataset) -> f64 {
        let (alpha, beta, tau) = (theta[0], theta[1], theta[2]);
        let mut ss = 0.0;
        for row in data.rows() {
            let r = row[1] - alpha - beta * row[0];
            ss += r * r;
        }
        0.5 * data.n() as f64 * (tau.ln() - LN_2PI) - 0.5 * tau * ss
    }

    fn log_prior_native(&self, theta: &[f64]) -> f64 {
        let (alpha, beta, tau) = (theta[0], theta[1], theta[2]);
        if !(tau > 0.0) {
            return f64::NEG_INFINITY;
        }
        let p = &self.prior;
        let da = alpha - p.mean[0];
        let db = beta - p.mean[1];
        let quad = p.q[0] * da * da + p.q[1] * db * db;
        let log_tau = tau.ln();
        // bivariate normal with precision tau Q
        let normal = log_tau + 0.5 * (p.q[0] * p.q[1]).ln() - LN_2PI - 0.5 * tau * quad;
        let gamma = self.log_gamma_norm + (p.gamma_shape() - 1.0) * log_tau - p.gamma_rate() * tau;
        normal + gamma
    }

    fn sample_prior_native(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let p = &self.prior;
        let gamma = Gamma::new(p.gamma_shape(), 1.0 / p.gamma_rate()).expect("validated in constructor");
        let tau: f64 = gamma.sample(rng);
        let alpha = Normal::new(p.mean[0], (1.0 / (tau * p.q[0])).sqrt()).expect("finite scale");
        let beta = Normal::new(p.mean[1], (1.0 / (tau * p.q[1])).sqrt()).expect("finite scale");
        out[0] = alpha.sample(rng);
        out[1] = beta.sample(rng);
        out[2] = tau;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{log_lik_row, log_prior, ParamVector};

    #[test]
    fn row_matches_scalar_normal_density() {
        let m = LinReg::radiata_prior("linreg_m1");
        let theta = ParamVector::from_native(m.spec(), &[3000.0, 185.0, 1e-6]).unwrap();
        // centered density 29.2 - 27.8595..., strength 3040
        let row = [1.340_476_190_476_19, 3040.0];
        let mean = 3000.0 + 185.0 * row[0];
        let sd = 1e3;
        let z = (row[1] - mean) / sd;
        let expected = -(sd * (2.0 * std::f64::consts::PI).sqrt()).ln() - 0.5 * z * z;
        let got = log_lik_row(&m, &theta, &row).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn prior_quadratic_vanishes_at_mean() {
        let m = LinReg::radiata_prior("linreg_m1");
        let p = NormalGammaPrior::RADIATA;
        let tau = p.a / p.b;
        let native = [3000.0, 185.0, tau];
        // Gaussian part with zero quadratic term
        let normal = tau.ln() + 0.5 * (0.06f64 * 6.0).ln() - LN_2PI;
        let shape = 3.0;
        let rate = 180_000.0;
        let gamma = shape * f64::ln(rate) - ln_gamma(shape) + (shape - 1.0) * tau.ln() - rate * tau;
        assert!((m.log_prior_native(&native) - (normal + gamma)).abs() < 1e-10);
        // unconstrained version adds ln tau
        let theta = ParamVector::from_native(m.spec(), &native).unwrap();
        let with_jac = log_prior(&m, &theta).unwrap();
        assert!((with_jac - (normal + gamma + tau.ln())).abs() < 1e-10);
    }

    #[test]
    fn invalid_prior_rejected() {
        let mut p = NormalGammaPrior::RADIATA;
        p.q[1] = 0.0;
        assert!(LinReg::new("bad", p).is_err());
    }
}
