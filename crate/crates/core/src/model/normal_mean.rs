use rand::RngCore;
use rand_distr::{Distribution, Normal};

use super::{Dataset, Model, ModelSpec, ParamDescriptor, RlctInfo, Support};
use crate::error::{Error, Result};
use crate::math::{normal_log_pdf, LN_2PI};

/// `x ~ N(theta, 1)` with prior `theta ~ N(prior_mean, prior_var)`.
#[derive(Debug, Clone)]
pub struct NormalMean {
    spec: ModelSpec,
    prior_mean: f64,
    prior_var: f64,
}

impl NormalMean {
    pub fn new(prior_mean: f64, prior_var: f64) -> Result<Self> {
        if !(prior_var > 0.0 && prior_var.is_finite()) || !prior_mean.is_finite() {
            return Err(Error::InvalidHyperparameter(format!(
                "normal-mean prior needs finite mean and positive variance, got N({prior_mean}, {prior_var})"
            )));
        }
        let spec = ModelSpec::new(
            "normal_mean",
            vec![ParamDescriptor::new("theta", Support::Real)],
            Some(RlctInfo { lambda: 0.5, multiplicity: 1 }),
            1,
        )?;
        Ok(Self { spec, prior_mean, prior_var })
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn prior_var(&self) -> f64 {
        self.prior_var
    }
}

impl Model for NormalMean {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn log_lik_native(&self, theta: &[f64], row: &[f64]) -> f64 {
        let d = row[0] - theta[0];
        -0.5 * LN_2PI - 0.5 * d * d
    }

    fn total_log_lik_native(&self, theta: &[f64], data: &Dataset) -> f64 {
        let mut ss = 0.0;
        for row in data.rows() {
            let d = row[0] - theta[0];
            ss += d * d;
        }
        -0.5 * LN_2PI * data.n() as f64 - 0.5 * ss
    }

    fn log_prior_native(&self, theta: &[f64]) -> f64 {
        normal_log_pdf(theta[0], self.prior_mean, self.prior_var)
    }

    fn sample_prior_native(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let dist = Normal::new(self.prior_mean, self.prior_var.sqrt()).expect("validated in constructor");
        out[0] = dist.sample(rng);
    }
}
