use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use super::{Model, ModelSpec, ParamDescriptor, RlctInfo, Support};
use crate::error::{Error, Result};
use crate::math::{log_add_exp, normal_log_pdf, LN_2PI};

/// Two-component unit-variance normal mixture
/// `alpha N(mu1, 1) + (1 - alpha) N(mu2, 1)` with priors
/// `alpha ~ Uniform(0, 1)` and `mu1, mu2 ~ N(0, prior_var)` independently.
///
/// No identifiability constraint is imposed; the likelihood is invariant
/// under `(alpha, mu1, mu2) -> (1 - alpha, mu2, mu1)`.
#[derive(Debug, Clone)]
pub struct Mixture2 {
    spec: ModelSpec,
    prior_var: f64,
}

impl Mixture2 {
    pub fn new(prior_var: f64) -> Result<Self> {
        if !(prior_var > 0.0 && prior_var.is_finite()) {
            return Err(Error::InvalidHyperparameter(format!(
                "mixture component prior variance must be positive, got {prior_var}"
            )));
        }
        let spec = ModelSpec::new(
            "mixture2",
            vec![
                ParamDescriptor::new("alpha", Support::UnitInterval),
                ParamDescriptor::new("mu1", Support::Real),
                ParamDescriptor::new("mu2", Support::Real),
            ],
            Some(RlctInfo { lambda: 0.75, multiplicity: 1 }),
            1,
        )?;
        Ok(Self { spec, prior_var })
    }

    pub fn prior_var(&self) -> f64 {
        self.prior_var
    }
}

impl Default for Mixture2 {
    fn default() -> Self {
        Self::new(10.0).expect("positive variance")
    }
}

impl Model for Mixture2 {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn log_lik_native(&self, theta: &[f64], row: &[f64]) -> f64 {
        let (alpha, mu1, mu2) = (theta[0], theta[1], theta[2]);
        let d1 = row[0] - mu1;
        let d2 = row[0] - mu2;
        let a = alpha.ln() - 0.5 * d1 * d1;
        let b = (1.0 - alpha).ln() - 0.5 * d2 * d2;
        log_add_exp(a, b) - 0.5 * LN_2PI
    }

    fn log_prior_native(&self, theta: &[f64]) -> f64 {
        if !(0.0..=1.0).contains(&theta[0]) {
            return f64::NEG_INFINITY;
        }
        normal_log_pdf(theta[1], 0.0, self.prior_var) + normal_log_pdf(theta[2], 0.0, self.prior_var)
    }

    fn sample_prior_native(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let mu = Normal::new(0.0, self.prior_var.sqrt()).expect("validated in constructor");
        out[0] = rng.random::<f64>();
        out[1] = mu.sample(rng);
        out[2] = mu.sample(rng);
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::model::{log_lik_row, log_prior, Dataset, ParamVector};

    fn direct(theta: &[f64], x: f64) -> f64 {
        let phi = |m: f64| (-(x - m) * (x - m) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        (theta[0] * phi(theta[1]) + (1.0 - theta[0]) * phi(theta[2])).ln()
    }

    #[test]
    fn identical_components_collapse() {
        let m = Mixture2::default();
        let theta = ParamVector::from_native(m.spec(), &[0.5, 0.0, 0.0]).unwrap();
        let got = log_lik_row(&m, &theta, &[0.0]).unwrap();
        assert!((got + 0.5 * LN_2PI).abs() < 1e-15);
    }

    #[test]
    fn prior_at_centre() {
        let m = Mixture2::default();
        let theta = ParamVector::new(vec![0.0, 0.0, 0.0]).unwrap();
        let expected = 0.25f64.ln() + 2.0 * (-0.5 * (2.0 * std::f64::consts::PI * 10.0).ln());
        assert!((log_prior(&m, &theta).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn extreme_weight_does_not_produce_nan() {
        let m = Mixture2::default();
        let theta = ParamVector::new(vec![800.0, 40.0, -40.0]).unwrap();
        let v = log_lik_row(&m, &theta, &[0.0]).unwrap();
        assert!(v.is_finite());
        assert!(log_prior(&m, &theta).unwrap().is_finite());
    }

    proptest! {
        #[test]
        fn swap_invariance(a in 0.01f64..0.99, m1 in -5.0f64..5.0, m2 in -5.0f64..5.0,
                           xs in proptest::collection::vec(-4.0f64..4.0, 2..30)) {
            let m = Mixture2::default();
            let d = Dataset::from_column("x", xs).unwrap();
            let l1 = m.total_log_lik_native(&[a, m1, m2], &d);
            let l2 = m.total_log_lik_native(&[1.0 - a, m2, m1], &d);
            prop_assert!((l1 - l2).abs() <= 1e-12 * l1.abs().max(1.0));
        }

        #[test]
        fn log_sum_exp_matches_direct(a in 0.01f64..0.99, m1 in -5.0f64..5.0, m2 in -5.0f64..5.0, x in -6.0f64..6.0) {
            let m = Mixture2::default();
            let lse = m.log_lik_native(&[a, m1, m2], &[x]);
            prop_assert!((lse - direct(&[a, m1, m2], x)).abs() < 1e-10);
        }
    }
}
