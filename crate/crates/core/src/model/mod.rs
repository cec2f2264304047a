//! Model abstraction: per-observation log-likelihood, log-prior and the
//! unconstrained parameterization the sampler works in.

mod dataset;
pub mod linreg;
pub mod mixture;
pub mod normal_mean;

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use dataset::Dataset;
pub use linreg::{LinReg, NormalGammaPrior};
pub use mixture::Mixture2;
pub use normal_mean::NormalMean;

use crate::error::{Error, Result};
use crate::math::{logit, sigmoid, softplus};

/// Native support of a single parameter and its map to the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    Real,
    /// Sampled as `ln x`.
    Positive,
    /// Sampled as `logit x`.
    UnitInterval,
}

impl Support {
    pub fn to_native(self, u: f64) -> f64 {
        match self {
            Support::Real => u,
            Support::Positive => u.exp(),
            Support::UnitInterval => sigmoid(u),
        }
    }

    pub fn to_unconstrained(self, x: f64) -> f64 {
        match self {
            Support::Real => x,
            Support::Positive => x.ln(),
            Support::UnitInterval => logit(x),
        }
    }

    /// `ln |d native / d u|` at unconstrained value `u`.
    pub fn log_jacobian(self, u: f64) -> f64 {
        match self {
            Support::Real => 0.0,
            Support::Positive => u,
            Support::UnitInterval => -softplus(-u) - softplus(u),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDescriptor {
    pub name: String,
    pub support: Support,
}

impl ParamDescriptor {
    pub fn new(name: &str, support: Support) -> Self {
        Self { name: name.to_string(), support }
    }
}

/// Real log canonical threshold and its multiplicity, stored as metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlctInfo {
    pub lambda: f64,
    pub multiplicity: u32,
}

/// Static description of a model: name, parameters and known RLCT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    name: String,
    params: Vec<ParamDescriptor>,
    rlct: Option<RlctInfo>,
    obs_width: usize,
}

impl ModelSpec {
    pub fn new(
        name: &str,
        params: Vec<ParamDescriptor>,
        rlct: Option<RlctInfo>,
        obs_width: usize,
    ) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidHyperparameter("model has no parameters".into()));
        }
        if let Some(r) = rlct {
            if !(r.lambda > 0.0) || r.multiplicity < 1 {
                return Err(Error::InvalidHyperparameter(format!(
                    "rlct must have lambda > 0 and multiplicity >= 1, got {r:?}"
                )));
            }
        }
        Ok(Self { name: name.to_string(), params, rlct, obs_width })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[ParamDescriptor] {
        &self.params
    }

    pub fn rlct(&self) -> Option<RlctInfo> {
        self.rlct
    }

    pub fn obs_width(&self) -> usize {
        self.obs_width
    }

    pub fn to_native_into(&self, u: &[f64], out: &mut [f64]) {
        for ((o, &x), p) in out.iter_mut().zip(u).zip(&self.params) {
            *o = p.support.to_native(x);
        }
    }

    pub fn to_native(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.to_native_into(u, &mut out);
        out
    }

    pub fn to_unconstrained(&self, native: &[f64]) -> Vec<f64> {
        native.iter().zip(&self.params).map(|(&x, p)| p.support.to_unconstrained(x)).collect()
    }

    pub fn log_jacobian(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.params).map(|(&x, p)| p.support.log_jacobian(x)).sum()
    }
}

/// A point in the unconstrained sampling space. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteParameter { index, value });
        }
        Ok(Self(values))
    }

    /// Maps a native-space parameter into the unconstrained space.
    pub fn from_native(spec: &ModelSpec, native: &[f64]) -> Result<Self> {
        check_dim(spec, native.len())?;
        Self::new(spec.to_unconstrained(native))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn to_native(&self, spec: &ModelSpec) -> Vec<f64> {
        spec.to_native(&self.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A statistical model. Implementations work in native parameter space; the
/// free functions in this module handle the unconstrained embedding.
///
/// Implementations must be pure: the sampler evaluates the same instance from
/// several chains at once.
pub trait Model: Send + Sync + fmt::Debug {
    fn spec(&self) -> &ModelSpec;

    /// `ln p(row | theta)`. May return `-inf` for zero density, never NaN.
    fn log_lik_native(&self, theta: &[f64], row: &[f64]) -> f64;

    fn total_log_lik_native(&self, theta: &[f64], data: &Dataset) -> f64 {
        data.rows().map(|row| self.log_lik_native(theta, row)).sum()
    }

    /// Prior log-density in native coordinates (no Jacobian).
    fn log_prior_native(&self, theta: &[f64]) -> f64;

    /// Writes one exact prior draw, in native coordinates, into `out`.
    fn sample_prior_native(&self, rng: &mut dyn RngCore, out: &mut [f64]);
}

fn check_dim(spec: &ModelSpec, got: usize) -> Result<()> {
    if got != spec.dim() {
        return Err(Error::DimensionMismatch { what: "parameter vector", expected: spec.dim(), got });
    }
    Ok(())
}

fn check_row(spec: &ModelSpec, got: usize) -> Result<()> {
    if got != spec.obs_width() {
        return Err(Error::DimensionMismatch { what: "observation row", expected: spec.obs_width(), got });
    }
    Ok(())
}

/// `ln p(row | theta)` for an unconstrained `theta`.
pub fn log_lik_row(model: &dyn Model, theta: &ParamVector, row: &[f64]) -> Result<f64> {
    let spec = model.spec();
    check_dim(spec, theta.len())?;
    check_row(spec, row.len())?;
    Ok(model.log_lik_native(&theta.to_native(spec), row))
}

/// Prior log-density of an unconstrained `theta`, including the log-Jacobian
/// of the map back to native coordinates.
pub fn log_prior(model: &dyn Model, theta: &ParamVector) -> Result<f64> {
    let spec = model.spec();
    check_dim(spec, theta.len())?;
    Ok(model.log_prior_native(&theta.to_native(spec)) + spec.log_jacobian(theta.values()))
}

/// `t * ln p(X^n | theta) + ln phi(theta)` over a fixed dataset.
#[derive(Debug, Clone, Copy)]
pub struct TemperedTarget<'a> {
    model: &'a dyn Model,
    data: &'a Dataset,
    t: f64,
}

impl<'a> TemperedTarget<'a> {
    pub fn new(model: &'a dyn Model, data: &'a Dataset, t: f64) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidTemperature(t));
        }
        Self::unchecked(model, data, t)
    }

    /// The `t = 0` end of the path: the prior alone. Only density evaluation
    /// is meaningful for this target; the sampler rejects it.
    pub fn at_prior(model: &'a dyn Model, data: &'a Dataset) -> Result<Self> {
        Self::unchecked(model, data, 0.0)
    }

    fn unchecked(model: &'a dyn Model, data: &'a Dataset, t: f64) -> Result<Self> {
        check_row(model.spec(), data.width())?;
        Ok(Self { model, data, t })
    }

    pub fn model(&self) -> &'a dyn Model {
        self.model
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.model.spec().dim()
    }

    /// Unchecked evaluation for the sampler's inner loop. `native` is scratch
    /// space of length `dim`.
    pub(crate) fn log_density_raw(&self, u: &[f64], native: &mut [f64]) -> f64 {
        let spec = self.model.spec();
        spec.to_native_into(u, native);
        let prior = self.model.log_prior_native(native) + spec.log_jacobian(u);
        if self.t == 0.0 || prior == f64::NEG_INFINITY {
            return prior;
        }
        let v = self.t * self.model.total_log_lik_native(native, self.data) + prior;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// Per-observation log-likelihoods at an unconstrained point, written to `out`.
    pub(crate) fn log_lik_rows_raw(&self, u: &[f64], native: &mut [f64], out: &mut [f64]) {
        self.model.spec().to_native_into(u, native);
        for (o, row) in out.iter_mut().zip(self.data.rows()) {
            *o = self.model.log_lik_native(native, row);
        }
    }
}

/// Unnormalized tempered log-density at an unconstrained `theta`.
pub fn tempered_log_density(target: &TemperedTarget<'_>, theta: &ParamVector) -> Result<f64> {
    let spec = target.model.spec();
    check_dim(spec, theta.len())?;
    let native = theta.to_native(spec);
    let prior = target.model.log_prior_native(&native) + spec.log_jacobian(theta.values());
    if target.t == 0.0 {
        return Ok(prior);
    }
    Ok(target.t * target.model.total_log_lik_native(&native, target.data) + prior)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::math::LN_2PI;

    fn models() -> Vec<(Box<dyn Model>, Dataset)> {
        let xs = Dataset::from_column("x", vec![-1.2, 0.3, 0.8, 2.1, -0.4]).unwrap();
        let reg = Dataset::from_rows(
            vec!["x".into(), "y".into()],
            &[vec![-2.0, 2500.0], vec![0.5, 3100.0], vec![1.5, 3300.0]],
        )
        .unwrap();
        vec![
            (Box::new(NormalMean::new(0.0, 1.0).unwrap()), xs.clone()),
            (Box::new(Mixture2::new(10.0).unwrap()), xs),
            (Box::new(LinReg::radiata_prior("M1")), reg),
        ]
    }

    #[test]
    fn rlct_validation() {
        let p = vec![ParamDescriptor::new("a", Support::Real)];
        let bad = RlctInfo { lambda: 0.0, multiplicity: 1 };
        assert!(ModelSpec::new("m", p.clone(), Some(bad), 1).is_err());
        let bad = RlctInfo { lambda: 0.5, multiplicity: 0 };
        assert!(ModelSpec::new("m", p.clone(), Some(bad), 1).is_err());
        assert!(ModelSpec::new("m", p, None, 1).is_ok());
    }

    #[test]
    fn log_lik_row_rejects_bad_inputs() {
        let m = NormalMean::new(0.0, 1.0).unwrap();
        let theta = ParamVector::new(vec![0.0]).unwrap();
        assert!(matches!(log_lik_row(&m, &theta, &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
        let wide = ParamVector::new(vec![0.0, 1.0]).unwrap();
        assert!(log_lik_row(&m, &wide, &[0.0]).is_err());
        assert!(matches!(ParamVector::new(vec![f64::NAN]), Err(Error::NonFiniteParameter { index: 0, .. })));
    }

    #[test]
    fn target_rejects_bad_temperatures() {
        let m = NormalMean::new(0.0, 1.0).unwrap();
        let d = Dataset::from_column("x", vec![0.0, 1.0]).unwrap();
        for t in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(TemperedTarget::new(&m, &d, t).is_err());
        }
        assert!(TemperedTarget::new(&m, &d, 1.0).is_ok());
    }

    #[test]
    fn tempered_density_at_zero_is_prior() {
        for (model, data) in models() {
            let target = TemperedTarget::at_prior(model.as_ref(), &data).unwrap();
            let theta = ParamVector::new(vec![0.3; model.spec().dim()]).unwrap();
            let got = tempered_log_density(&target, &theta).unwrap();
            assert_eq!(got, log_prior(model.as_ref(), &theta).unwrap());
        }
    }

    #[test]
    fn tempered_density_standard_normal_pair() {
        // Two observations at 0 with t = 1/2 carry the same likelihood weight
        // as a single observation at t = 1.
        let m = NormalMean::new(0.0, 1.0).unwrap();
        let d = Dataset::from_column("x", vec![0.0, 0.0]).unwrap();
        let target = TemperedTarget::new(&m, &d, 0.5).unwrap();
        let theta = ParamVector::new(vec![0.0]).unwrap();
        let got = tempered_log_density(&target, &theta).unwrap();
        assert!((got + LN_2PI).abs() < 1e-14);
    }

    #[test]
    fn tempered_density_mixture_half_temperature() {
        let m = Mixture2::new(10.0).unwrap();
        let d = Dataset::from_column("x", vec![-1.0, -0.2, 0.4, 1.1, 2.5]).unwrap();
        let theta = ParamVector::from_native(m.spec(), &[0.3, -0.5, 1.2]).unwrap();
        let total: f64 = d.rows().map(|r| log_lik_row(&m, &theta, r).unwrap()).sum();
        let prior = log_prior(&m, &theta).unwrap();
        let target = TemperedTarget::new(&m, &d, 0.5).unwrap();
        let got = tempered_log_density(&target, &theta).unwrap();
        assert!((got - (0.5 * total + prior)).abs() < 1e-12);
    }

    #[test]
    fn raw_density_matches_checked_path() {
        for (model, data) in models() {
            let target = TemperedTarget::new(model.as_ref(), &data, 0.4).unwrap();
            let u = vec![0.2; model.spec().dim()];
            let mut scratch = vec![0.0; u.len()];
            let raw = target.log_density_raw(&u, &mut scratch);
            let checked = tempered_log_density(&target, &ParamVector::new(u).unwrap()).unwrap();
            assert!((raw - checked).abs() < 1e-9 * checked.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn fuzzed_densities_are_finite(u in proptest::collection::vec(-30.0f64..30.0, 3), x in -50.0f64..50.0) {
            for (model, data) in models() {
                let d = model.spec().dim();
                let theta = ParamVector::new(u[..d].to_vec()).unwrap();
                let row: Vec<f64> = if model.spec().obs_width() == 1 { vec![x] } else { vec![x, 3000.0 + 10.0 * x] };
                let ll = log_lik_row(model.as_ref(), &theta, &row).unwrap();
                let lp = log_prior(model.as_ref(), &theta).unwrap();
                prop_assert!(ll.is_finite(), "{} loglik {ll}", model.spec().name());
                prop_assert!(lp.is_finite(), "{} logprior {lp}", model.spec().name());
                let _ = data;
            }
        }

        #[test]
        fn tempered_difference_is_total_log_lik(u in proptest::collection::vec(-3.0f64..3.0, 3)) {
            for (model, data) in models() {
                let d = model.spec().dim();
                let theta = ParamVector::new(u[..d].to_vec()).unwrap();
                let one = tempered_log_density(&TemperedTarget::new(model.as_ref(), &data, 1.0).unwrap(), &theta).unwrap();
                let zero = tempered_log_density(&TemperedTarget::at_prior(model.as_ref(), &data).unwrap(), &theta).unwrap();
                let total: f64 = data.rows().map(|r| log_lik_row(model.as_ref(), &theta, r).unwrap()).sum();
                prop_assert!(((one - zero) - total).abs() <= 1e-10 * total.abs().max(1.0));
            }
        }

        #[test]
        fn positive_round_trip(x in 1e-8f64..1e8) {
            let back = Support::Positive.to_native(Support::Positive.to_unconstrained(x));
            prop_assert!((back - x).abs() <= 1e-12 * x.max(1.0));
        }

        #[test]
        fn unit_interval_round_trip(x in 1e-6f64..(1.0 - 1e-6)) {
            let back = Support::UnitInterval.to_native(Support::UnitInterval.to_unconstrained(x));
            prop_assert!((back - x).abs() <= 1e-12);
        }
    }

    #[test]
    fn logit_jacobian_at_zero_is_quarter() {
        assert!((Support::UnitInterval.log_jacobian(0.0) - 0.25f64.ln()).abs() < 1e-15);
    }
}
