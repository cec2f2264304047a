//! Closed-form reference values: the tempered conjugate normal-mean model and
//! the exact log marginal likelihood of the normal-gamma regression.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::math::LN_2PI;
use crate::model::NormalGammaPrior;

/// Tempered posterior `N(m_t, v_t)` of the normal-mean model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateNormalPosterior {
    pub m_t: f64,
    pub v_t: f64,
    pub t: f64,
}

/// Posterior of `theta` under `x_i ~ N(theta, 1)`, `theta ~ N(m, v)`, with the
/// likelihood raised to the power `t`.
pub fn normal_mean_posterior(n: usize, xbar: f64, t: f64, m: f64, v: f64) -> Result<ConjugateNormalPosterior> {
    if !(v > 0.0) {
        return Err(Error::InvalidHyperparameter(format!("prior variance must be positive, got {v}")));
    }
    if n < 1 || !(t >= 0.0) {
        return Err(Error::InvalidHyperparameter(format!("need n >= 1 and t >= 0, got n = {n}, t = {t}")));
    }
    let nt = n as f64 * t;
    let precision = nt + 1.0 / v;
    Ok(ConjugateNormalPosterior { m_t: (nt * xbar + m / v) / precision, v_t: 1.0 / precision, t })
}

fn moments(data: &[f64]) -> (usize, f64, f64) {
    let n = data.len();
    let sum: f64 = data.iter().sum();
    let sum_sq: f64 = data.iter().map(|x| x * x).sum();
    (n, sum / n as f64, sum_sq)
}

/// WBIC of the normal-mean model in closed form, at `t_w = 1 / ln n`.
pub fn normal_mean_wbic_analytic(data: &[f64], m: f64, v: f64) -> Result<f64> {
    let (n, xbar, sum_sq) = moments(data);
    let t = crate::estimators::inverse_temperature_wbic(n)?;
    let post = normal_mean_posterior(n, xbar, t, m, v)?;
    let nf = n as f64;
    Ok(-0.5 * nf * LN_2PI - 0.5 * sum_sq + nf * xbar * post.m_t
        - 0.5 * nf * (post.v_t + post.m_t * post.m_t))
}

/// Singular-fluctuation estimate `(t/2) Σ_i V_t[ln p(x_i | theta)]` of the
/// normal-mean model, in closed form. `s2` is the sample variance with the
/// `n - 1` denominator.
pub fn normal_mean_nu_hat_closed_form(t: f64, n: usize, xbar: f64, s2: f64, m: f64, v: f64) -> f64 {
    let nf = n as f64;
    let ntv = nf * t * v;
    let k = ntv + 1.0;
    (ntv - t * v) / k * s2 / 2.0 + ntv / (2.0 * k.powi(3)) * (m - xbar).powi(2) + t * nf * v * v / (4.0 * k * k)
}

/// `ln ∫ Π N(x_i | theta, 1) N(theta | m, v) dtheta`.
pub fn normal_mean_exact_log_marginal(data: &[f64], m: f64, v: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("normal-mean data"));
    }
    if !(v > 0.0) {
        return Err(Error::InvalidHyperparameter(format!("prior variance must be positive, got {v}")));
    }
    let nf = data.len() as f64;
    let (s, ss) = data.iter().fold((0.0, 0.0), |(s, ss), &x| {
        let d = x - m;
        (s + d, ss + d * d)
    });
    // x - m ~ N(0, I + v 11^T)
    let k = 1.0 + nf * v;
    Ok(-0.5 * nf * LN_2PI - 0.5 * k.ln() - 0.5 * (ss - v * s * s / k))
}

/// Regression design `y = X beta + eps` with `X = [1, x - mean(x)]` and a
/// normal-gamma prior.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDesign {
    covariate: Vec<f64>,
    response: Vec<f64>,
    prior: NormalGammaPrior,
}

impl RegressionDesign {
    /// Builds a design from an already centered covariate.
    pub fn new(covariate: Vec<f64>, response: Vec<f64>, prior: NormalGammaPrior) -> Result<Self> {
        prior.validate()?;
        if covariate.len() != response.len() {
            return Err(Error::DimensionMismatch {
                what: "regression response",
                expected: covariate.len(),
                got: response.len(),
            });
        }
        if covariate.is_empty() {
            return Err(Error::Empty("regression design"));
        }
        let mean = covariate.iter().sum::<f64>() / covariate.len() as f64;
        let scale = covariate.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        if mean.abs() > 1e-9 * scale {
            return Err(Error::InvalidDataset(format!("covariate is not centered (mean {mean})")));
        }
        Ok(Self { covariate, response, prior })
    }

    /// Centers `raw_covariate` and builds the design.
    pub fn centered(raw_covariate: &[f64], response: Vec<f64>, prior: NormalGammaPrior) -> Result<Self> {
        let mean = raw_covariate.iter().sum::<f64>() / raw_covariate.len().max(1) as f64;
        Self::new(raw_covariate.iter().map(|x| x - mean).collect(), response, prior)
    }

    /// From a `(centered covariate, response)` dataset.
    pub fn from_dataset(data: &crate::model::Dataset, prior: NormalGammaPrior) -> Result<Self> {
        if data.width() != 2 {
            return Err(Error::DimensionMismatch { what: "regression rows", expected: 2, got: data.width() });
        }
        Self::new(data.rows().map(|r| r[0]).collect(), data.rows().map(|r| r[1]).collect(), prior)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn prior(&self) -> &NormalGammaPrior {
        &self.prior
    }

    /// `M = X^T X + Q` as `[m11, m12, m22]`.
    fn gram_plus_prior(&self) -> [f64; 3] {
        let n = self.n() as f64;
        let sx: f64 = self.covariate.iter().sum();
        let sxx: f64 = self.covariate.iter().map(|x| x * x).sum();
        [n + self.prior.q[0], sx, sxx + self.prior.q[1]]
    }

    /// Quadratic form `r^T R r` for `r = y - X mu_0`, with
    /// `R = I - X M^{-1} X^T`, evaluated as `r^T r - (X^T r)^T M^{-1} (X^T r)`.
    pub fn residual_quadratic(&self) -> Result<f64> {
        let [m11, m12, m22] = self.gram_plus_prior();
        let det = m11 * m22 - m12 * m12;
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::SingularMatrix("X^T X + Q"));
        }
        let mu = self.prior.mean;
        let (mut rr, mut g0, mut g1) = (0.0, 0.0, 0.0);
        for (&x, &y) in self.covariate.iter().zip(&self.response) {
            let r = y - mu[0] - mu[1] * x;
            rr += r * r;
            g0 += r;
            g1 += r * x;
        }
        // g^T M^{-1} g via the 2x2 adjugate
        let quad = (m22 * g0 * g0 - 2.0 * m12 * g0 * g1 + m11 * g1 * g1) / det;
        Ok((rr - quad).max(0.0))
    }

    /// `ln det(X^T X + Q)`.
    pub fn log_det_m(&self) -> Result<f64> {
        let [m11, m12, m22] = self.gram_plus_prior();
        let det = m11 * m22 - m12 * m12;
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::SingularMatrix("X^T X + Q"));
        }
        Ok(det.ln())
    }
}

/// Exact log marginal likelihood of the normal-gamma regression:
///
/// `-(n/2) ln π + (a/2) ln b + ln Γ((n+a)/2) - ln Γ(a/2)
///  + ½ ln(det Q / det M) - ((n+a)/2) ln(r^T R r + b)`.
pub fn linreg_exact_log_marginal(design: &RegressionDesign) -> Result<f64> {
    let n = design.n() as f64;
    let p = design.prior();
    let (a, b) = (p.a, p.b);
    let log_det_q = (p.q[0] * p.q[1]).ln();
    let quad = design.residual_quadratic()?;
    Ok(-0.5 * n * std::f64::consts::PI.ln() + 0.5 * a * b.ln() + ln_gamma(0.5 * (n + a)) - ln_gamma(0.5 * a)
        + 0.5 * (log_det_q - design.log_det_m()?)
        - 0.5 * (n + a) * (quad + b).ln())
}
