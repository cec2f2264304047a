//! Adaptive random-walk Metropolis.
//!
//! Warmup runs in three phases: an initial buffer that only tunes the step
//! size, a series of doubling windows that estimate the proposal covariance
//! (diagonal first, full in the later windows), and a terminal buffer that
//! re-tunes the step size for the final covariance. Nothing adapts after
//! warmup.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::ChainConfig;
use crate::error::{Error, Result};
use crate::model::TemperedTarget;

const INIT_ATTEMPTS: usize = 100;
const FIRST_WINDOW: usize = 25;
const RM_DECAY: f64 = 0.6;

/// Fixed Gaussian random-walk proposal `u' = u + step * L z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalKernel {
    dim: usize,
    /// Row-major lower-triangular Cholesky factor of the proposal covariance.
    chol: Vec<f64>,
    step: f64,
}

impl ProposalKernel {
    fn identity(dim: usize, step: f64) -> Self {
        let mut chol = vec![0.0; dim * dim];
        for i in 0..dim {
            chol[i * dim + i] = 1.0;
        }
        Self { dim, chol, step }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn cholesky_factor(&self) -> &[f64] {
        &self.chol
    }

    fn propose(&self, current: &[f64], z: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i + 1];
            let lz: f64 = row.iter().zip(z).map(|(l, z)| l * z).sum();
            out[i] = current[i] + self.step * lz;
        }
    }
}

/// State of one chain at the end of warmup.
#[derive(Debug, Clone)]
pub struct WarmupState {
    pub position: Vec<f64>,
    pub log_density: f64,
    pub kernel: ProposalKernel,
    pub(crate) rng: ChaCha8Rng,
}

/// Retained output of one chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// `draws x dim`, row-major, unconstrained.
    pub draws: Vec<f64>,
    /// `draws x n`, row-major.
    pub log_lik_rows: Vec<f64>,
    pub accept_rate: f64,
    pub kernel: ProposalKernel,
}

pub(crate) fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Running mean and covariance (Welford).
struct CovAccumulator {
    dim: usize,
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl CovAccumulator {
    fn new(dim: usize) -> Self {
        Self { dim, count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim * dim] }
    }

    #[allow(clippy::needless_range_loop)]
    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let k = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / k;
        }
        for i in 0..self.dim {
            for j in 0..=i {
                self.m2[i * self.dim + j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    /// Regularized covariance, shrunk toward a small multiple of the identity.
    fn covariance(&self, diagonal_only: bool) -> Vec<f64> {
        let d = self.dim;
        let n = self.count as f64;
        let w = n / (n + 5.0);
        let ridge = 1e-3 * 5.0 / (n + 5.0);
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                if diagonal_only && i != j {
                    continue;
                }
                let v = w * self.m2[i * d + j] / (n - 1.0).max(1.0);
                cov[i * d + j] = v;
                cov[j * d + i] = v;
            }
            cov[i * d + i] += ridge;
        }
        cov
    }
}

fn cholesky(cov: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = cov[i * d + i] - s;
                if !(v > 0.0) || !v.is_finite() {
                    return None;
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (cov[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Adaptation windows `(start, end, diagonal_only)` inside `[0, warmup)`.
fn windows(warmup: usize, dim: usize) -> (usize, Vec<(usize, usize, bool)>) {
    let init_end = warmup * 15 / 100;
    let term_start = warmup - warmup / 10;
    let mut out = Vec::new();
    if term_start <= init_end + FIRST_WINDOW {
        return (init_end, out);
    }
    let midpoint = init_end + (term_start - init_end) / 2;
    let mut start = init_end;
    let mut size = FIRST_WINDOW;
    while start < term_start {
        let mut end = start + size;
        if end + 2 * size > term_start {
            end = term_start;
        }
        out.push((start, end, end <= midpoint && dim > 1));
        start = end;
        size *= 2;
    }
    if let Some(last) = out.last_mut() {
        last.2 = false;
    }
    (init_end, out)
}

struct Mover<'t, 'a> {
    target: &'t TemperedTarget<'a>,
    native: Vec<f64>,
    z: Vec<f64>,
    proposal: Vec<f64>,
}

impl<'t, 'a> Mover<'t, 'a> {
    fn new(target: &'t TemperedTarget<'a>) -> Self {
        let d = target.dim();
        Self { target, native: vec![0.0; d], z: vec![0.0; d], proposal: vec![0.0; d] }
    }

    /// One Metropolis step. Returns the acceptance probability.
    fn step(&mut self, kernel: &ProposalKernel, position: &mut [f64], logp: &mut f64, rng: &mut ChaCha8Rng) -> f64 {
        for z in self.z.iter_mut() {
            *z = StandardNormal.sample(rng);
        }
        kernel.propose(position, &self.z, &mut self.proposal);
        let cand = self.target.log_density_raw(&self.proposal, &mut self.native);
        let log_ratio = cand - *logp;
        let accept_prob = if log_ratio >= 0.0 { 1.0 } else { log_ratio.exp() };
        let u: f64 = rng.random();
        if u < accept_prob {
            position.copy_from_slice(&self.proposal);
            *logp = cand;
        }
        accept_prob
    }
}

/// Robbins-Monro tuning of `ln step` toward a target acceptance probability.
struct StepTuner {
    log_step: f64,
    iter: usize,
    target: f64,
    log_step_sum: f64,
    averaged: usize,
}

impl StepTuner {
    fn new(step: f64, target: f64) -> Self {
        Self { log_step: step.ln(), iter: 0, target, log_step_sum: 0.0, averaged: 0 }
    }

    fn update(&mut self, accept_prob: f64) {
        self.iter += 1;
        let gain = (self.iter as f64).powf(-RM_DECAY);
        self.log_step = (self.log_step + gain * (accept_prob - self.target)).clamp(-30.0, 10.0);
    }

    fn record(&mut self) {
        self.log_step_sum += self.log_step;
        self.averaged += 1;
    }

    fn step(&self) -> f64 {
        self.log_step.exp()
    }

    fn averaged_step(&self) -> f64 {
        if self.averaged == 0 {
            self.step()
        } else {
            (self.log_step_sum / self.averaged as f64).exp()
        }
    }
}

fn initial_step(dim: usize) -> f64 {
    2.38 / (dim as f64).sqrt()
}

/// Initializes chain `chain` and runs its warmup.
pub fn warmup_chain(target: &TemperedTarget<'_>, config: &ChainConfig, chain: usize) -> Result<WarmupState> {
    let d = target.dim();
    let mut rng = chain_rng(config.seed, chain);
    let mut mover = Mover::new(target);

    let init = Normal::new(0.0, config.init_scale)
        .map_err(|e| Error::InvalidChainConfig(format!("init_scale: {e}")))?;
    let mut position = vec![0.0; d];
    let mut logp = f64::NEG_INFINITY;
    for _ in 0..INIT_ATTEMPTS {
        for p in position.iter_mut() {
            *p = init.sample(&mut rng);
        }
        logp = target.log_density_raw(&position, &mut mover.native);
        if logp.is_finite() {
            break;
        }
    }
    if !logp.is_finite() {
        return Err(Error::InitializationFailed { chain, attempts: INIT_ATTEMPTS });
    }

    let mut kernel = ProposalKernel::identity(d, initial_step(d));
    let mut tuner = StepTuner::new(kernel.step, config.target_accept);
    let (init_end, windows) = windows(config.warmup, d);
    let term_start = windows.last().map_or(init_end, |w| w.1);
    // step sizes are averaged over the second half of the terminal buffer
    let average_from = term_start + (config.warmup - term_start) / 2;
    let mut next_window = 0;
    let mut acc = CovAccumulator::new(d);

    for iter in 0..config.warmup {
        kernel.step = tuner.step();
        let a = mover.step(&kernel, &mut position, &mut logp, &mut rng);
        tuner.update(a);
        if iter >= average_from {
            tuner.record();
        }
        if let Some(&(start, end, diagonal)) = windows.get(next_window) {
            if iter >= start {
                acc.push(&position);
            }
            if iter + 1 == end {
                let cov = acc.covariance(diagonal);
                if let Some(chol) = cholesky(&cov, d) {
                    kernel.chol = chol;
                    tuner = StepTuner::new(initial_step(d), config.target_accept);
                } else {
                    log::debug!("chain {chain}: covariance window ending at {end} was not positive definite");
                }
                acc = CovAccumulator::new(d);
                next_window += 1;
            }
        }
    }
    kernel.step = tuner.averaged_step();
    Ok(WarmupState { position, log_density: logp, kernel, rng })
}

/// Runs the fixed-kernel sampling phase from a warmed-up state.
pub fn sample_chain(target: &TemperedTarget<'_>, state: WarmupState, keep: usize, thin: usize) -> ChainOutput {
    let d = target.dim();
    let n = target.data().n();
    let retained = keep / thin;
    let WarmupState { mut position, log_density: mut logp, kernel, mut rng } = state;
    let mut mover = Mover::new(target);
    let mut draws = Vec::with_capacity(retained * d);
    let mut log_lik_rows = vec![0.0; retained * n];
    let mut accept_sum = 0.0;
    let mut stored = 0;
    for iter in 1..=keep {
        accept_sum += mover.step(&kernel, &mut position, &mut logp, &mut rng);
        if iter % thin == 0 && stored < retained {
            draws.extend_from_slice(&position);
            target.log_lik_rows_raw(&position, &mut mover.native, &mut log_lik_rows[stored * n..(stored + 1) * n]);
            stored += 1;
        }
    }
    ChainOutput { draws, log_lik_rows, accept_rate: accept_sum / keep as f64, kernel }
}
