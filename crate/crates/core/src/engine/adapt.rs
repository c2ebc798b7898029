//! Robbins-Monro tuning of random-walk Metropolis-Hastings proposals.
//!
//! `r` is the 1-based iteration index. Updates are no-ops for `r < 2`.

use rand::Rng;
use rand_distr::StandardNormal;

pub const SCALAR_TARGET: f64 = 0.44;
pub const SCALAR_GAIN: f64 = 4.058;
pub const BIVARIATE_TARGET: f64 = 0.234;
pub const BIVARIATE_GAIN: f64 = 6.534;
/// Iterations with an identity proposal covariance before the empirical
/// covariance is used.
pub const COV_WARMUP: usize = 100;

/// Adaptive scale of a univariate Gaussian random walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarAdapt {
    pub log_scale: f64,
}

impl ScalarAdapt {
    pub fn new(sd: f64) -> Self {
        ScalarAdapt { log_scale: sd.ln() }
    }

    pub fn sd(&self) -> f64 {
        self.log_scale.exp()
    }

    /// `R` is the acceptance probability, clamped into `[0, 1]`.
    pub fn update(&mut self, r: usize, accept_prob: f64) {
        if r < 2 {
            return;
        }
        let a = accept_prob.clamp(0.0, 1.0);
        self.log_scale += SCALAR_GAIN * (a - SCALAR_TARGET) / (r - 1) as f64;
    }

    pub fn propose<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        x + self.sd() * z
    }
}

/// Adaptive bivariate Gaussian random walk: scale, running mean and
/// running (unbiased) covariance of the sampled points.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateAdapt {
    pub log_scale: f64,
    pub emp_mean: [f64; 2],
    pub emp_cov: [[f64; 2]; 2],
    /// Number of points folded into the running moments.
    pub n: usize,
    proposal_chol: [[f64; 2]; 2],
}

impl BivariateAdapt {
    pub fn new(scale: f64) -> Self {
        BivariateAdapt {
            log_scale: scale.ln(),
            emp_mean: [0.0; 2],
            emp_cov: [[0.0; 2]; 2],
            n: 0,
            proposal_chol: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Fold sample `x` into the running mean and covariance.
    pub fn observe(&mut self, x: [f64; 2]) {
        self.n += 1;
        let r = self.n as f64;
        if self.n == 1 {
            self.emp_mean = x;
            self.emp_cov = [[0.0; 2]; 2];
            return;
        }
        let d = [x[0] - self.emp_mean[0], x[1] - self.emp_mean[1]];
        let keep = (r - 2.0) / (r - 1.0);
        for i in 0..2 {
            for j in 0..2 {
                self.emp_cov[i][j] = keep * self.emp_cov[i][j] + d[i] * d[j] / r;
            }
        }
        for i in 0..2 {
            self.emp_mean[i] = ((r - 1.0) * self.emp_mean[i] + x[i]) / r;
        }
    }

    pub fn update_scale(&mut self, r: usize, accept_prob: f64) {
        if r < 2 {
            return;
        }
        let a = accept_prob.clamp(0.0, 1.0);
        self.log_scale += BIVARIATE_GAIN * (a - BIVARIATE_TARGET) / (r - 1) as f64;
    }

    /// Proposal covariance for iteration `r + 1`.
    pub fn proposal_cov(&self, r: usize) -> [[f64; 2]; 2] {
        if r < COV_WARMUP {
            return [[1.0, 0.0], [0.0, 1.0]];
        }
        let s2 = self.scale().powi(2);
        let ridge = s2 / r as f64;
        [
            [s2 * (self.emp_cov[0][0] + ridge), s2 * self.emp_cov[0][1]],
            [s2 * self.emp_cov[1][0], s2 * (self.emp_cov[1][1] + ridge)],
        ]
    }

    /// Recompute the proposal factor after iteration `r`.
    pub fn refresh(&mut self, r: usize) {
        let c = self.proposal_cov(r);
        let l00 = c[0][0].sqrt();
        let l10 = c[1][0] / l00;
        let l11 = (c[1][1] - l10 * l10).max(0.0).sqrt();
        if l00.is_finite() && l00 > 0.0 && l11.is_finite() {
            self.proposal_chol = [[l00, 0.0], [l10, l11]];
        }
    }

    pub fn propose<R: Rng + ?Sized>(&self, x: [f64; 2], rng: &mut R) -> [f64; 2] {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let l = &self.proposal_chol;
        [x[0] + l[0][0] * z0, x[1] + l[1][0] * z0 + l[1][1] * z1]
    }
}
