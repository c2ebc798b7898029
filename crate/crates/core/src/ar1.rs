//! Gaussian machinery of the stationary AR(1) state equation
//! `s_t = mu + phi (s_{t-1} - mu) + sigma eps_t`.
//!
//! Dense moments are available for checking and small problems; the sampler
//! itself only uses the O(n) recursive forms in [`BlockSampler`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest |phi| used inside variance formulas.
pub const PHI_CLAMP: f64 = 1.0 - 1e-12;

/// Parameters of the latent AR(1) process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Params {
    pub mu: f64,
    pub phi: f64,
    pub sigma: f64,
}

impl Ar1Params {
    pub fn new(mu: f64, phi: f64, sigma: f64) -> Result<Self> {
        let p = Ar1Params { mu, phi, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return domain(format!("mu must be finite, got {}", self.mu));
        }
        if !(self.phi.abs() < 1.0) {
            return domain(format!("|phi| must be < 1, got {}", self.phi));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return domain(format!("sigma must be > 0, got {}", self.sigma));
        }
        Ok(())
    }

    fn clamped_phi(&self) -> f64 {
        self.phi.clamp(-PHI_CLAMP, PHI_CLAMP)
    }

    /// Stationary variance `sigma^2 / (1 - phi^2)`.
    pub fn stationary_variance(&self) -> f64 {
        let phi = self.clamped_phi();
        self.sigma * self.sigma / (1.0 - phi * phi)
    }
}

/// Contiguous 1-based index range `a..=b` of latent states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub a: usize,
    pub b: usize,
}

impl Block {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == 0 || a > b {
            return Err(Error::Invalid(format!("invalid block {a}..={b}")));
        }
        Ok(Block { a, b })
    }

    pub fn len(&self) -> usize {
        self.b - self.a + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Mean vector and dense row-major covariance of a Gaussian vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

impl GaussianMoments {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_at(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.dim() + j]
    }

    /// Lower Cholesky factor (row-major); fails unless the covariance is
    /// symmetric positive definite.
    pub fn cholesky(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let a_ij = self.cov_at(i, j);
                if (a_ij - self.cov_at(j, i)).abs() > 1e-12 * (1.0 + a_ij.abs()) {
                    return Err(Error::Numeric("covariance is not symmetric".into()));
                }
                let mut sum = a_ij;
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::Numeric(format!("covariance not positive definite at pivot {i}")));
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(l)
    }
}

/// Stationary mean and variance of `s_0`.
pub fn stationary_moments(p: &Ar1Params) -> Result<(f64, f64)> {
    p.validate()?;
    Ok((p.mu, p.stationary_variance()))
}

/// Joint law of `s_{0:T}` under the stationary start: constant mean and
/// covariance `sigma^2/(1-phi^2) phi^{|i-j|}`.
pub fn joint_moments(p: &Ar1Params, t_len: usize) -> Result<GaussianMoments> {
    p.validate()?;
    if t_len == 0 {
        return Err(Error::Invalid("T must be at least 1".into()));
    }
    let n = t_len + 1;
    let gamma0 = p.stationary_variance();
    let mut pows = vec![1.0; n];
    for k in 1..n {
        pows[k] = pows[k - 1] * p.phi;
    }
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cov[i * n + j] = gamma0 * pows[i.abs_diff(j)];
        }
    }
    Ok(GaussianMoments {
        mean: vec![p.mu; n],
        cov,
    })
}

/// Conditional law of the block given its boundary states.
///
/// `s_left` is the state at index `a - 1`; `s_right` is the state at
/// `b + 1` and must be `None` exactly when the block ends the series.
/// Dense O(n^2) form, used for checking and for callers that need the
/// covariance itself.
pub fn block_conditional(p: &Ar1Params, blk: &Block, s_left: f64, s_right: Option<f64>) -> Result<GaussianMoments> {
    p.validate()?;
    let c = blk.len();
    let phi = p.clamped_phi();
    let gamma0 = p.sigma * p.sigma / (1.0 - phi * phi);
    let mut pows = vec![1.0; 2 * c + 3];
    for k in 1..pows.len() {
        pows[k] = pows[k - 1] * phi;
    }
    // Cross covariances of block position k (1-based) with the boundaries.
    let cov_left: Vec<f64> = (1..=c).map(|k| gamma0 * pows[k]).collect();
    let mut mean = vec![p.mu; c];
    let mut cov = vec![0.0; c * c];
    for i in 0..c {
        for j in 0..c {
            cov[i * c + j] = gamma0 * pows[i.abs_diff(j)];
        }
    }
    let dl = s_left - p.mu;
    match s_right {
        Some(s_right) => {
            let dr = s_right - p.mu;
            let cov_right: Vec<f64> = (1..=c).map(|k| gamma0 * pows[c + 1 - k]).collect();
            // Inverse of the 2x2 boundary covariance.
            let rho = pows[c + 1];
            let scale = 1.0 / (gamma0 * (1.0 - rho * rho));
            let (w11, w12) = (scale, -rho * scale);
            for i in 0..c {
                let g_l = w11 * cov_left[i] + w12 * cov_right[i];
                let g_r = w12 * cov_left[i] + w11 * cov_right[i];
                mean[i] += g_l * dl + g_r * dr;
                for j in 0..c {
                    cov[i * c + j] -= g_l * cov_left[j] + g_r * cov_right[j];
                }
            }
        }
        None => {
            let w = 1.0 / gamma0;
            for i in 0..c {
                mean[i] += cov_left[i] * w * dl;
                for j in 0..c {
                    cov[i * c + j] -= cov_left[i] * w * cov_left[j];
                }
            }
        }
    }
    Ok(GaussianMoments { mean, cov })
}

/// Full conditional of `s_0` given `s_1`: `N(mu + phi (s_1 - mu), sigma^2)`.
pub fn initial_state_conditional(p: &Ar1Params, s_1: f64) -> Result<(f64, f64)> {
    p.validate()?;
    Ok((p.mu + p.phi * (s_1 - p.mu), p.sigma * p.sigma))
}

/// Precomputed one-step coefficients for recursive sampling of a block of
/// fixed length, in deviations from `mu`:
/// `d_t = prev_coef[t] d_{t-1} + right_coef[t] d_right + sd[t] eps_t`.
#[derive(Debug, Clone)]
pub struct BlockSampler {
    mu: f64,
    prev_coef: Vec<f64>,
    right_coef: Vec<f64>,
    sd: Vec<f64>,
    // Closed-form conditional mean weights on the two boundary deviations.
    mean_left: Vec<f64>,
    mean_right: Vec<f64>,
    interior: bool,
}

impl BlockSampler {
    /// `interior` selects the bridge form (right boundary present).
    pub fn new(p: &Ar1Params, len: usize, interior: bool) -> Self {
        let c = len;
        let phi = p.clamped_phi();
        let s2 = p.sigma * p.sigma;
        let mut prev_coef = Vec::with_capacity(c);
        let mut right_coef = Vec::with_capacity(c);
        let mut sd = Vec::with_capacity(c);
        let mut mean_left = Vec::with_capacity(c);
        let mut mean_right = Vec::with_capacity(c);
        if interior {
            let mut pows = Vec::with_capacity(2 * c + 3);
            let mut acc = 1.0;
            for _ in 0..(2 * c + 3) {
                pows.push(acc);
                acc *= phi;
            }
            let phi2 = pows[2];
            for t in 0..c {
                // n steps separate the previous state from the right boundary.
                let n = c + 1 - t;
                let denom = 1.0 - pows[2 * n];
                let num = 1.0 - pows[2 * (n - 1)];
                prev_coef.push(phi * num / denom);
                right_coef.push(pows[n - 1] * (1.0 - phi2) / denom);
                sd.push((s2 * num / denom).sqrt());
            }
            let denom = 1.0 - pows[2 * (c + 1)];
            for k in 1..=c {
                mean_left.push(pows[k] * (1.0 - pows[2 * (c + 1 - k)]) / denom);
                mean_right.push(pows[c + 1 - k] * (1.0 - pows[2 * k]) / denom);
            }
        } else {
            let mut acc = 1.0;
            for _ in 0..c {
                prev_coef.push(phi);
                right_coef.push(0.0);
                sd.push(p.sigma);
                acc *= phi;
                mean_left.push(acc);
                mean_right.push(0.0);
            }
        }
        BlockSampler {
            mu: p.mu,
            prev_coef,
            right_coef,
            sd,
            mean_left,
            mean_right,
            interior,
        }
    }

    pub fn len(&self) -> usize {
        self.sd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sd.is_empty()
    }

    pub fn is_interior(&self) -> bool {
        self.interior
    }

    /// Conditional mean of the block given the boundary values.
    pub fn conditional_mean(&self, s_left: f64, s_right: Option<f64>, out: &mut [f64]) {
        let dl = s_left - self.mu;
        let dr = s_right.map_or(0.0, |r| r - self.mu);
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.mu + self.mean_left[k] * dl + self.mean_right[k] * dr;
        }
    }

    /// One exact draw of the block given the boundary values.
    pub fn sample<R: Rng + ?Sized>(&self, s_left: f64, s_right: Option<f64>, rng: &mut R, out: &mut [f64]) {
        let dr = s_right.map_or(0.0, |r| r - self.mu);
        let mut prev = s_left - self.mu;
        for t in 0..self.len() {
            let eps: f64 = rng.sample(StandardNormal);
            let d = self.prev_coef[t] * prev + self.right_coef[t] * dr + self.sd[t] * eps;
            out[t] = self.mu + d;
            prev = d;
        }
    }

    /// A draw from `N(0, Sigma_block|)`: the recursive sample minus its
    /// conditional mean. The noise part does not depend on the boundaries,
    /// so the recursion runs on zero boundary deviations.
    pub fn sample_centered<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let mut prev = 0.0;
        for t in 0..self.len() {
            let eps: f64 = rng.sample(StandardNormal);
            let d = self.prev_coef[t] * prev + self.sd[t] * eps;
            out[t] = d;
            prev = d;
        }
    }
}

/// One exact draw of the block from its conditional law, computed
/// recursively in O(block length).
pub fn sample_block_recursive<R: Rng + ?Sized>(
    p: &Ar1Params,
    blk: &Block,
    s_left: f64,
    s_right: Option<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    p.validate()?;
    let sampler = BlockSampler::new(p, blk.len(), s_right.is_some());
    let mut out = vec![0.0; blk.len()];
    sampler.sample(s_left, s_right, rng, &mut out);
    Ok(out)
}

/// Simulate `s_{0:T}` from the stationary start.
pub fn simulate_path<R: Rng + ?Sized>(p: &Ar1Params, t_len: usize, rng: &mut R) -> Vec<f64> {
    let mut s = Vec::with_capacity(t_len + 1);
    let z: f64 = rng.sample(StandardNormal);
    s.push(p.mu + p.stationary_variance().sqrt() * z);
    for t in 1..=t_len {
        let e: f64 = rng.sample(StandardNormal);
        s.push(p.mu + p.phi * (s[t - 1] - p.mu) + p.sigma * e);
    }
    s
}
