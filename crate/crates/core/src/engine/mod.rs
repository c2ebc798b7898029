//! The interweaving Gibbs sampler over `(mu, phi, sigma, s_{0:T})` and
//! observation-model statics.
//!
//! One sweep:
//! a) `s_0` exactly from its full conditional, then each block of
//!    `s_{1:T}` by one elliptical slice step against its AR(1) bridge prior;
//! b) `(mu, phi, sigma)` by the two-block regression sampler given the path,
//!    followed by the statics given the path;
//! c)-e) only when interweaving: map the path to standardized innovations,
//!    run adaptive random-walk updates of `(mu, atanh(phi), ln(sigma))` and
//!    any statics with the innovations held fixed, and rebuild the path.

pub mod adapt;

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ar1::{initial_state_conditional, Ar1Params, Block, BlockSampler};
use crate::dists::{beta_logpdf, gamma_logpdf, normal_logpdf};
use crate::draws::DrawsStore;
use crate::error::{domain, Error, Result};
use crate::rng::{self, SimRng};
use crate::slice::ess_step;

pub use adapt::{BivariateAdapt, ScalarAdapt};

/// Block length for step a.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSize {
    Fixed(usize),
    /// One block covering `s_{1:T}`.
    Whole,
}

impl BlockSize {
    pub fn resolve(&self, t_len: usize) -> usize {
        match *self {
            BlockSize::Fixed(b) => b.min(t_len),
            BlockSize::Whole => t_len,
        }
    }
}

/// A sampler specification `(b, i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub block: BlockSize,
    pub interweave: bool,
}

impl SamplerSpec {
    pub fn new(block: BlockSize, interweave: bool) -> Self {
        SamplerSpec { block, interweave }
    }

    /// Label such as `(5,I)` or `(T,NI)`.
    pub fn label(&self) -> String {
        let b = match self.block {
            BlockSize::Fixed(b) => b.to_string(),
            BlockSize::Whole => "T".to_string(),
        };
        format!("({b},{})", if self.interweave { "I" } else { "NI" })
    }

    /// Inverse of [`SamplerSpec::label`]; parentheses are optional.
    pub fn parse(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut parts = inner.split(',').map(str::trim);
        let (b, i) = match (parts.next(), parts.next(), parts.next()) {
            (Some(b), Some(i), None) => (b, i),
            _ => return domain(format!("sampler spec must look like (5,I), got '{s}'")),
        };
        let block = if b.eq_ignore_ascii_case("t") || b.eq_ignore_ascii_case("whole") {
            BlockSize::Whole
        } else {
            match b.parse::<usize>() {
                Ok(n) if n >= 1 => BlockSize::Fixed(n),
                _ => return domain(format!("invalid block size '{b}'")),
            }
        };
        let interweave = match i.to_ascii_uppercase().as_str() {
            "I" => true,
            "NI" => false,
            _ => return domain(format!("interweave flag must be I or NI, got '{i}'")),
        };
        Ok(SamplerSpec { block, interweave })
    }
}

/// Prior hyperparameters: `mu ~ N(0, sigma_mu^2)`,
/// `(phi + 1)/2 ~ Beta(a_phi, b_phi)`, `sigma^2 ~ Gamma(1/2, rate 1/(2 b_sigma))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorHyper {
    pub sigma_mu: f64,
    pub a_phi: f64,
    pub b_phi: f64,
    pub b_sigma: f64,
}

impl Default for PriorHyper {
    fn default() -> Self {
        PriorHyper {
            sigma_mu: 100.0,
            a_phi: 5.0,
            b_phi: 1.5,
            b_sigma: 1.0,
        }
    }
}

impl PriorHyper {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_mu", self.sigma_mu),
            ("a_phi", self.a_phi),
            ("b_phi", self.b_phi),
            ("b_sigma", self.b_sigma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("prior hyperparameter {name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn log_prior_mu(&self, mu: f64) -> f64 {
        normal_logpdf(mu, 0.0, self.sigma_mu)
    }

    /// Log density of `phi` itself.
    pub fn log_prior_phi(&self, phi: f64) -> f64 {
        beta_logpdf(0.5 * (phi + 1.0), self.a_phi, self.b_phi) - std::f64::consts::LN_2
    }

    /// Log density of `sigma^2`.
    pub fn log_prior_sigma2(&self, sigma2: f64) -> f64 {
        gamma_logpdf(sigma2, 0.5, 1.0 / (2.0 * self.b_sigma))
    }

    /// Log density of `xi = atanh(phi)`, Jacobian included.
    pub fn log_prior_xi(&self, xi: f64) -> f64 {
        let phi = xi.tanh();
        if !(phi.abs() < 1.0) {
            return f64::NEG_INFINITY;
        }
        self.log_prior_phi(phi) + (1.0 - phi * phi).ln()
    }

    /// Log density of `psi = ln(sigma)`, Jacobian included.
    pub fn log_prior_psi(&self, psi: f64) -> f64 {
        let s2 = (2.0 * psi).exp();
        self.log_prior_sigma2(s2) + std::f64::consts::LN_2 + 2.0 * psi
    }
}

/// Split `1..=T` into contiguous blocks of length `blocksize`, the last
/// one possibly shorter.
pub fn partition(t_len: usize, block: BlockSize) -> Result<Vec<Block>> {
    if t_len == 0 {
        return Err(Error::Invalid("T must be at least 1".into()));
    }
    if let BlockSize::Fixed(0) = block {
        return Err(Error::Invalid("block size must be at least 1".into()));
    }
    let b = block.resolve(t_len);
    let mut out = Vec::with_capacity(t_len.div_ceil(b));
    let mut a = 1;
    while a <= t_len {
        let e = (a + b - 1).min(t_len);
        out.push(Block::new(a, e)?);
        a = e + 1;
    }
    Ok(out)
}

/// `s~_t = (s_t - mu - phi (s_{t-1} - mu)) / sigma` for `t = 1..T`.
pub fn path_to_innovations(p: &Ar1Params, s: &[f64], out: &mut [f64]) {
    for t in 1..s.len() {
        out[t - 1] = (s[t] - p.mu - p.phi * (s[t - 1] - p.mu)) / p.sigma;
    }
}

/// Inverse of [`path_to_innovations`] given `s_0 = out[0]`.
pub fn innovations_to_path(p: &Ar1Params, s_tilde: &[f64], out: &mut [f64]) {
    for t in 1..out.len() {
        out[t] = p.mu + p.phi * (out[t - 1] - p.mu) + p.sigma * s_tilde[t - 1];
    }
}

/// Proposal for a static parameter on its unconstrained scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StaticProposal {
    /// Robbins-Monro tuned scalar random walk.
    Adaptive { init_sd: f64 },
    /// Fixed-scale random walk.
    Fixed { sd: f64 },
}

/// Coordinates updated in the ancillary parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AaParam {
    Mu,
    /// `atanh(phi)`
    Xi,
    /// `ln(sigma)`
    Psi,
    Static(usize),
}

/// Observation density `f(y_t | s_t)` plus any static parameters it owns.
///
/// Statics are exchanged on an unconstrained scale; the log prior on that
/// scale must include the change-of-variables Jacobian.
pub trait ObservationModel {
    /// Number of observations `T`.
    fn n_obs(&self) -> usize;

    /// `log f(y_t | s)` for `t = 1..=T`.
    fn loglik_t(&self, t: usize, s: f64) -> f64;

    /// Sum of `loglik_t` over `first..first + s.len()`.
    fn loglik_block(&self, first: usize, s: &[f64]) -> f64 {
        s.iter().enumerate().map(|(k, &v)| self.loglik_t(first + k, v)).sum()
    }

    /// Initial value for `mu` and every latent state.
    fn init_mu(&self) -> f64 {
        0.0
    }

    fn static_names(&self) -> Vec<String> {
        Vec::new()
    }

    /// Statics on their natural scale, in `static_names` order.
    fn statics(&self) -> Vec<f64> {
        Vec::new()
    }

    fn statics_unconstrained(&self) -> Vec<f64> {
        Vec::new()
    }

    fn set_statics_unconstrained(&mut self, _x: &[f64]) {}

    fn statics_log_prior(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn static_proposal(&self, _i: usize) -> StaticProposal {
        StaticProposal::Adaptive { init_sd: 0.1 }
    }

    /// Blocks for the ancillary-parameterization update.
    fn aa_blocks(&self) -> Vec<Vec<AaParam>> {
        vec![vec![AaParam::Mu], vec![AaParam::Xi, AaParam::Psi]]
    }
}

/// Current value of the sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub params: Ar1Params,
    /// `s_0..s_T`
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub spec: SamplerSpec,
    pub priors: PriorHyper,
    pub n_iter: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Sub-stream of `seed` used by this chain.
    pub stream: u64,
    pub store_states: bool,
    /// Keep every `state_thin`-th latent path.
    pub state_thin: usize,
    /// When false only step a runs and all parameters stay fixed.
    pub update_params: bool,
    pub init: Option<ChainState>,
}

impl ChainConfig {
    pub fn new(spec: SamplerSpec, n_iter: usize, burn_in: usize, seed: u64) -> Self {
        ChainConfig {
            spec,
            priors: PriorHyper::default(),
            n_iter,
            burn_in,
            seed,
            stream: 0,
            store_states: false,
            state_thin: 1,
            update_params: true,
            init: None,
        }
    }
}

/// Draws plus the state after the last iteration.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub draws: DrawsStore,
    pub final_state: ChainState,
}

const INIT_PHI: f64 = 0.9;
const INIT_SIGMA: f64 = 0.1;
const INIT_SD_MU: f64 = 0.1;

enum AaAdapt {
    Scalar(ScalarAdapt),
    Bivariate(BivariateAdapt),
    Fixed(f64),
}

struct AaBlock {
    coords: Vec<AaParam>,
    adapt: AaAdapt,
}

#[derive(Debug, Default, Clone)]
struct Stats {
    ess_steps: u64,
    ess_proposals: u64,
    b_gp_accept: u64,
    b_sigma_accept: u64,
    b_tries: u64,
    sa_accept: Vec<u64>,
    sa_tries: u64,
    aa_accept: Vec<u64>,
    aa_sweeps: u64,
}

/// A running chain. Exposed so individual steps can be driven directly.
pub struct Chain<'m, M: ObservationModel> {
    model: &'m mut M,
    cfg: ChainConfig,
    params: Ar1Params,
    s: Vec<f64>,
    t_len: usize,
    blocks: Vec<Block>,
    rng: SimRng,
    sa_adapt: Vec<ScalarAdapt>,
    aa: Vec<AaBlock>,
    iter: usize,
    stats: Stats,
    theta: Vec<f64>,
    nu: Vec<f64>,
    prop: Vec<f64>,
    mean: Vec<f64>,
    eval: Vec<f64>,
    s_tilde: Vec<f64>,
    path_prop: Vec<f64>,
}

impl<'m, M: ObservationModel> Chain<'m, M> {
    pub fn new(model: &'m mut M, cfg: ChainConfig) -> Result<Self> {
        cfg.priors.validate()?;
        let t_len = model.n_obs();
        let blocks = partition(t_len, cfg.spec.block)?;
        let (params, s) = match &cfg.init {
            Some(st) => {
                st.params.validate()?;
                if st.s.len() != t_len + 1 {
                    return domain(format!(
                        "initial path has length {}, expected {}",
                        st.s.len(),
                        t_len + 1
                    ));
                }
                (st.params, st.s.clone())
            }
            None => {
                let mu0 = model.init_mu();
                (Ar1Params::new(mu0, INIT_PHI, INIT_SIGMA)?, vec![mu0; t_len + 1])
            }
        };
        let init_ll = model.loglik_block(1, &s[1..]);
        if init_ll.is_nan() || init_ll == f64::NEG_INFINITY {
            return Err(Error::Numeric(format!(
                "log-likelihood at the initial state is {init_ll}"
            )));
        }
        let n_static = model.statics_unconstrained().len();
        let sa_adapt = (0..n_static)
            .map(|i| match model.static_proposal(i) {
                StaticProposal::Adaptive { init_sd } => ScalarAdapt::new(init_sd),
                StaticProposal::Fixed { sd } => ScalarAdapt::new(sd),
            })
            .collect();
        let mut aa = Vec::new();
        for coords in model.aa_blocks() {
            let adapt = match coords.len() {
                1 => match coords[0] {
                    AaParam::Static(i) => match model.static_proposal(i) {
                        StaticProposal::Adaptive { init_sd } => AaAdapt::Scalar(ScalarAdapt::new(init_sd)),
                        StaticProposal::Fixed { sd } => AaAdapt::Fixed(sd),
                    },
                    _ => AaAdapt::Scalar(ScalarAdapt::new(INIT_SD_MU)),
                },
                2 => AaAdapt::Bivariate(BivariateAdapt::new(2.38 / 2f64.sqrt())),
                n => return domain(format!("ancillary blocks must have 1 or 2 coordinates, got {n}")),
            };
            aa.push(AaBlock { coords, adapt });
        }
        let n_aa = aa.len();
        let rng = rng::stream(cfg.seed, rng::stream_id("chain", cfg.stream));
        Ok(Chain {
            model,
            params,
            s,
            t_len,
            blocks,
            rng,
            sa_adapt,
            aa,
            iter: 0,
            stats: Stats {
                sa_accept: vec![0; n_static],
                aa_accept: vec![0; n_aa],
                ..Stats::default()
            },
            theta: vec![0.0; t_len],
            nu: vec![0.0; t_len],
            prop: vec![0.0; t_len],
            mean: vec![0.0; t_len],
            eval: vec![0.0; t_len],
            s_tilde: vec![0.0; t_len],
            path_prop: vec![0.0; t_len + 1],
            cfg,
        })
    }

    pub fn state(&self) -> ChainState {
        ChainState {
            params: self.params,
            s: self.s.clone(),
        }
    }

    pub fn params(&self) -> Ar1Params {
        self.params
    }

    pub fn path(&self) -> &[f64] {
        &self.s
    }

    pub fn model(&self) -> &M {
        self.model
    }

    /// Number of completed sweeps.
    pub fn iteration(&self) -> usize {
        self.iter
    }

    /// Number of ancillary-parameterization sweeps run so far.
    pub fn aa_sweeps(&self) -> u64 {
        self.stats.aa_sweeps
    }

    fn adapting(&self, r: usize) -> bool {
        r <= self.cfg.burn_in
    }

    /// One full sweep.
    pub fn sweep(&mut self) -> Result<()> {
        let r = self.iter + 1;
        self.step_a()?;
        if self.cfg.update_params {
            self.step_b();
            self.step_sa_statics(r);
            if self.cfg.spec.interweave {
                self.step_interweave(r);
            }
        }
        self.iter = r;
        Ok(())
    }

    /// Step a: `s_0` exactly, then one elliptical slice step per block.
    pub fn step_a(&mut self) -> Result<()> {
        let p = self.params;
        let (m0, v0) = initial_state_conditional(&p, self.s[1])?;
        let z: f64 = self.rng.sample(StandardNormal);
        self.s[0] = m0 + v0.sqrt() * z;

        let t_len = self.t_len;
        let mut samplers: Vec<(usize, bool, BlockSampler)> = Vec::with_capacity(2);
        for bi in 0..self.blocks.len() {
            let blk = self.blocks[bi];
            let len = blk.len();
            let interior = blk.b < t_len;
            let idx = match samplers.iter().position(|(l, i, _)| *l == len && *i == interior) {
                Some(i) => i,
                None => {
                    samplers.push((len, interior, BlockSampler::new(&p, len, interior)));
                    samplers.len() - 1
                }
            };
            let sampler = &samplers[idx].2;
            let right = interior.then(|| self.s[blk.b + 1]);
            let mean = &mut self.mean[..len];
            sampler.conditional_mean(self.s[blk.a - 1], right, mean);
            let theta = &mut self.theta[..len];
            for k in 0..len {
                theta[k] = self.s[blk.a + k] - mean[k];
            }
            let model = &*self.model;
            let cur_ll = model.loglik_block(blk.a, &self.s[blk.a..=blk.b]);
            let eval = &mut self.eval[..len];
            let mean: &[f64] = mean;
            let step = ess_step(
                theta,
                cur_ll,
                |rng: &mut SimRng, out: &mut [f64]| sampler.sample_centered(rng, out),
                |x: &[f64]| {
                    for k in 0..x.len() {
                        eval[k] = mean[k] + x[k];
                    }
                    model.loglik_block(blk.a, eval)
                },
                &mut self.rng,
                &mut self.nu[..len],
                &mut self.prop[..len],
            )
            .map_err(|e| Error::Numeric(format!("block {}..{}: {e}", blk.a, blk.b)))?;
            for k in 0..len {
                self.s[blk.a + k] = mean[k] + theta[k];
            }
            self.stats.ess_steps += 1;
            self.stats.ess_proposals += step.proposals as u64;
        }
        Ok(())
    }

    // Log of the terms that the regression proposal does not cover.
    fn step_b_extra(&self, mu: f64, phi: f64, sigma2: f64) -> f64 {
        let pr = &self.cfg.priors;
        let sd0 = (sigma2 / (1.0 - phi * phi)).sqrt();
        normal_logpdf(self.s[0], mu, sd0) + pr.log_prior_mu(mu) + pr.log_prior_phi(phi)
    }

    /// Step b: `(mu, phi, sigma)` given the path, as two Metropolis-Hastings
    /// blocks for the regression `s_t = gamma + phi s_{t-1} + sigma eta_t`
    /// with `gamma = mu (1 - phi)`.
    pub fn step_b(&mut self) {
        let n = self.t_len as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for t in 1..=self.t_len {
            let (x, y) = (self.s[t - 1], self.s[t]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        self.stats.b_tries += 1;
        let Ar1Params { mu, phi, sigma } = self.params;
        let sigma2 = sigma * sigma;

        // (i) (gamma, phi) | sigma
        let det = n * sxx - sx * sx;
        let (mut mu, mut phi) = (mu, phi);
        if det > 1e-12 * n * sxx.abs().max(1e-300) {
            let inv = [[sxx / det, -sx / det], [-sx / det, n / det]];
            let b0 = inv[0][0] * sy + inv[0][1] * sxy;
            let b1 = inv[1][0] * sy + inv[1][1] * sxy;
            let l00 = inv[0][0].sqrt();
            let l10 = inv[1][0] / l00;
            let l11 = (inv[1][1] - l10 * l10).max(0.0).sqrt();
            let z0: f64 = self.rng.sample(StandardNormal);
            let z1: f64 = self.rng.sample(StandardNormal);
            let gamma_p = b0 + sigma * l00 * z0;
            let phi_p = b1 + sigma * (l10 * z0 + l11 * z1);
            let u: f64 = self.rng.random();
            if phi_p.abs() < 1.0 {
                let mu_p = gamma_p / (1.0 - phi_p);
                let cur = self.step_b_extra(mu, phi, sigma2) - (1.0 - phi).ln();
                let new = self.step_b_extra(mu_p, phi_p, sigma2) - (1.0 - phi_p).ln();
                if u.ln() < new - cur {
                    mu = mu_p;
                    phi = phi_p;
                    self.stats.b_gp_accept += 1;
                }
            }
        }

        // (ii) sigma^2 | gamma, phi
        let gamma = mu * (1.0 - phi);
        let mut rss = 0.0;
        for t in 1..=self.t_len {
            let e = self.s[t] - gamma - phi * self.s[t - 1];
            rss += e * e;
        }
        let mut sigma2_new = sigma2;
        if rss > 0.0 {
            let g = Gamma::new(0.5 * n, 1.0).expect("positive shape").sample(&mut self.rng);
            let prop = 0.5 * rss / g;
            let u: f64 = self.rng.random();
            let pr = &self.cfg.priors;
            let sd0 = |s2: f64| (s2 / (1.0 - phi * phi)).sqrt();
            let extra = |s2: f64| normal_logpdf(self.s[0], mu, sd0(s2)) + pr.log_prior_sigma2(s2) + s2.ln();
            if prop.is_finite() && prop > 0.0 && u.ln() < extra(prop) - extra(sigma2) {
                sigma2_new = prop;
                self.stats.b_sigma_accept += 1;
            }
        }
        self.params = Ar1Params {
            mu,
            phi,
            sigma: sigma2_new.sqrt(),
        };
    }

    fn full_loglik(&self, path: &[f64]) -> f64 {
        self.model.loglik_block(1, &path[1..])
    }

    /// Statics given the path, one scalar random walk each.
    pub fn step_sa_statics(&mut self, r: usize) {
        let n = self.sa_adapt.len();
        if n == 0 {
            return;
        }
        self.stats.sa_tries += 1;
        let mut x = self.model.statics_unconstrained();
        let mut cur = self.full_loglik(&self.s) + self.model.statics_log_prior(&x);
        for i in 0..n {
            let old = x[i];
            x[i] = self.sa_adapt[i].propose(old, &mut self.rng);
            self.model.set_statics_unconstrained(&x);
            let new = self.full_loglik(&self.s) + self.model.statics_log_prior(&x);
            let log_ratio = new - cur;
            let u: f64 = self.rng.random();
            let accept_prob = if log_ratio.is_nan() {
                0.0
            } else {
                log_ratio.min(0.0).exp()
            };
            if u < accept_prob {
                cur = new;
                self.stats.sa_accept[i] += 1;
            } else {
                x[i] = old;
                self.model.set_statics_unconstrained(&x);
            }
            if self.adapting(r) {
                if let StaticProposal::Adaptive { .. } = self.model.static_proposal(i) {
                    self.sa_adapt[i].update(r, accept_prob);
                }
            }
        }
    }

    // Ancillary log posterior at (mu, xi, psi, statics x); writes the
    // implied path to `self.path_prop`.
    fn aa_logpost(&mut self, mu: f64, xi: f64, psi: f64, x: &[f64]) -> f64 {
        let phi = xi.tanh();
        let sigma = psi.exp();
        if !(phi.abs() < 1.0) || !(sigma > 0.0 && sigma.is_finite()) || !mu.is_finite() {
            return f64::NEG_INFINITY;
        }
        let p = Ar1Params { mu, phi, sigma };
        self.path_prop[0] = self.s[0];
        innovations_to_path(&p, &self.s_tilde, &mut self.path_prop);
        let pr = &self.cfg.priors;
        let sd0 = (sigma * sigma / (1.0 - phi * phi)).sqrt();
        let ll = self.model.loglik_block(1, &self.path_prop[1..]);
        ll + normal_logpdf(self.s[0], mu, sd0)
            + pr.log_prior_mu(mu)
            + pr.log_prior_xi(xi)
            + pr.log_prior_psi(psi)
            + self.model.statics_log_prior(x)
    }

    /// Steps c-e.
    pub fn step_interweave(&mut self, r: usize) {
        self.stats.aa_sweeps += 1;
        let p0 = self.params;
        path_to_innovations(&p0, &self.s, &mut self.s_tilde);
        let mut mu = p0.mu;
        let mut xi = p0.phi.atanh();
        let mut psi = p0.sigma.ln();
        let mut x = self.model.statics_unconstrained();
        let mut cur = self.aa_logpost(mu, xi, psi, &x);
        let mut cur_path = self.s.clone();
        let adapting = self.adapting(r);

        for bi in 0..self.aa.len() {
            let coords = self.aa[bi].coords.clone();
            let get = |c: AaParam, mu: f64, xi: f64, psi: f64, x: &[f64]| match c {
                AaParam::Mu => mu,
                AaParam::Xi => xi,
                AaParam::Psi => psi,
                AaParam::Static(i) => x[i],
            };
            let cur_vals: Vec<f64> = coords.iter().map(|&c| get(c, mu, xi, psi, &x)).collect();
            let prop_vals: Vec<f64> = match &self.aa[bi].adapt {
                AaAdapt::Scalar(a) => vec![a.propose(cur_vals[0], &mut self.rng)],
                AaAdapt::Fixed(sd) => {
                    let z: f64 = self.rng.sample(StandardNormal);
                    vec![cur_vals[0] + sd * z]
                }
                AaAdapt::Bivariate(a) => a.propose([cur_vals[0], cur_vals[1]], &mut self.rng).to_vec(),
            };
            let (mut mu_p, mut xi_p, mut psi_p, mut x_p) = (mu, xi, psi, x.clone());
            let mut touches_statics = false;
            for (&c, &v) in coords.iter().zip(&prop_vals) {
                match c {
                    AaParam::Mu => mu_p = v,
                    AaParam::Xi => xi_p = v,
                    AaParam::Psi => psi_p = v,
                    AaParam::Static(i) => {
                        x_p[i] = v;
                        touches_statics = true;
                    }
                }
            }
            if touches_statics {
                self.model.set_statics_unconstrained(&x_p);
            }
            let new = self.aa_logpost(mu_p, xi_p, psi_p, &x_p);
            let log_ratio = new - cur;
            let accept_prob = if log_ratio.is_nan() {
                0.0
            } else {
                log_ratio.min(0.0).exp()
            };
            let u: f64 = self.rng.random();
            if u < accept_prob {
                mu = mu_p;
                xi = xi_p;
                psi = psi_p;
                x = x_p;
                cur = new;
                cur_path.copy_from_slice(&self.path_prop);
                self.stats.aa_accept[bi] += 1;
            } else if touches_statics {
                self.model.set_statics_unconstrained(&x);
            }
            if adapting {
                match &mut self.aa[bi].adapt {
                    AaAdapt::Scalar(a) => a.update(r, accept_prob),
                    AaAdapt::Fixed(_) => {}
                    AaAdapt::Bivariate(a) => {
                        let now: Vec<f64> = coords.iter().map(|&c| get(c, mu, xi, psi, &x)).collect();
                        a.observe([now[0], now[1]]);
                        a.update_scale(r, accept_prob);
                        a.refresh(r);
                    }
                }
            }
        }
        self.params = Ar1Params {
            mu,
            phi: xi.tanh(),
            sigma: psi.exp(),
        };
        self.s = cur_path;
        debug_assert!({
            let mut back = vec![0.0; self.t_len];
            path_to_innovations(&self.params, &self.s, &mut back);
            back.iter()
                .zip(&self.s_tilde)
                .all(|(a, b)| (a - b).abs() <= 1e-8 * (1.0 + b.abs()))
        });
    }

    fn record_info(&self, draws: &mut DrawsStore) {
        let it = self.iter.max(1) as f64;
        let st = &self.stats;
        draws.info.insert(
            "ess_mean_proposals".into(),
            st.ess_proposals as f64 / st.ess_steps.max(1) as f64,
        );
        if st.b_tries > 0 {
            draws
                .info
                .insert("accept_sa_gamma_phi".into(), st.b_gp_accept as f64 / st.b_tries as f64);
            draws
                .info
                .insert("accept_sa_sigma".into(), st.b_sigma_accept as f64 / st.b_tries as f64);
        }
        let names = self.model.static_names();
        for (i, a) in st.sa_accept.iter().enumerate() {
            if st.sa_tries > 0 {
                draws
                    .info
                    .insert(format!("accept_sa_{}", names[i]), *a as f64 / st.sa_tries as f64);
            }
        }
        for (i, a) in st.aa_accept.iter().enumerate() {
            if st.aa_sweeps > 0 {
                draws
                    .info
                    .insert(format!("accept_aa_block{i}"), *a as f64 / st.aa_sweeps as f64);
            }
        }
        draws.info.insert("aa_sweeps".into(), st.aa_sweeps as f64);
        draws.info.insert("iterations".into(), it);
    }
}

/// Parameter column names: `mu, phi, sigma` then the model statics.
pub fn draw_names<M: ObservationModel>(model: &M) -> Vec<String> {
    let mut names = vec!["mu".to_string(), "phi".to_string(), "sigma".to_string()];
    names.extend(model.static_names());
    names
}

/// Run a chain and return its post-burn-in draws.
pub fn run_chain<M: ObservationModel>(model: &mut M, cfg: &ChainConfig) -> Result<DrawsStore> {
    Ok(run_chain_full(model, cfg)?.draws)
}

/// Run a chain and also return its final state.
pub fn run_chain_full<M: ObservationModel>(model: &mut M, cfg: &ChainConfig) -> Result<ChainRun> {
    if cfg.n_iter <= cfg.burn_in {
        return domain(format!("n_iter ({}) must exceed burn_in ({})", cfg.n_iter, cfg.burn_in));
    }
    let start = Instant::now();
    let names = draw_names(model);
    let mut draws = DrawsStore::new(names, cfg.n_iter, cfg.burn_in, cfg.state_thin);
    let mut chain = Chain::new(model, cfg.clone())?;
    let mut row = Vec::new();
    for r in 1..=cfg.n_iter {
        chain.sweep()?;
        if r > cfg.burn_in {
            let p = chain.params;
            row.clear();
            row.extend_from_slice(&[p.mu, p.phi, p.sigma]);
            row.extend(chain.model.statics());
            draws.push_row(&row);
            let kept = r - cfg.burn_in;
            if cfg.store_states && kept % draws.state_thin == 0 {
                draws.push_states(&chain.s);
            }
        }
    }
    chain.record_info(&mut draws);
    draws.runtime_secs = start.elapsed().as_secs_f64();
    Ok(ChainRun {
        final_state: chain.state(),
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flat(usize);
    impl ObservationModel for Flat {
        fn n_obs(&self) -> usize {
            self.0
        }
        fn loglik_t(&self, _t: usize, _s: f64) -> f64 {
            0.0
        }
    }

    #[test]
    fn partition_examples() {
        let p = partition(10, BlockSize::Fixed(5)).unwrap();
        assert_eq!(p, vec![Block::new(1, 5).unwrap(), Block::new(6, 10).unwrap()]);
        let p = partition(10, BlockSize::Fixed(4)).unwrap();
        assert_eq!(
            p.iter().map(|b| (b.a, b.b)).collect::<Vec<_>>(),
            vec![(1, 4), (5, 8), (9, 10)]
        );
        let p = partition(1000, BlockSize::Whole).unwrap();
        assert_eq!(p, vec![Block::new(1, 1000).unwrap()]);
        assert!(partition(10, BlockSize::Fixed(0)).is_err());
    }

    #[test]
    fn spec_labels_round_trip() {
        for s in ["(5,I)", "(1,NI)", "(T,I)", "(T,NI)"] {
            assert_eq!(SamplerSpec::parse(s).unwrap().label(), s);
        }
        assert!(SamplerSpec::parse("(0,I)").is_err());
        assert!(SamplerSpec::parse("5").is_err());
    }

    #[test]
    fn innovation_round_trip() {
        let p = Ar1Params::new(0.3, 0.8, 0.2).unwrap();
        let s = vec![0.1, 0.5, -0.2, 0.9, 0.4];
        let mut st = vec![0.0; 4];
        path_to_innovations(&p, &s, &mut st);
        let mut back = vec![0.0; 5];
        back[0] = s[0];
        innovations_to_path(&p, &st, &mut back);
        for (a, b) in s.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let q = Ar1Params::new(0.0, 0.0, 1.0).unwrap();
        path_to_innovations(&q, &s, &mut st);
        assert_eq!(st, s[1..].to_vec());
    }

    #[test]
    fn prior_density_jacobians() {
        let pr = PriorHyper::default();
        // Finite-difference check of the xi and psi transforms.
        let (xi, h) = (0.7_f64, 1e-6_f64);
        let phi_lo = (xi - h).tanh();
        let phi_hi = (xi + h).tanh();
        let mass = pr.log_prior_phi(xi.tanh()).exp() * (phi_hi - phi_lo);
        assert!((mass / (2.0 * h) - pr.log_prior_xi(xi).exp()).abs() < 1e-6);
        let psi = -1.2;
        let s2 = |p: f64| (2.0 * p).exp();
        let mass = pr.log_prior_sigma2(s2(psi)).exp() * (s2(psi + h) - s2(psi - h));
        assert!((mass / (2.0 * h) - pr.log_prior_psi(psi).exp()).abs() < 1e-6);
    }

    struct Noisy(Vec<f64>);
    impl ObservationModel for Noisy {
        fn n_obs(&self) -> usize {
            self.0.len()
        }
        fn loglik_t(&self, t: usize, s: f64) -> f64 {
            -0.5 * (self.0[t - 1] - s).powi(2)
        }
    }

    #[test]
    fn ancillary_target_is_the_joint_times_jacobian() {
        // Joint density of (theta, s) written directly, then mapped to
        // (mu, atanh phi, ln sigma, s_tilde).
        let y: Vec<f64> = (0..25).map(|t| (t as f64 * 0.7).sin()).collect();
        let mut model = Noisy(y.clone());
        let cfg = ChainConfig::new(SamplerSpec::new(BlockSize::Fixed(5), true), 10, 0, 3);
        let mut chain = Chain::new(&mut model, cfg).unwrap();
        for _ in 0..20 {
            chain.sweep().unwrap();
        }
        let p0 = chain.params();
        let s0 = chain.path().to_vec();
        path_to_innovations(&p0, &s0, &mut chain.s_tilde);
        let st = chain.s_tilde.clone();
        let pr = PriorHyper::default();
        let mut r = rng::stream(44, 0);
        for _ in 0..10 {
            let mu = p0.mu + r.random_range(-1.0..1.0f64);
            let xi: f64 = r.random_range(-2.0..2.5);
            let psi: f64 = r.random_range(-3.0..0.5);
            let (phi, sigma) = (xi.tanh(), psi.exp());
            let aa = chain.aa_logpost(mu, xi, psi, &[]);
            let s = chain.path_prop.clone();
            let mut joint: f64 = y.iter().zip(&s[1..]).map(|(a, b)| -0.5 * (a - b).powi(2)).sum();
            joint += normal_logpdf(s[0], mu, sigma / (1.0 - phi * phi).sqrt());
            for t in 1..s.len() {
                joint += normal_logpdf(s[t], mu + phi * (s[t - 1] - mu), sigma);
            }
            joint += pr.log_prior_mu(mu) + pr.log_prior_phi(phi) + pr.log_prior_sigma2(sigma * sigma);
            let log_jac = st.len() as f64 * psi + (1.0 - phi * phi).ln() + std::f64::consts::LN_2 + 2.0 * psi;
            let base: f64 = st.iter().map(|&e| normal_logpdf(e, 0.0, 1.0)).sum();
            let gap = aa - (joint + log_jac - base);
            assert!(gap.abs() < 1e-9 * (1.0 + aa.abs()), "gap {gap} at ({mu}, {xi}, {psi})");
        }
    }

    #[test]
    fn no_interweave_skips_ancillary_steps() {
        let mut m = Flat(30);
        let cfg = ChainConfig::new(SamplerSpec::new(BlockSize::Fixed(5), false), 50, 10, 1);
        let d = run_chain(&mut m, &cfg).unwrap();
        assert_eq!(d.info["aa_sweeps"], 0.0);
        let cfg = ChainConfig::new(SamplerSpec::new(BlockSize::Fixed(5), true), 50, 10, 1);
        let d = run_chain(&mut m, &cfg).unwrap();
        assert_eq!(d.info["aa_sweeps"], 50.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = ChainConfig {
            store_states: true,
            ..ChainConfig::new(SamplerSpec::new(BlockSize::Fixed(3), true), 40, 5, 9)
        };
        let a = run_chain(&mut Flat(12), &cfg).unwrap();
        let b = run_chain(&mut Flat(12), &cfg).unwrap();
        assert_eq!(a.csv_rows(), b.csv_rows());
    }

    #[test]
    fn invalid_lengths() {
        let cfg = ChainConfig::new(SamplerSpec::new(BlockSize::Fixed(3), true), 10, 10, 9);
        assert!(run_chain(&mut Flat(12), &cfg).is_err());
    }
}
