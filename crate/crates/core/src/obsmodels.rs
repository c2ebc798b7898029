//! Observation models: dynamic bivariate copulas (including the
//! Student-t/Gumbel mixture), skew Student-t stochastic volatility, and
//! constant copulas fitted without a latent state.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::copulas::{CopulaFamily, PreparedPairs};
use crate::dists::{normal_logpdf, trunc_normal_logpdf, StdSkewT};
use crate::draws::DrawsStore;
use crate::engine::adapt::ScalarAdapt;
use crate::engine::{AaParam, ObservationModel, StaticProposal};
use crate::error::{domain, Result};
use crate::rng;

/// Proposal sd for `logit(p)` and `ln(nu - 2)`.
pub const COPULA_STATIC_SD: f64 = 0.3;

/// Priors of the copula statics: `p ~ U[0,1]`, `nu ~ N_{>2}(nu_mean, nu_sd^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaStaticPrior {
    pub nu_mean: f64,
    pub nu_sd: f64,
}

impl Default for CopulaStaticPrior {
    fn default() -> Self {
        CopulaStaticPrior {
            nu_mean: 5.0,
            nu_sd: 20.0,
        }
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Log prior of `ln(nu - 2)` with `nu ~ N_{>2}(mean, sd^2)`.
fn log_prior_log_nu_minus_2(z: f64, mean: f64, sd: f64) -> f64 {
    let nu = 2.0 + z.exp();
    trunc_normal_logpdf(nu, mean, sd, 2.0) + z
}

/// Log prior of `logit(p)` with `p ~ U[0,1]`.
fn log_prior_logit_p(z: f64) -> f64 {
    let p = expit(z);
    p.ln() + (-p).ln_1p()
}

/// Dynamic copula: `tau_t = tanh(s_t)`.
#[derive(Debug, Clone)]
pub struct DynCopulaModel {
    family: CopulaFamily,
    data: PreparedPairs,
    nu: f64,
    p: f64,
    pub prior: CopulaStaticPrior,
}

/// The dynamic mixture copula is a [`DynCopulaModel`] with a mixture family.
pub type DynMixtureModel = DynCopulaModel;

impl DynCopulaModel {
    /// `nu` and `p` are starting values; they are ignored by families that
    /// do not use them.
    pub fn new(family: CopulaFamily, data: &[(f64, f64)], nu: f64, p: f64) -> Result<Self> {
        if family.uses_nu() && !(nu > 2.0) {
            return domain(format!("nu must be > 2, got {nu}"));
        }
        if family.is_mixture() && !(p > 0.0 && p < 1.0) {
            return domain(format!("starting p must lie in (0,1), got {p}"));
        }
        let mut prepared = PreparedPairs::new(data)?;
        if family.uses_nu() {
            prepared.set_nu(nu);
        }
        Ok(DynCopulaModel {
            family,
            data: prepared,
            nu,
            p: if family.is_mixture() { p } else { 1.0 },
            prior: CopulaStaticPrior::default(),
        })
    }

    pub fn family(&self) -> CopulaFamily {
        self.family
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn data(&self) -> &[(f64, f64)] {
        &self.data.u
    }

    /// Log density of observation `t` (1-based) at `tau`.
    pub fn logc_tau(&self, t: usize, tau: f64) -> f64 {
        if !(tau.abs() < 1.0) {
            return f64::NEG_INFINITY;
        }
        let v = self.data.logc(self.family, t - 1, tau, self.p);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

impl ObservationModel for DynCopulaModel {
    fn n_obs(&self) -> usize {
        self.data.len()
    }

    #[inline]
    fn loglik_t(&self, t: usize, s: f64) -> f64 {
        self.logc_tau(t, s.tanh())
    }

    fn static_names(&self) -> Vec<String> {
        match self.family {
            CopulaFamily::StudentT => vec!["nu".into()],
            f if f.is_mixture() => vec!["p".into(), "nu".into()],
            _ => Vec::new(),
        }
    }

    fn statics(&self) -> Vec<f64> {
        match self.family {
            CopulaFamily::StudentT => vec![self.nu],
            f if f.is_mixture() => vec![self.p, self.nu],
            _ => Vec::new(),
        }
    }

    fn statics_unconstrained(&self) -> Vec<f64> {
        match self.family {
            CopulaFamily::StudentT => vec![(self.nu - 2.0).ln()],
            f if f.is_mixture() => vec![logit(self.p), (self.nu - 2.0).ln()],
            _ => Vec::new(),
        }
    }

    fn set_statics_unconstrained(&mut self, x: &[f64]) {
        let z_nu = match self.family {
            CopulaFamily::StudentT => x[0],
            f if f.is_mixture() => {
                self.p = expit(x[0]);
                x[1]
            }
            _ => return,
        };
        self.nu = 2.0 + z_nu.exp();
        if self.nu.is_finite() {
            self.data.set_nu(self.nu);
        }
    }

    fn statics_log_prior(&self, x: &[f64]) -> f64 {
        let CopulaStaticPrior { nu_mean, nu_sd } = self.prior;
        match self.family {
            CopulaFamily::StudentT => log_prior_log_nu_minus_2(x[0], nu_mean, nu_sd),
            f if f.is_mixture() => log_prior_logit_p(x[0]) + log_prior_log_nu_minus_2(x[1], nu_mean, nu_sd),
            _ => 0.0,
        }
    }

    fn static_proposal(&self, _i: usize) -> StaticProposal {
        StaticProposal::Fixed { sd: COPULA_STATIC_SD }
    }
}

/// Priors of the skew-t statics: `alpha ~ N(0, alpha_sd^2)`,
/// `df ~ N_{>2}(df_mean, df_sd^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvStaticPrior {
    pub alpha_sd: f64,
    pub df_mean: f64,
    pub df_sd: f64,
}

impl Default for SvStaticPrior {
    fn default() -> Self {
        SvStaticPrior {
            alpha_sd: 10.0,
            df_mean: 5.0,
            df_sd: 5.0,
        }
    }
}

/// Largest degrees of freedom accepted by the SV likelihood.
pub const SV_MAX_DF: f64 = 1e6;

/// Stochastic volatility with standardized skew Student-t errors:
/// `y_t = exp(s_t / 2) eps_t`.
#[derive(Debug, Clone)]
pub struct SkewTSvModel {
    y: Vec<f64>,
    dist: Option<StdSkewT>,
    alpha: f64,
    df: f64,
    pub prior: SvStaticPrior,
}

impl SkewTSvModel {
    pub fn new(y: Vec<f64>, alpha: f64, df: f64) -> Result<Self> {
        if y.is_empty() {
            return domain("return series is empty");
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return domain(format!("non-finite return {bad}"));
        }
        let dist = Some(StdSkewT::new(alpha, df)?);
        Ok(SkewTSvModel {
            y,
            dist,
            alpha,
            df,
            prior: SvStaticPrior::default(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn returns(&self) -> &[f64] {
        &self.y
    }

    /// `log sst(y e^{-s/2}) - s/2`.
    #[inline]
    pub fn loglik_value(&self, y: f64, s: f64) -> f64 {
        match &self.dist {
            Some(d) => {
                let v = d.logpdf(y * (-0.5 * s).exp()) - 0.5 * s;
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            }
            None => f64::NEG_INFINITY,
        }
    }
}

impl ObservationModel for SkewTSvModel {
    fn n_obs(&self) -> usize {
        self.y.len()
    }

    #[inline]
    fn loglik_t(&self, t: usize, s: f64) -> f64 {
        self.loglik_value(self.y[t - 1], s)
    }

    /// Log of the sample variance.
    fn init_mu(&self) -> f64 {
        let n = self.y.len() as f64;
        let m = self.y.iter().sum::<f64>() / n;
        let v = self.y.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        v.max(1e-300).ln()
    }

    fn static_names(&self) -> Vec<String> {
        vec!["alpha".into(), "df".into()]
    }

    fn statics(&self) -> Vec<f64> {
        vec![self.alpha, self.df]
    }

    fn statics_unconstrained(&self) -> Vec<f64> {
        vec![self.alpha, (self.df - 2.0).ln()]
    }

    fn set_statics_unconstrained(&mut self, x: &[f64]) {
        self.alpha = x[0];
        self.df = 2.0 + x[1].exp();
        self.dist = if self.df.is_finite() && self.df <= SV_MAX_DF && self.alpha.is_finite() {
            StdSkewT::new(self.alpha, self.df).ok()
        } else {
            None
        };
    }

    fn statics_log_prior(&self, x: &[f64]) -> f64 {
        let pr = &self.prior;
        normal_logpdf(x[0], 0.0, pr.alpha_sd) + log_prior_log_nu_minus_2(x[1], pr.df_mean, pr.df_sd)
    }

    fn aa_blocks(&self) -> Vec<Vec<AaParam>> {
        vec![
            vec![AaParam::Mu, AaParam::Static(1)],
            vec![AaParam::Xi, AaParam::Psi],
            vec![AaParam::Static(0)],
        ]
    }
}

/// Constant copula over the whole sample.
#[derive(Debug, Clone)]
pub struct ConstCopulaModel {
    inner: DynCopulaModel,
}

/// Settings for [`ConstCopulaModel::fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstFitConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub stream: u64,
}

impl ConstCopulaModel {
    pub fn new(family: CopulaFamily, data: &[(f64, f64)]) -> Result<Self> {
        Ok(ConstCopulaModel {
            inner: DynCopulaModel::new(family, data, 8.0, 0.5)?,
        })
    }

    pub fn family(&self) -> CopulaFamily {
        self.inner.family
    }

    fn loglik(&self, tau: f64) -> f64 {
        (1..=self.inner.n_obs()).map(|t| self.inner.logc_tau(t, tau)).sum()
    }

    /// Random-walk sampler on `z = atanh(tau)` (uniform prior on tau,
    /// adaptive scale during burn-in) plus the fixed-scale updates of the
    /// statics. Columns: `tau` then the statics.
    pub fn fit(&mut self, cfg: &ConstFitConfig) -> Result<DrawsStore> {
        if cfg.n_iter <= cfg.burn_in {
            return domain("n_iter must exceed burn_in");
        }
        let start = Instant::now();
        let mut r = rng::stream(cfg.seed, rng::stream_id("const-copula", cfg.stream));
        let mut names = vec!["tau".to_string()];
        names.extend(self.inner.static_names());
        let mut draws = DrawsStore::new(names, cfg.n_iter, cfg.burn_in, 1);
        let log_prior_z = |z: f64| {
            let t = z.tanh();
            (1.0 - t * t).ln()
        };
        let mut z = 0.0_f64;
        let mut x = self.inner.statics_unconstrained();
        let mut cur = self.loglik(z.tanh()) + log_prior_z(z) + self.inner.statics_log_prior(&x);
        let mut adapt = ScalarAdapt::new(0.1);
        let (mut acc_tau, mut acc_static) = (0u64, vec![0u64; x.len()]);
        for it in 1..=cfg.n_iter {
            let zp = adapt.propose(z, &mut r);
            let new = self.loglik(zp.tanh()) + log_prior_z(zp) + self.inner.statics_log_prior(&x);
            let lr = new - cur;
            let a = if lr.is_nan() { 0.0 } else { lr.min(0.0).exp() };
            if r.random::<f64>() < a {
                z = zp;
                cur = new;
                acc_tau += 1;
            }
            if it <= cfg.burn_in {
                adapt.update(it, a);
            }
            for i in 0..x.len() {
                let old = x[i];
                let eps: f64 = r.sample(StandardNormal);
                x[i] = old + COPULA_STATIC_SD * eps;
                self.inner.set_statics_unconstrained(&x);
                let new = self.loglik(z.tanh()) + log_prior_z(z) + self.inner.statics_log_prior(&x);
                let lr = new - cur;
                let a = if lr.is_nan() { 0.0 } else { lr.min(0.0).exp() };
                if r.random::<f64>() < a {
                    cur = new;
                    acc_static[i] += 1;
                } else {
                    x[i] = old;
                    self.inner.set_statics_unconstrained(&x);
                }
            }
            if it > cfg.burn_in {
                let mut row = vec![z.tanh()];
                row.extend(self.inner.statics());
                draws.push_row(&row);
            }
        }
        let n = cfg.n_iter as f64;
        draws.info.insert("accept_tau".into(), acc_tau as f64 / n);
        for (name, a) in self.inner.static_names().iter().zip(&acc_static) {
            draws.info.insert(format!("accept_{name}"), *a as f64 / n);
        }
        draws.runtime_secs = start.elapsed().as_secs_f64();
        Ok(draws)
    }
}

/// Functional form of [`ConstCopulaModel::fit`].
pub fn constant_copula_fit(data: &[(f64, f64)], family: CopulaFamily, cfg: &ConstFitConfig) -> Result<DrawsStore> {
    ConstCopulaModel::new(family, data)?.fit(cfg)
}
