//! Two-step estimation for bivariate return series (skew-t SV margins,
//! probability integral transform at posterior modes, copula fit), tail
//! dependence trajectories, and the rolling one-step-ahead forecast with
//! cumulative pseudo log predictive scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ar1::{simulate_path, Ar1Params};
use crate::copulas::{self, clip_unit, sample_one_tagged, CopulaFamily, CopulaParams, MixtureParams};
use crate::diagnostics::{kendall_tau, posterior_mode, posterior_quantiles, summarize, ParamSummary};
use crate::dists::StdSkewT;
use crate::draws::DrawsStore;
use crate::engine::{run_chain_full, BlockSize, ChainConfig, ChainState, PriorHyper, SamplerSpec};
use crate::error::{domain, Error, Result};
use crate::obsmodels::{ConstCopulaModel, ConstFitConfig, DynCopulaModel, SkewTSvModel};
use crate::quad::composite_gauss_legendre;
use crate::rng;

/// Copula models compared in the forecast; all use skew-t SV margins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MenuEntry {
    DynMix,
    ConstMix,
    DynT,
    ConstT,
}

impl MenuEntry {
    pub const ALL: [MenuEntry; 4] = [
        MenuEntry::DynMix,
        MenuEntry::ConstMix,
        MenuEntry::DynT,
        MenuEntry::ConstT,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            MenuEntry::DynMix => "dyn_mix",
            MenuEntry::ConstMix => "const_mix",
            MenuEntry::DynT => "dyn_t",
            MenuEntry::ConstT => "const_t",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        MenuEntry::ALL
            .into_iter()
            .find(|e| e.id() == s.trim())
            .ok_or_else(|| Error::Invalid(format!("unknown model '{s}' (dyn_mix, const_mix, dyn_t, const_t)")))
    }

    pub fn family(&self) -> CopulaFamily {
        match self {
            MenuEntry::DynMix | MenuEntry::ConstMix => CopulaFamily::Mixture,
            MenuEntry::DynT | MenuEntry::ConstT => CopulaFamily::StudentT,
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self, MenuEntry::DynMix | MenuEntry::DynT)
    }
}

/// Run lengths and sampler settings of the two-step fit and the forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub spec: SamplerSpec,
    pub priors: PriorHyper,
    pub train_iter: usize,
    pub train_burn: usize,
    /// Iterations of the latent-only window refits.
    pub test_iter: usize,
    pub test_burn: usize,
    pub window: usize,
    /// Upper bound on stored latent paths per fit (thinning is chosen to
    /// respect it).
    pub max_state_draws: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            spec: SamplerSpec::new(BlockSize::Fixed(5), true),
            priors: PriorHyper::default(),
            train_iter: 31_000,
            train_burn: 1_000,
            test_iter: 11_000,
            test_burn: 1_000,
            window: 100,
            max_state_draws: 5_000,
            seed: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.priors.validate()?;
        if self.train_iter < self.train_burn + 100 || self.test_iter < self.test_burn + 100 {
            return domain("each run needs at least 100 post-burn-in draws");
        }
        if self.window < 2 {
            return domain("window must hold at least 2 observations");
        }
        if self.max_state_draws < 100 {
            return domain("max_state_draws must be at least 100");
        }
        Ok(())
    }

    fn thin(&self, kept: usize) -> usize {
        kept.div_ceil(self.max_state_draws).max(1)
    }
}

/// Minimum training length accepted by [`fit_two_step`].
pub const MIN_TRAIN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mode: f64,
    pub q05: f64,
    pub q95: f64,
}

fn band(x: &[f64]) -> Result<Band> {
    let q = posterior_quantiles(x, &[0.05, 0.95])?;
    Ok(Band {
        mode: posterior_mode(x)?,
        q05: q[0],
        q95: q[1],
    })
}

/// Per-t bands of the stored latent paths.
fn path_bands(draws: &DrawsStore) -> Result<Vec<Band>> {
    (0..draws.state_len()).map(|t| band(&draws.state_column(t))).collect()
}

fn summaries(draws: &DrawsStore) -> Result<BTreeMap<String, ParamSummary>> {
    draws
        .columns()
        .map(|(n, c)| Ok((n.to_string(), summarize(c)?)))
        .collect()
}

fn mode_of(s: &BTreeMap<String, ParamSummary>, name: &str) -> Result<f64> {
    s.get(name)
        .map(|p| p.mode)
        .ok_or_else(|| Error::Invalid(format!("missing summary for {name}")))
}

/// Posterior summary of one skew-t SV margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginFit {
    pub summaries: BTreeMap<String, ParamSummary>,
    pub ar1: Ar1Params,
    pub alpha: f64,
    pub df: f64,
    /// Bands of `s_0..s_T`.
    pub path: Vec<Band>,
}

impl MarginFit {
    pub fn mode_path(&self) -> Vec<f64> {
        self.path.iter().map(|b| b.mode).collect()
    }

    pub fn dist(&self) -> Result<StdSkewT> {
        StdSkewT::new(self.alpha, self.df)
    }
}

/// Fitted copula stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CopulaFit {
    Dynamic {
        summaries: BTreeMap<String, ParamSummary>,
        ar1: Ar1Params,
        nu: f64,
        p: f64,
        path: Vec<Band>,
        #[serde(skip)]
        draws: Option<DrawsStore>,
    },
    Constant {
        summaries: BTreeMap<String, ParamSummary>,
        tau: f64,
        nu: f64,
        p: f64,
    },
}

impl CopulaFit {
    pub fn summaries(&self) -> &BTreeMap<String, ParamSummary> {
        match self {
            CopulaFit::Dynamic { summaries, .. } | CopulaFit::Constant { summaries, .. } => summaries,
        }
    }

    pub fn nu(&self) -> f64 {
        match *self {
            CopulaFit::Dynamic { nu, .. } | CopulaFit::Constant { nu, .. } => nu,
        }
    }

    pub fn p(&self) -> f64 {
        match *self {
            CopulaFit::Dynamic { p, .. } | CopulaFit::Constant { p, .. } => p,
        }
    }

    /// Posterior-mode path of the copula state (`s_0..s_T`), if dynamic.
    pub fn mode_path(&self) -> Option<Vec<f64>> {
        match self {
            CopulaFit::Dynamic { path, .. } => Some(path.iter().map(|b| b.mode).collect()),
            CopulaFit::Constant { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepFit {
    pub entry: MenuEntry,
    pub margins: [MarginFit; 2],
    /// Pseudo copula data.
    pub u_hat: Vec<(f64, f64)>,
    pub copula: CopulaFit,
}

fn check_returns(y: &[(f64, f64)]) -> Result<()> {
    if let Some((t, _)) = y.iter().enumerate().find(|(_, p)| !p.0.is_finite() || !p.1.is_finite()) {
        return domain(format!("non-finite return at row {}", t + 1));
    }
    Ok(())
}

fn column(y: &[(f64, f64)], j: usize) -> Vec<f64> {
    y.iter().map(|p| if j == 0 { p.0 } else { p.1 }).collect()
}

/// Fit one skew-t SV margin with all parameters free.
pub fn fit_margin(y: &[f64], cfg: &PipelineConfig, stream: u64) -> Result<MarginFit> {
    let mut model = SkewTSvModel::new(y.to_vec(), 0.0, 10.0)?;
    let mut chain = ChainConfig::new(cfg.spec, cfg.train_iter, cfg.train_burn, cfg.seed);
    chain.priors = cfg.priors;
    chain.stream = stream;
    chain.store_states = true;
    chain.state_thin = cfg.thin(cfg.train_iter - cfg.train_burn);
    let run = run_chain_full(&mut model, &chain)?;
    let summaries = summaries(&run.draws)?;
    Ok(MarginFit {
        ar1: Ar1Params::new(
            mode_of(&summaries, "mu")?,
            mode_of(&summaries, "phi")?,
            mode_of(&summaries, "sigma")?,
        )?,
        alpha: mode_of(&summaries, "alpha")?,
        df: mode_of(&summaries, "df")?,
        path: path_bands(&run.draws)?,
        summaries,
    })
}

/// `u_t = ssT(y_t exp(-s_t / 2))` for `s` aligned with `y`.
pub fn pit(y: &[f64], s: &[f64], dist: &StdSkewT) -> Vec<f64> {
    y.iter()
        .zip(s)
        .map(|(&yt, &st)| clip_unit(dist.cdf(yt * (-0.5 * st).exp())))
        .collect()
}

fn pair_up(a: Vec<f64>, b: Vec<f64>) -> Vec<(f64, f64)> {
    a.into_iter().zip(b).collect()
}

/// Both margins and the pseudo copula data.
pub fn fit_margins(y: &[(f64, f64)], cfg: &PipelineConfig) -> Result<([MarginFit; 2], Vec<(f64, f64)>)> {
    check_returns(y)?;
    cfg.validate()?;
    if y.len() < MIN_TRAIN {
        return domain(format!("need at least {MIN_TRAIN} observations, got {}", y.len()));
    }
    let (y1, y2) = (column(y, 0), column(y, 1));
    let (m1, m2) = rayon::join(
        || fit_margin(&y1, cfg, rng::stream_id("margin", 0)),
        || fit_margin(&y2, cfg, rng::stream_id("margin", 1)),
    );
    let (m1, m2) = (m1?, m2?);
    let u1 = pit(&y1, &m1.mode_path()[1..], &m1.dist()?);
    let u2 = pit(&y2, &m2.mode_path()[1..], &m2.dist()?);
    Ok(([m1, m2], pair_up(u1, u2)))
}

/// Copula stage of the two-step fit.
pub fn fit_copula(u: &[(f64, f64)], entry: MenuEntry, cfg: &PipelineConfig) -> Result<CopulaFit> {
    cfg.validate()?;
    let family = entry.family();
    let stream = rng::stream_id(&format!("copula/{}", entry.id()), 0);
    if entry.is_dynamic() {
        let mut model = DynCopulaModel::new(family, u, 8.0, 0.5)?;
        let mut chain = ChainConfig::new(cfg.spec, cfg.train_iter, cfg.train_burn, cfg.seed);
        chain.priors = cfg.priors;
        chain.stream = stream;
        chain.store_states = true;
        chain.state_thin = cfg.thin(cfg.train_iter - cfg.train_burn);
        let run = run_chain_full(&mut model, &chain)?;
        let summaries = summaries(&run.draws)?;
        let p = if family.is_mixture() {
            mode_of(&summaries, "p")?
        } else {
            1.0
        };
        Ok(CopulaFit::Dynamic {
            ar1: Ar1Params::new(
                mode_of(&summaries, "mu")?,
                mode_of(&summaries, "phi")?,
                mode_of(&summaries, "sigma")?,
            )?,
            nu: mode_of(&summaries, "nu")?,
            p,
            path: path_bands(&run.draws)?,
            summaries,
            draws: Some(run.draws),
        })
    } else {
        let draws = ConstCopulaModel::new(family, u)?.fit(&ConstFitConfig {
            n_iter: cfg.train_iter,
            burn_in: cfg.train_burn,
            seed: cfg.seed,
            stream,
        })?;
        let summaries = summaries(&draws)?;
        let p = if family.is_mixture() {
            mode_of(&summaries, "p")?
        } else {
            1.0
        };
        Ok(CopulaFit::Constant {
            tau: mode_of(&summaries, "tau")?,
            nu: mode_of(&summaries, "nu")?,
            p,
            summaries,
        })
    }
}

/// Margins, probability integral transform at the posterior modes, then
/// the copula of `entry` on the pseudo copula data.
pub fn fit_two_step(y: &[(f64, f64)], entry: MenuEntry, cfg: &PipelineConfig) -> Result<TwoStepFit> {
    let (margins, u_hat) = fit_margins(y, cfg)?;
    let copula = fit_copula(&u_hat, entry, cfg)?;
    Ok(TwoStepFit {
        entry,
        margins,
        u_hat,
        copula,
    })
}

/// Posterior bands of Kendall's tau and the corner tail-dependence
/// coefficients at one time point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: usize,
    pub tau: Band,
    pub lower: Band,
    pub upper: Band,
    pub upper_left: Band,
    pub lower_right: Band,
    /// Empirical Kendall's tau of the pseudo data within the rolling window.
    pub rolling_tau: f64,
}

/// Half-width of the rolling empirical Kendall's tau window.
pub const ROLLING_HALF_WIDTH: usize = 50;

/// Empirical Kendall's tau over `t - half ..= t + half` (clipped to the
/// sample), for every `t`.
pub fn rolling_kendall(u: &[(f64, f64)], half: usize) -> Vec<f64> {
    (0..u.len())
        .map(|t| {
            let a = t.saturating_sub(half);
            let b = (t + half).min(u.len() - 1);
            kendall_tau(&u[a..=b])
        })
        .collect()
}

/// Per-draw transform of `(s_t, nu, p)` through `tanh` and the corner
/// coefficients, summarized for `t = 1..T`.
pub fn tail_trajectories(fit: &TwoStepFit) -> Result<Vec<TailPoint>> {
    let CopulaFit::Dynamic { draws: Some(draws), .. } = &fit.copula else {
        return domain("tail trajectories need a dynamic copula fit with stored draws");
    };
    if !draws.has_states() {
        return domain("copula fit stored no latent paths");
    }
    let n = draws.n_draws();
    let thin = draws.state_thin;
    let rows: Vec<usize> = (0..draws.n_state_draws())
        .map(|k| ((k + 1) * thin - 1).min(n - 1))
        .collect();
    let nu = draws
        .column("nu")
        .ok_or_else(|| Error::Invalid("no nu column".into()))?;
    let p = draws.column("p");
    let rolling = rolling_kendall(&fit.u_hat, ROLLING_HALF_WIDTH);
    let states = draws.state_rows();
    let mut out = Vec::with_capacity(fit.u_hat.len());
    let mut cols = vec![Vec::with_capacity(rows.len()); 5];
    for t in 1..=fit.u_hat.len() {
        cols.iter_mut().for_each(Vec::clear);
        for (k, &i) in rows.iter().enumerate() {
            let tau = states[k][t].tanh();
            let mp = MixtureParams {
                tau,
                nu: nu[i],
                p: p.map_or(1.0, |c| c[i]),
            };
            let td = copulas::tail_dependence(&mp, false)?;
            cols[0].push(tau);
            cols[1].push(td.lower);
            cols[2].push(td.upper);
            cols[3].push(td.upper_left);
            cols[4].push(td.lower_right);
        }
        out.push(TailPoint {
            t,
            tau: band(&cols[0])?,
            lower: band(&cols[1])?,
            upper: band(&cols[2])?,
            upper_left: band(&cols[3])?,
            lower_right: band(&cols[4])?,
            rolling_tau: rolling[t - 1],
        });
    }
    Ok(out)
}

/// One-step-ahead margin: frozen `(alpha, df)` and the forecast log
/// variance.
#[derive(Debug, Clone)]
pub struct MarginPredictive {
    pub dist: StdSkewT,
    pub s_hat: f64,
}

impl MarginPredictive {
    /// `(ssT(x), log sst(x) - s/2)` with `x = y exp(-s/2)`.
    pub fn eval(&self, y: f64) -> (f64, f64) {
        let x = y * (-0.5 * self.s_hat).exp();
        (self.dist.cdf(x), self.dist.logpdf(x) - 0.5 * self.s_hat)
    }
}

/// `f(y1, y2) = c(u1, u2) g(y1, y2)` with `g` the product of the margins.
#[derive(Debug, Clone)]
pub struct PredictiveDensity {
    pub margins: [MarginPredictive; 2],
    pub family: CopulaFamily,
    pub copula: CopulaParams,
}

impl PredictiveDensity {
    /// `(log c, log g)` at `(y1, y2)`.
    pub fn log_parts(&self, y1: f64, y2: f64) -> Result<(f64, f64)> {
        let (u1, g1) = self.margins[0].eval(y1);
        let (u2, g2) = self.margins[1].eval(y2);
        let c = copulas::logdensity(self.family, clip_unit(u1), clip_unit(u2), &self.copula)?;
        Ok((c, g1 + g2))
    }

    pub fn logpdf(&self, y1: f64, y2: f64) -> Result<f64> {
        let (c, g) = self.log_parts(y1, y2)?;
        Ok(c + g)
    }

    /// Tensor Gauss-Legendre integral of the density over the plane, with
    /// `y_j = e^{s_j/2} sinh(w_j)` and `|w_j| <= 10`.
    pub fn total_mass(&self) -> Result<f64> {
        let (w, wt) = composite_gauss_legendre(10, 80, -10.0, 10.0);
        let axis = |m: &MarginPredictive| -> (Vec<f64>, Vec<f64>) {
            w.iter()
                .zip(&wt)
                .map(|(&wi, &ai)| {
                    let x = wi.sinh();
                    let u = clip_unit(m.dist.cdf(x));
                    (u, ai * wi.cosh() * m.dist.pdf(x))
                })
                .unzip()
        };
        let (u1, a1) = axis(&self.margins[0]);
        let (u2, a2) = axis(&self.margins[1]);
        let mut total = 0.0;
        for i in 0..u1.len() {
            if a1[i] == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for j in 0..u2.len() {
                if a2[j] == 0.0 {
                    continue;
                }
                let c = copulas::logdensity(self.family, u1[i], u2[j], &self.copula)?.exp();
                row += a2[j] * c;
            }
            total += a1[i] * row;
        }
        Ok(total)
    }
}

/// Scores of one forecast step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastStep {
    pub k: usize,
    pub s_hat: [f64; 2],
    pub s_cop: Option<f64>,
    pub tau: f64,
    pub log_c: f64,
    pub log_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub entry: MenuEntry,
    pub steps: Vec<ForecastStep>,
    /// Cumulative pseudo log predictive score.
    pub lp: f64,
    pub lp_copula: f64,
    pub lp_margins: f64,
}

/// Training fits shared by the menu entries of a forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingFits {
    pub margins: [MarginFit; 2],
    pub u_hat: Vec<(f64, f64)>,
    pub copulas: Vec<(MenuEntry, CopulaFit)>,
}

pub fn fit_training(y_train: &[(f64, f64)], entries: &[MenuEntry], cfg: &PipelineConfig) -> Result<TrainingFits> {
    let (margins, u_hat) = fit_margins(y_train, cfg)?;
    let copulas = entries
        .iter()
        .map(|&e| Ok((e, fit_copula(&u_hat, e, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingFits {
        margins,
        u_hat,
        copulas,
    })
}

/// One latent-only refit on a window with frozen parameters. Returns the
/// posterior-mode path (`s_0..s_n` of the window) and the final state.
fn latent_refit<M: crate::engine::ObservationModel>(
    model: &mut M,
    ar1: Ar1Params,
    init: Vec<f64>,
    cfg: &PipelineConfig,
    stream: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut chain = ChainConfig::new(cfg.spec, cfg.test_iter, cfg.test_burn, cfg.seed);
    chain.priors = cfg.priors;
    chain.stream = stream;
    chain.update_params = false;
    chain.store_states = true;
    chain.state_thin = cfg.thin(cfg.test_iter - cfg.test_burn);
    chain.init = Some(ChainState { params: ar1, s: init });
    let run = run_chain_full(model, &chain)?;
    let modes = (0..run.draws.state_len())
        .map(|t| posterior_mode(&run.draws.state_column(t)))
        .collect::<Result<Vec<_>>>()?;
    Ok((modes, run.final_state.s))
}

fn shift_forward(prev: &[f64], p: &Ar1Params) -> Vec<f64> {
    let mut s = prev[1..].to_vec();
    let last = *prev.last().unwrap();
    s.push(p.mu + p.phi * (last - p.mu));
    s
}

fn ar1_step(p: &Ar1Params, s: f64) -> f64 {
    p.mu + p.phi * (s - p.mu)
}

/// Rolling forecast of several menu entries over `y[t_train..]` given
/// training fits on `y[..t_train]`. Margin refits are shared by all
/// entries. `fits` is never modified.
pub fn rolling_forecast_with(
    y: &[(f64, f64)],
    t_train: usize,
    fits: &TrainingFits,
    cfg: &PipelineConfig,
) -> Result<Vec<ForecastResult>> {
    check_returns(y)?;
    cfg.validate()?;
    let w = cfg.window;
    if t_train < w {
        return domain(format!("training length {t_train} is shorter than the window {w}"));
    }
    if y.len() < t_train {
        return domain("fewer rows than the training length");
    }
    let k_max = y.len() - t_train;
    let dists = [fits.margins[0].dist()?, fits.margins[1].dist()?];
    let ys = [column(y, 0), column(y, 1)];
    let mut results: Vec<ForecastResult> = fits
        .copulas
        .iter()
        .map(|(e, _)| ForecastResult {
            entry: *e,
            steps: Vec::with_capacity(k_max),
            lp: 0.0,
            lp_copula: 0.0,
            lp_margins: 0.0,
        })
        .collect();
    // Warm starts: window k covers rows start..start+w with
    // start = t_train + k - 1 - w (0-based), i.e. path indices start..=start+w.
    let start1 = t_train - w;
    let mut margin_state: Vec<Vec<f64>> = fits
        .margins
        .iter()
        .map(|m| m.mode_path()[start1..=t_train].to_vec())
        .collect();
    let mut cop_state: Vec<Option<Vec<f64>>> = fits
        .copulas
        .iter()
        .map(|(_, c)| c.mode_path().map(|p| p[start1..=t_train].to_vec()))
        .collect();
    for k in 1..=k_max {
        let start = t_train + k - 1 - w;
        let end = start + w;
        let refit = |j: usize| -> Result<(Vec<f64>, Vec<f64>)> {
            let m = &fits.margins[j];
            let mut model = SkewTSvModel::new(ys[j][start..end].to_vec(), m.alpha, m.df)?;
            let init = if k == 1 {
                margin_state[j].clone()
            } else {
                shift_forward(&margin_state[j], &m.ar1)
            };
            latent_refit(
                &mut model,
                m.ar1,
                init,
                cfg,
                rng::stream_id(&format!("forecast/margin{j}"), k as u64),
            )
        };
        let (r0, r1) = rayon::join(|| refit(0), || refit(1));
        let margin_runs = [r0?, r1?];
        let mut s_hat = [0.0; 2];
        let mut u_win = Vec::with_capacity(2);
        for j in 0..2 {
            let (modes, last) = &margin_runs[j];
            margin_state[j] = last.clone();
            s_hat[j] = ar1_step(&fits.margins[j].ar1, modes[w]);
            u_win.push(pit(&ys[j][start..end], &modes[1..], &dists[j]));
        }
        let u_window = pair_up(u_win.swap_remove(0), u_win.swap_remove(0));
        let margins = [
            MarginPredictive {
                dist: dists[0].clone(),
                s_hat: s_hat[0],
            },
            MarginPredictive {
                dist: dists[1].clone(),
                s_hat: s_hat[1],
            },
        ];
        let obs = y[t_train + k - 1];
        for (ci, (entry, cfit)) in fits.copulas.iter().enumerate() {
            let family = entry.family();
            let (tau, s_cop) = match cfit {
                CopulaFit::Constant { tau, .. } => (*tau, None),
                CopulaFit::Dynamic { ar1, nu, p, .. } => {
                    let prev = cop_state[ci].as_ref().expect("dynamic fit has a path");
                    let init = if k == 1 { prev.clone() } else { shift_forward(prev, ar1) };
                    let mut model =
                        DynCopulaModel::new(family, &u_window, *nu, if family.is_mixture() { *p } else { 0.5 })?;
                    let stream = rng::stream_id(&format!("forecast/copula/{}", entry.id()), k as u64);
                    let (modes, last) = latent_refit(&mut model, *ar1, init, cfg, stream)?;
                    cop_state[ci] = Some(last);
                    let s = ar1_step(ar1, modes[w]);
                    (s.tanh(), Some(s))
                }
            };
            let pd = PredictiveDensity {
                margins: margins.clone(),
                family,
                copula: CopulaParams {
                    tau,
                    nu: cfit.nu(),
                    p: cfit.p(),
                },
            };
            let (log_c, log_g) = pd.log_parts(obs.0, obs.1)?;
            if !(log_c.is_finite() && log_g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "{}: non-finite predictive density at k = {k} (log c = {log_c}, log g = {log_g})",
                    entry.id()
                )));
            }
            let r = &mut results[ci];
            r.steps.push(ForecastStep {
                k,
                s_hat,
                s_cop,
                tau,
                log_c,
                log_g,
            });
            r.lp_copula += log_c;
            r.lp_margins += log_g;
            r.lp += log_c + log_g;
        }
    }
    Ok(results)
}

/// Train on `y[..t_train]`, then score every entry over the remaining rows.
pub fn rolling_forecast_menu(
    y: &[(f64, f64)],
    t_train: usize,
    entries: &[MenuEntry],
    cfg: &PipelineConfig,
) -> Result<(TrainingFits, Vec<ForecastResult>)> {
    check_returns(y)?;
    if y.len() < t_train {
        return domain("fewer rows than the training length");
    }
    let fits = fit_training(&y[..t_train], entries, cfg)?;
    let res = rolling_forecast_with(y, t_train, &fits, cfg)?;
    Ok((fits, res))
}

/// Single-entry form of [`rolling_forecast_menu`].
pub fn rolling_forecast(
    y: &[(f64, f64)],
    t_train: usize,
    entry: MenuEntry,
    cfg: &PipelineConfig,
) -> Result<ForecastResult> {
    let (_, mut r) = rolling_forecast_menu(y, t_train, &[entry], cfg)?;
    Ok(r.remove(0))
}

/// Predictive density of `entry` at step `k` of a finished forecast.
pub fn predictive_at(fits: &TrainingFits, result: &ForecastResult, k: usize) -> Result<PredictiveDensity> {
    let step = result
        .steps
        .iter()
        .find(|s| s.k == k)
        .ok_or_else(|| Error::Invalid(format!("no forecast step {k}")))?;
    let (_, cfit) = fits
        .copulas
        .iter()
        .find(|(e, _)| *e == result.entry)
        .ok_or_else(|| Error::Invalid("entry not in training fits".into()))?;
    Ok(PredictiveDensity {
        margins: [
            MarginPredictive {
                dist: fits.margins[0].dist()?,
                s_hat: step.s_hat[0],
            },
            MarginPredictive {
                dist: fits.margins[1].dist()?,
                s_hat: step.s_hat[1],
            },
        ],
        family: result.entry.family(),
        copula: CopulaParams {
            tau: step.tau,
            nu: cfit.nu(),
            p: cfit.p(),
        },
    })
}

/// Parameters of one simulated SV margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginTruth {
    pub ar1: Ar1Params,
    pub alpha: f64,
    pub df: f64,
}

/// Parameters of the full bivariate model: two SV margins joined by a
/// dynamic copula with `tau_t = tanh(s_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullModelTruth {
    pub margins: [MarginTruth; 2],
    pub family: CopulaFamily,
    pub copula: Ar1Params,
    pub nu: f64,
    pub p: f64,
}

impl FullModelTruth {
    /// A stock index / volatility index pair of typical magnitude joined by
    /// the mixture copula with strongly negative dependence.
    pub fn typical() -> Self {
        FullModelTruth {
            margins: [
                MarginTruth {
                    ar1: Ar1Params {
                        mu: -9.32,
                        phi: 0.99,
                        sigma: 0.15,
                    },
                    alpha: -0.51,
                    df: 6.84,
                },
                MarginTruth {
                    ar1: Ar1Params {
                        mu: -5.65,
                        phi: 0.90,
                        sigma: 0.36,
                    },
                    alpha: 1.33,
                    df: 9.30,
                },
            ],
            family: CopulaFamily::Mixture,
            copula: Ar1Params {
                mu: -0.74,
                phi: 0.94,
                sigma: 0.05,
            },
            nu: 9.03,
            p: 0.29,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedReturns {
    pub y: Vec<(f64, f64)>,
    pub u: Vec<(f64, f64)>,
    /// Latent paths `s_0..s_T` of the two margins and the copula.
    pub s_margins: [Vec<f64>; 2],
    pub s_copula: Vec<f64>,
}

/// Simulate `y_t = exp(s_t / 2) eps_t` with standardized skew-t errors.
/// Returns the returns and the latent path `s_0..s_T`.
pub fn simulate_sv(truth: &MarginTruth, t_len: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    truth.ar1.validate()?;
    let d = StdSkewT::new(truth.alpha, truth.df)?;
    let mut r = rng::stream(seed, rng::stream_id("sv", 0));
    let s = simulate_path(&truth.ar1, t_len, &mut r);
    let y = s[1..]
        .iter()
        .map(|&st| Ok((0.5 * st).exp() * d.quantile(rand::Rng::random::<f64>(&mut r).clamp(1e-15, 1.0 - 1e-15))?))
        .collect::<Result<Vec<_>>>()?;
    Ok((y, s))
}

pub fn simulate_full_model(truth: &FullModelTruth, t_len: usize, seed: u64) -> Result<SimulatedReturns> {
    let mut r = rng::stream(seed, rng::stream_id("full-model", 0));
    for m in &truth.margins {
        m.ar1.validate()?;
    }
    truth.copula.validate()?;
    let s1 = simulate_path(&truth.margins[0].ar1, t_len, &mut r);
    let s2 = simulate_path(&truth.margins[1].ar1, t_len, &mut r);
    let sc = simulate_path(&truth.copula, t_len, &mut r);
    let d = [
        StdSkewT::new(truth.margins[0].alpha, truth.margins[0].df)?,
        StdSkewT::new(truth.margins[1].alpha, truth.margins[1].df)?,
    ];
    let mut y = Vec::with_capacity(t_len);
    let mut u = Vec::with_capacity(t_len);
    for t in 1..=t_len {
        let params = CopulaParams {
            tau: sc[t].tanh(),
            nu: truth.nu,
            p: truth.p,
        };
        let ((u1, u2), _) = sample_one_tagged(truth.family, &params, &mut r)?;
        let e1 = d[0].quantile(u1)?;
        let e2 = d[1].quantile(u2)?;
        y.push(((0.5 * s1[t]).exp() * e1, (0.5 * s2[t]).exp() * e2));
        u.push((u1, u2));
    }
    Ok(SimulatedReturns {
        y,
        u,
        s_margins: [s1, s2],
        s_copula: sc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_cfg() -> PipelineConfig {
        PipelineConfig {
            train_iter: 1200,
            train_burn: 400,
            test_iter: 300,
            test_burn: 100,
            window: 30,
            max_state_draws: 200,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn menu_ids_round_trip() {
        for e in MenuEntry::ALL {
            assert_eq!(MenuEntry::parse(e.id()).unwrap(), e);
        }
        assert!(MenuEntry::parse("dcc").is_err());
    }

    #[test]
    fn short_series_rejected() {
        let y = vec![(0.01, -0.02); 50];
        assert!(fit_two_step(&y, MenuEntry::DynMix, &fast_cfg()).is_err());
        let mut y = vec![(0.01, -0.02); 300];
        y[7].1 = f64::NAN;
        assert!(fit_margins(&y, &fast_cfg()).is_err());
    }

    #[test]
    fn empty_test_period_scores_zero() {
        let sim = simulate_full_model(&FullModelTruth::typical(), 200, 3).unwrap();
        let fits = TrainingFits {
            margins: [
                MarginFit {
                    summaries: BTreeMap::new(),
                    ar1: FullModelTruth::typical().margins[0].ar1,
                    alpha: -0.5,
                    df: 7.0,
                    path: vec![
                        Band {
                            mode: -9.3,
                            q05: -9.3,
                            q95: -9.3
                        };
                        201
                    ],
                },
                MarginFit {
                    summaries: BTreeMap::new(),
                    ar1: FullModelTruth::typical().margins[1].ar1,
                    alpha: 1.3,
                    df: 9.0,
                    path: vec![
                        Band {
                            mode: -5.6,
                            q05: -5.6,
                            q95: -5.6
                        };
                        201
                    ],
                },
            ],
            u_hat: sim.u.clone(),
            copulas: vec![(
                MenuEntry::ConstT,
                CopulaFit::Constant {
                    summaries: BTreeMap::new(),
                    tau: -0.6,
                    nu: 8.0,
                    p: 1.0,
                },
            )],
        };
        let r = rolling_forecast_with(&sim.y, 200, &fits, &fast_cfg()).unwrap();
        assert_eq!(r[0].lp, 0.0);
        assert!(r[0].steps.is_empty());
    }

    fn predictive(family: CopulaFamily, tau: f64) -> PredictiveDensity {
        PredictiveDensity {
            margins: [
                MarginPredictive {
                    dist: StdSkewT::new(-0.51, 6.84).unwrap(),
                    s_hat: -9.0,
                },
                MarginPredictive {
                    dist: StdSkewT::new(1.33, 9.3).unwrap(),
                    s_hat: -5.5,
                },
            ],
            family,
            copula: CopulaParams { tau, nu: 9.0, p: 0.3 },
        }
    }

    #[test]
    fn independence_copula_factorizes() {
        let pd = predictive(CopulaFamily::Gaussian, 0.0);
        let (c, g) = pd.log_parts(0.01, -0.05).unwrap();
        assert!(c.abs() < 1e-12);
        let x1 = 0.01 * 4.5f64.exp();
        let x2 = -0.05 * 2.75f64.exp();
        let want = pd.margins[0].dist.logpdf(x1) + 4.5 + pd.margins[1].dist.logpdf(x2) + 2.75;
        assert!((g - want).abs() < 1e-12);
    }

    #[test]
    fn predictive_density_normalizes() {
        for (fam, tau) in [
            (CopulaFamily::Mixture, -0.6),
            (CopulaFamily::StudentT, 0.3),
            (CopulaFamily::Gaussian, 0.0),
        ] {
            let m = predictive(fam, tau).total_mass().unwrap();
            assert!((m - 1.0).abs() < 1e-3, "{fam:?}: {m}");
        }
    }

    #[test]
    fn rolling_kendall_window() {
        let u: Vec<(f64, f64)> = (0..20)
            .map(|i| (i as f64 / 20.0 + 0.01, i as f64 / 20.0 + 0.02))
            .collect();
        assert!(rolling_kendall(&u, 3).iter().all(|&t| (t - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_step_smoke_and_tails() {
        let sim = simulate_full_model(&FullModelTruth::typical(), 200, 5).unwrap();
        let fit = fit_two_step(&sim.y, MenuEntry::DynMix, &fast_cfg()).unwrap();
        assert_eq!(fit.u_hat.len(), 200);
        assert!(fit.u_hat.iter().all(|&(a, b)| a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0));
        assert_eq!(fit.margins[0].path.len(), 201);
        let tails = tail_trajectories(&fit).unwrap();
        assert_eq!(tails.len(), 200);
        for tp in &tails {
            assert!(tp.tau.q05 <= tp.tau.q95);
            assert!((0.0..=1.0).contains(&tp.upper_left.mode));
        }
    }
}
