use interweave_core::diagnostics::{effective_sample_size, sample_variance};
use interweave_core::engine::{innovations_to_path, path_to_innovations, Chain};
use interweave_core::simstudy::{simulate_dgp, Dgp};
use interweave_core::{
    ar1, rng, run_chain, Ar1Params, BlockSize, ChainConfig, ChainState, CopulaFamily, DynCopulaModel, ObservationModel,
    PriorHyper, SamplerSpec,
};
use proptest::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF, Normal};

struct Flat(usize);

impl ObservationModel for Flat {
    fn n_obs(&self) -> usize {
        self.0
    }
    fn loglik_t(&self, _t: usize, _s: f64) -> f64 {
        0.0
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Fraction of draws below the prior `q` quantile, tested against `q` with
/// the effective sample size of the indicator series.
fn check_below(x: &[f64], quantile: impl Fn(f64) -> f64, what: &str) {
    for q in [0.05, 0.1, 0.5, 0.9, 0.95] {
        let cut = quantile(q);
        let ind: Vec<f64> = x.iter().map(|&v| if v < cut { 1.0 } else { 0.0 }).collect();
        let frac = mean(&ind);
        let n_eff = effective_sample_size(&ind).unwrap();
        let tol = 4.0 * (q * (1.0 - q) / n_eff).sqrt();
        assert!(
            (frac - q).abs() < tol,
            "{what}: P(x < Q({q})) = {frac}, tolerance {tol}, ESS {n_eff}"
        );
    }
}

#[test]
fn flat_likelihood_recovers_the_prior() {
    let priors = PriorHyper {
        sigma_mu: 1.0,
        ..PriorHyper::default()
    };
    let beta = Beta::new(priors.a_phi, priors.b_phi).unwrap();
    let std = Normal::new(0.0, 1.0).unwrap();
    let t_len = 20;
    for spec in [
        SamplerSpec::new(BlockSize::Fixed(5), true),
        SamplerSpec::new(BlockSize::Whole, true),
        SamplerSpec::new(BlockSize::Fixed(1), false),
    ] {
        let mut cfg = ChainConfig::new(spec, 80_000, 2_000, 7);
        cfg.priors = priors;
        cfg.store_states = true;
        let d = run_chain(&mut Flat(t_len), &cfg).unwrap();
        let label = spec.label();
        let phi = d.column("phi").unwrap();
        let sigma = d.column("sigma").unwrap();
        let mu = d.column("mu").unwrap();
        assert!(phi.iter().all(|p| p.abs() < 1.0) && sigma.iter().all(|&s| s > 0.0));
        check_below(mu, |q| priors.sigma_mu * std.inverse_cdf(q), &format!("{label} mu"));
        check_below(phi, |q| 2.0 * beta.inverse_cdf(q) - 1.0, &format!("{label} phi"));
        check_below(
            sigma,
            |q| priors.b_sigma.sqrt() * std.inverse_cdf(0.5 * (1.0 + q)),
            &format!("{label} sigma"),
        );
        // s_t - mu is symmetric about zero under the prior
        let centred: Vec<f64> = d.state_column(t_len / 2).iter().zip(mu).map(|(s, m)| s - m).collect();
        let below = centred.iter().filter(|&&v| v < 0.0).count() as f64 / centred.len() as f64;
        let ind: Vec<f64> = centred.iter().map(|&v| if v < 0.0 { 1.0 } else { 0.0 }).collect();
        let tol = 4.0 * (0.25 / effective_sample_size(&ind).unwrap()).sqrt();
        assert!((below - 0.5).abs() < tol, "{label} s_t: {below}");
    }
}

/// Log posterior of `(mu, phi, sigma)` given a fixed path, on the
/// `sigma` scale.
fn step_b_target(p: &PriorHyper, s: &[f64], mu: f64, phi: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let v0 = s2 / (1.0 - phi * phi);
    let mut lp = -0.5 * v0.ln() - 0.5 * (s[0] - mu).powi(2) / v0;
    let mut rss = 0.0;
    for t in 1..s.len() {
        rss += (s[t] - mu - phi * (s[t - 1] - mu)).powi(2);
    }
    lp += -((s.len() - 1) as f64) * sigma.ln() - 0.5 * rss / s2;
    lp += -0.5 * (mu / p.sigma_mu).powi(2);
    let x = 0.5 * (phi + 1.0);
    lp += (p.a_phi - 1.0) * x.ln() + (p.b_phi - 1.0) * (1.0 - x).ln();
    // Gamma(1/2, rate) on sigma^2 with Jacobian 2 sigma
    let rate = 1.0 / (2.0 * p.b_sigma);
    lp += -0.5 * s2.ln() - rate * s2 + sigma.ln();
    lp
}

/// Midpoint grid over a box: the three axes and normalized cell weights,
/// indexed `(i * n + j) * n + k`.
fn grid_posterior(p: &PriorHyper, s: &[f64], bounds: [(f64, f64); 3], n: usize) -> ([Vec<f64>; 3], Vec<f64>) {
    let axis =
        |(lo, hi): (f64, f64)| -> Vec<f64> { (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect() };
    let axes = bounds.map(axis);
    let mut logw = Vec::with_capacity(n * n * n);
    for &m in &axes[0] {
        for &f in &axes[1] {
            for &g in &axes[2] {
                logw.push(step_b_target(p, s, m, f, g));
            }
        }
    }
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    (axes, w.into_iter().map(|v| v / total).collect())
}

/// Marginal cell masses of each coordinate.
fn grid_marginals(w: &[f64], n: usize) -> [Vec<f64>; 3] {
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let wt = w[(i * n + j) * n + k];
                out[0][i] += wt;
                out[1][j] += wt;
                out[2][k] += wt;
            }
        }
    }
    out
}

/// Posterior mean and sd of each coordinate by a midpoint rule on a box.
fn grid_moments(p: &PriorHyper, s: &[f64], bounds: [(f64, f64); 3], n: usize) -> [(f64, f64); 3] {
    let (axes, w) = grid_posterior(p, s, bounds, n);
    let marg = grid_marginals(&w, n);
    [0, 1, 2].map(|d| {
        let m1: f64 = axes[d].iter().zip(&marg[d]).map(|(v, w)| v * w).sum();
        let m2: f64 = axes[d].iter().zip(&marg[d]).map(|(v, w)| v * v * w).sum();
        (m1, (m2 - m1 * m1).sqrt())
    })
}

/// Box of mean +- 7 sd around a coarse pass, kept inside the support.
fn fine_box(p: &PriorHyper, s: &[f64]) -> [(f64, f64); 3] {
    let coarse = grid_moments(p, s, [(-3.0, 4.0), (-0.99, 0.999), (0.02, 1.0)], 80);
    let b = coarse.map(|(m, sd)| (m - 7.0 * sd, m + 7.0 * sd));
    [
        b[0],
        (b[1].0.max(-0.9999), b[1].1.min(0.9999)),
        (b[2].0.max(1e-3), b[2].1),
    ]
}

/// Draws of `(mu, phi, sigma)` from repeated step b on a fixed path.
fn step_b_draws(truth: Ar1Params, s: &[f64], draws: usize, seed: u64) -> [Vec<f64>; 3] {
    let mut cfg = ChainConfig::new(SamplerSpec::new(BlockSize::Fixed(5), true), 10, 0, seed);
    cfg.init = Some(ChainState {
        params: truth,
        s: s.to_vec(),
    });
    let mut model = Flat(s.len() - 1);
    let mut chain = Chain::new(&mut model, cfg).unwrap();
    let mut cols = [
        Vec::with_capacity(draws),
        Vec::with_capacity(draws),
        Vec::with_capacity(draws),
    ];
    for _ in 0..draws {
        chain.step_b();
        let p = chain.params();
        cols[0].push(p.mu);
        cols[1].push(p.phi);
        cols[2].push(p.sigma);
    }
    assert_eq!(chain.path(), s);
    cols
}

#[test]
fn step_b_matches_grid_posterior() {
    let truth = Ar1Params {
        mu: 0.5,
        phi: 0.8,
        sigma: 0.3,
    };
    let t_len = 200;
    let s = ar1::simulate_path(&truth, t_len, &mut rng::stream(21, 0));
    let priors = PriorHyper::default();
    let mom = grid_moments(&priors, &s, fine_box(&priors, &s), 80);
    let cols = step_b_draws(truth, &s, 60_000, 4);
    for (d, name) in ["mu", "phi", "sigma"].iter().enumerate() {
        let x = &cols[d][1000..];
        let (want_mean, want_sd) = mom[d];
        let n_eff = effective_sample_size(x).unwrap();
        let got = mean(x);
        assert!(
            (got - want_mean).abs() < 4.0 * want_sd / n_eff.sqrt(),
            "{name}: mean {got} vs {want_mean}"
        );
        let got_sd = sample_variance(x).sqrt();
        assert!(
            (got_sd / want_sd - 1.0).abs() < 0.05,
            "{name}: sd {got_sd} vs {want_sd}"
        );
    }
}

#[test]
fn step_b_histograms_match_grid_on_a_short_path() {
    let truth = Ar1Params {
        mu: 0.0,
        phi: 0.7,
        sigma: 0.5,
    };
    let s = ar1::simulate_path(&truth, 50, &mut rng::stream(22, 0));
    let priors = PriorHyper::default();
    let bounds = fine_box(&priors, &s);
    let n = 80;
    let (_, w) = grid_posterior(&priors, &s, bounds, n);
    let marg = grid_marginals(&w, n);
    let cols = step_b_draws(truth, &s, 60_000, 5);
    // 20 bins per axis, each pooling 4 grid cells.
    let bins = 20;
    for (d, name) in ["mu", "phi", "sigma"].iter().enumerate() {
        let (lo, hi) = bounds[d];
        let x = &cols[d][1000..];
        let mut hist = vec![0.0; bins];
        for &v in x {
            let b = ((v - lo) / (hi - lo) * bins as f64).floor();
            if b >= 0.0 && (b as usize) < bins {
                hist[b as usize] += 1.0 / x.len() as f64;
            }
        }
        let tv: f64 = 0.5
            * (0..bins)
                .map(|b| (hist[b] - marg[d][b * n / bins..(b + 1) * n / bins].iter().sum::<f64>()).abs())
                .sum::<f64>();
        let outside = 1.0 - hist.iter().sum::<f64>();
        assert!(
            tv + 0.5 * outside < 0.1,
            "{name}: total variation {tv}, mass outside box {outside}"
        );
    }
}

#[test]
fn step_b_recovers_mu_on_a_long_path() {
    let truth = Ar1Params {
        mu: 1.0,
        phi: 0.9,
        sigma: 0.3,
    };
    let s = ar1::simulate_path(&truth, 2000, &mut rng::stream(23, 0));
    let cols = step_b_draws(truth, &s, 5000, 6);
    let mu = &cols[0][500..];
    let (m, sd) = (mean(mu), sample_variance(mu).sqrt());
    assert!((m - truth.mu).abs() < 3.0 * sd, "posterior mean {m}, sd {sd}");
}

#[test]
fn fixed_parameters_give_the_joint_path_law() {
    let truth = Ar1Params {
        mu: 0.5,
        phi: 0.8,
        sigma: 0.3,
    };
    let t_len = 20;
    let mut cfg = ChainConfig::new(SamplerSpec::new(BlockSize::Fixed(5), true), 40_000, 1_000, 8);
    cfg.update_params = false;
    cfg.store_states = true;
    cfg.init = Some(ChainState {
        params: truth,
        s: vec![truth.mu; t_len + 1],
    });
    let d = run_chain(&mut Flat(t_len), &cfg).unwrap();
    assert!(d.column("mu").unwrap().iter().all(|&m| m == truth.mu));
    let m = ar1::joint_moments(&truth, t_len).unwrap();
    for t in [0, 1, 5, 6, 10, 20] {
        let x = &d.state_column(t);
        let n_eff = effective_sample_size(x).unwrap();
        let v = m.cov_at(t, t);
        let got = mean(x);
        assert!((got - truth.mu).abs() < 4.0 * (v / n_eff).sqrt(), "s_{t} mean {got}");
        let sq: Vec<f64> = x.iter().map(|a| (a - truth.mu).powi(2)).collect();
        let got_v = mean(&sq);
        let tol = 4.0 * (sample_variance(&sq) / effective_sample_size(&sq).unwrap()).sqrt();
        assert!((got_v - v).abs() < tol, "s_{t} variance {got_v} vs {v}");
    }
    // Across a block boundary.
    let (a, b) = (d.state_column(5), d.state_column(6));
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - truth.mu) * (y - truth.mu)).collect();
    let tol = 4.0 * (sample_variance(&prod) / effective_sample_size(&prod).unwrap()).sqrt();
    assert!(
        (mean(&prod) - m.cov_at(5, 6)).abs() < tol,
        "cov(s_5, s_6) {} vs {}",
        mean(&prod),
        m.cov_at(5, 6)
    );
}

#[test]
fn interweaving_costs_extra_time() {
    let data = simulate_dgp(&Dgp {
        family: CopulaFamily::Gaussian,
        t_len: 500,
        mu: 0.0,
        phi: 0.9,
        sigma: 0.2,
        seed: 6,
    })
    .unwrap();
    let time = |interweave: bool| {
        (0..3)
            .map(|rep| {
                let mut model = DynCopulaModel::new(CopulaFamily::Gaussian, &data.u, f64::NAN, f64::NAN).unwrap();
                let cfg = ChainConfig::new(SamplerSpec::new(BlockSize::Fixed(5), interweave), 1500, 500, 30 + rep);
                run_chain(&mut model, &cfg).unwrap().runtime_secs
            })
            .fold(f64::INFINITY, f64::min)
    };
    let (with, without) = (time(true), time(false));
    assert!(with > without, "(5,I) {with}s vs (5,NI) {without}s");
}

#[test]
fn interweaving_does_not_change_the_posterior() {
    let dgp = Dgp {
        family: CopulaFamily::Gaussian,
        t_len: 300,
        mu: 0.0,
        phi: 0.9,
        sigma: 0.2,
        seed: 5,
    };
    let data = simulate_dgp(&dgp).unwrap();
    let mut summaries = Vec::new();
    for interweave in [true, false] {
        let mut model = DynCopulaModel::new(CopulaFamily::Gaussian, &data.u, f64::NAN, f64::NAN).unwrap();
        let cfg = ChainConfig::new(SamplerSpec::new(BlockSize::Fixed(5), interweave), 30_000, 2_000, 12);
        let d = run_chain(&mut model, &cfg).unwrap();
        let mut row = Vec::new();
        for name in ["mu", "phi", "sigma"] {
            let x = d.column(name).unwrap();
            assert!(match name {
                "phi" => x.iter().all(|p| p.abs() < 1.0),
                "sigma" => x.iter().all(|&s| s > 0.0),
                _ => true,
            });
            row.push((mean(x), sample_variance(x) / effective_sample_size(x).unwrap()));
        }
        summaries.push(row);
    }
    for (k, name) in ["mu", "phi", "sigma"].iter().enumerate() {
        let (m1, v1) = summaries[0][k];
        let (m2, v2) = summaries[1][k];
        assert!((m1 - m2).abs() < 4.0 * (v1 + v2).sqrt(), "{name}: {m1} vs {m2}");
    }
}

proptest! {
    #[test]
    fn innovations_round_trip(mu in -5.0..5.0f64, phi in -0.99..0.99f64, sigma in 0.01..3.0f64, t in 1usize..300, seed in any::<u64>()) {
        let p = Ar1Params { mu, phi, sigma };
        let s = ar1::simulate_path(&p, t, &mut rng::stream(seed, 2));
        let mut e = vec![0.0; t];
        path_to_innovations(&p, &s, &mut e);
        let mut back = vec![0.0; t + 1];
        back[0] = s[0];
        innovations_to_path(&p, &e, &mut back);
        let scale = s.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (a, b) in s.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-10 * scale);
        }
    }
}
