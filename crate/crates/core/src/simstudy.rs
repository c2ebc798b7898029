//! Simulation study: data-generating processes from the dynamic copula
//! model, the sampler-specification grid, and efficiency aggregation.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ar1::{simulate_path, Ar1Params};
use crate::copulas::{sample_one_tagged, CopulaFamily, CopulaParams};
use crate::diagnostics::{aesr_table, AesrTables, EfficiencySummary, RunRecord, STATE_MEAN, STATE_MIN};
use crate::engine::{run_chain, BlockSize, ChainConfig, PriorHyper, SamplerSpec};
use crate::error::{domain, Error, Result};
use crate::obsmodels::DynCopulaModel;
use crate::rng;

pub const GRID_FAMILIES: [CopulaFamily; 2] = [CopulaFamily::Gaussian, CopulaFamily::ExtClayton];
pub const GRID_T: [usize; 3] = [500, 1000, 1500];
pub const GRID_MU: [f64; 2] = [0.0, 1.0];
pub const GRID_PHI: [f64; 5] = [0.0, 0.1, 0.5, 0.9, 0.99];
pub const GRID_SIGMA: [f64; 3] = [0.05, 0.1, 0.2];

/// Parameters reported in the efficiency tables.
pub const TABLE_PARAMS: [&str; 5] = ["mu", "phi", "sigma", STATE_MEAN, STATE_MIN];

/// One data-generating process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dgp {
    pub family: CopulaFamily,
    pub t_len: usize,
    pub mu: f64,
    pub phi: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Dgp {
    pub fn params(&self) -> Result<Ar1Params> {
        Ar1Params::new(self.mu, self.phi, self.sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.family, CopulaFamily::Gaussian | CopulaFamily::ExtClayton) {
            return domain(format!(
                "grid family must be Gaussian or ExtClayton, got {}",
                self.family.name()
            ));
        }
        if self.t_len == 0 {
            return domain("T must be positive");
        }
        self.params()?;
        Ok(())
    }

    /// Identifier independent of the seed.
    pub fn key(&self) -> String {
        format!(
            "{}/T{}/mu{}/phi{}/sigma{}",
            self.family.name(),
            self.t_len,
            self.mu,
            self.phi,
            self.sigma
        )
    }

    /// Grid group used for the mAESR minimum (DGPs sharing `T`).
    pub fn group(&self) -> String {
        format!("T={}", self.t_len)
    }

    pub fn with_seed(&self, seed: u64) -> Dgp {
        Dgp { seed, ..*self }
    }

    pub fn on_grid(&self) -> bool {
        GRID_FAMILIES.contains(&self.family)
            && GRID_T.contains(&self.t_len)
            && GRID_MU.contains(&self.mu)
            && GRID_PHI.contains(&self.phi)
            && GRID_SIGMA.contains(&self.sigma)
    }
}

/// All 180 grid cells, in family, T, mu, phi, sigma order.
pub fn full_grid(seed: u64) -> Vec<Dgp> {
    let mut out = Vec::with_capacity(180);
    for &family in &GRID_FAMILIES {
        for &t_len in &GRID_T {
            for &mu in &GRID_MU {
                for &phi in &GRID_PHI {
                    for &sigma in &GRID_SIGMA {
                        out.push(Dgp {
                            family,
                            t_len,
                            mu,
                            phi,
                            sigma,
                            seed,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Simulated copula data with the latent path that generated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedData {
    pub u: Vec<(f64, f64)>,
    /// `s_0..s_T`.
    pub s: Vec<f64>,
}

/// Draw `s_{0:T}` from the stationary AR(1) law and one pair per `t` from
/// the copula with `tau_t = tanh(s_t)`.
pub fn simulate_dgp(dgp: &Dgp) -> Result<SimulatedData> {
    dgp.validate()?;
    let mut r = rng::stream(dgp.seed, rng::stream_id("dgp", 0));
    let s = simulate_path(&dgp.params()?, dgp.t_len, &mut r);
    let u = s[1..]
        .iter()
        .map(|&st| {
            let tau = st.tanh().clamp(-1.0 + 1e-12, 1.0 - 1e-12);
            sample_one_tagged(dgp.family, &CopulaParams::tau(tau), &mut r).map(|x| x.0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulatedData { u, s })
}

/// Settings of a grid run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub dgps: Vec<Dgp>,
    pub specs: Vec<SamplerSpec>,
    pub n_iter: usize,
    pub burn_in: usize,
    pub replicates: usize,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    pub master_seed: u64,
    pub priors: PriorHyper,
}

impl GridConfig {
    /// 12 DGPs x 4 specs x 5 replicates at T = 500 with 10000 iterations.
    pub fn desk(master_seed: u64) -> Self {
        let mut dgps = Vec::new();
        for &family in &GRID_FAMILIES {
            for &phi in &[0.5, 0.9, 0.99] {
                for &sigma in &[0.1, 0.2] {
                    dgps.push(Dgp {
                        family,
                        t_len: 500,
                        mu: 0.0,
                        phi,
                        sigma,
                        seed: master_seed,
                    });
                }
            }
        }
        GridConfig {
            dgps,
            specs: vec![
                SamplerSpec::new(BlockSize::Fixed(5), true),
                SamplerSpec::new(BlockSize::Fixed(5), false),
                SamplerSpec::new(BlockSize::Whole, true),
                SamplerSpec::new(BlockSize::Whole, false),
            ],
            n_iter: 10_000,
            burn_in: 2_000,
            replicates: 5,
            workers: 0,
            master_seed,
            priors: PriorHyper::default(),
        }
    }

    /// The full grid with the ten sampler specifications.
    pub fn full(master_seed: u64) -> Self {
        let mut specs = Vec::new();
        for b in [
            BlockSize::Fixed(1),
            BlockSize::Fixed(5),
            BlockSize::Fixed(20),
            BlockSize::Fixed(100),
            BlockSize::Whole,
        ] {
            specs.push(SamplerSpec::new(b, true));
            specs.push(SamplerSpec::new(b, false));
        }
        GridConfig {
            dgps: full_grid(master_seed),
            specs,
            n_iter: 25_000,
            burn_in: 5_000,
            replicates: 100,
            workers: 0,
            master_seed,
            priors: PriorHyper::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iter <= self.burn_in {
            return domain("n_iter must exceed burn_in");
        }
        if self.replicates == 0 || self.dgps.is_empty() || self.specs.is_empty() {
            return domain("grid needs at least one DGP, spec and replicate");
        }
        self.priors.validate()?;
        for d in &self.dgps {
            d.validate()?;
        }
        Ok(())
    }
}

/// Seed of the data set for replicate `rep` of `dgp`.
pub fn data_seed(master_seed: u64, dgp: &Dgp, rep: usize) -> u64 {
    rng::stream_id(&format!("data/{}/{master_seed}", dgp.key()), rep as u64)
}

/// Chain sub-stream for (`dgp`, `spec`, `rep`).
pub fn chain_stream(dgp: &Dgp, spec: &SamplerSpec, rep: usize) -> u64 {
    rng::stream_id(&format!("chain/{}/{}", dgp.key(), spec.label()), rep as u64)
}

/// Outcome of a single (DGP, spec, replicate) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub record: RunRecord,
    pub dgp: Dgp,
    pub n_draws: usize,
    pub runtime_secs: f64,
}

impl GridRun {
    /// ESS per stored draw of `param`.
    pub fn ess_per_draw(&self, param: &str) -> Option<f64> {
        let s = self.record.summary.as_ref()?;
        Some(s.ess_of(param)? / self.n_draws as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub runs: Vec<GridRun>,
    pub tables: AesrTables,
    pub spec_labels: Vec<String>,
}

/// Run one replicate of one DGP under one spec.
pub fn run_one(cfg: &GridConfig, dgp: &Dgp, spec: &SamplerSpec, rep: usize) -> GridRun {
    let data_dgp = dgp.with_seed(data_seed(cfg.master_seed, dgp, rep));
    let started = Instant::now();
    let outcome = (|| -> Result<(EfficiencySummary, usize, f64)> {
        let data = simulate_dgp(&data_dgp)?;
        let mut model = DynCopulaModel::new(dgp.family, &data.u, 8.0, 0.5)?;
        let mut chain = ChainConfig::new(*spec, cfg.n_iter, cfg.burn_in, cfg.master_seed);
        chain.stream = chain_stream(dgp, spec, rep);
        chain.priors = cfg.priors;
        chain.store_states = true;
        let draws = run_chain(&mut model, &chain)?;
        let summary = EfficiencySummary::from_draws(&draws, &["mu", "phi", "sigma"])?;
        Ok((summary, draws.n_draws(), draws.runtime_secs))
    })();
    let base = RunRecord {
        dgp: dgp.key(),
        group: dgp.group(),
        spec: spec.label(),
        replicate: rep,
        summary: None,
        error: None,
    };
    match outcome {
        Ok((summary, n_draws, runtime_secs)) => GridRun {
            record: RunRecord {
                summary: Some(summary),
                ..base
            },
            dgp: data_dgp,
            n_draws,
            runtime_secs,
        },
        Err(e) => {
            log::warn!("{} {} replicate {rep} failed: {e}", dgp.key(), spec.label());
            GridRun {
                record: RunRecord {
                    error: Some(e.to_string()),
                    ..base
                },
                dgp: data_dgp,
                n_draws: 0,
                runtime_secs: started.elapsed().as_secs_f64(),
            }
        }
    }
}

/// Run every (DGP, spec, replicate) job on a worker pool and aggregate.
/// Runs are returned in grid order regardless of execution order.
pub fn run_grid(cfg: &GridConfig) -> Result<GridResult> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for (di, d) in cfg.dgps.iter().enumerate() {
        for (si, s) in cfg.specs.iter().enumerate() {
            for rep in 0..cfg.replicates {
                jobs.push((di, si, rep, d, s));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
    let mut runs: Vec<((usize, usize, usize), GridRun)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(di, si, rep, d, s)| ((di, si, rep), run_one(cfg, d, s, rep)))
            .collect()
    });
    runs.sort_by_key(|r| r.0);
    let runs: Vec<GridRun> = runs.into_iter().map(|r| r.1).collect();
    let records: Vec<RunRecord> = runs.iter().map(|r| r.record.clone()).collect();
    Ok(GridResult {
        tables: aesr_table(&records, cfg.replicates),
        spec_labels: cfg.specs.iter().map(SamplerSpec::label).collect(),
        runs,
    })
}

impl GridResult {
    /// mAESR table: rows mu, phi, sigma, s(a), s(m) per group; one column
    /// per sampler spec.
    pub fn table_csv(&self) -> String {
        self.tables.maesr_csv(&TABLE_PARAMS, &self.spec_labels)
    }

    /// One row per run with ESS and ESR of every reported quantity.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("dgp,spec,replicate,data_seed,runtime_secs,n_draws");
        for p in TABLE_PARAMS {
            out.push_str(&format!(",ess_{p},esr_{p}"));
        }
        out.push_str(",error\n");
        for r in &self.runs {
            let rec = &r.record;
            out.push_str(&format!(
                "{},\"{}\",{},{},{:.6},{}",
                rec.dgp, rec.spec, rec.replicate, r.dgp.seed, r.runtime_secs, r.n_draws
            ));
            for p in TABLE_PARAMS {
                match &rec.summary {
                    Some(s) => out.push_str(&format!(
                        ",{:.6},{:.6}",
                        s.ess_of(p).unwrap_or(f64::NAN),
                        s.esr_of(p).unwrap_or(f64::NAN)
                    )),
                    None => out.push_str(",,"),
                }
            }
            let err = rec.error.as_deref().unwrap_or("").replace('"', "'");
            out.push_str(&format!(",\"{err}\"\n"));
        }
        out
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.record.summary.is_none()).count()
    }
}
