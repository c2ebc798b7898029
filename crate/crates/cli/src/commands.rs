use std::collections::BTreeMap;

use interweave_core::ar1::simulate_path;
use interweave_core::copulas::{sample_one_tagged, CopulaParams};
use interweave_core::diagnostics::{spectrum0_ar, summarize, ParamSummary};
use interweave_core::engine::run_chain_full;
use interweave_core::obsmodels::{ConstCopulaModel, ConstFitConfig};
use interweave_core::pipeline::{
    fit_two_step, rolling_forecast_menu, simulate_full_model, simulate_sv, tail_trajectories, Band, CopulaFit,
    FullModelTruth, MarginTruth, TwoStepFit,
};
use interweave_core::simstudy::{run_grid, GridConfig, TABLE_PARAMS};
use interweave_core::{rng, Ar1Params, ChainConfig, DrawsStore, DynCopulaModel, SkewTSvModel};
use serde::Serialize;

use crate::config::{Command, GridKind, InputKind, RunConfig, SimModel};
use crate::ingest::{ingest_csv, Dataset};
use crate::output::{num, OutputWriter};
use crate::CliError;

/// Label written into summaries: full-sample fit or forecast training fit.
pub const FULL_SAMPLE: &str = "full_sample";
pub const TRAINING: &str = "training";

pub fn execute(cfg: &RunConfig, w: &mut OutputWriter) -> Result<(), CliError> {
    match cfg.command {
        Command::Simulate => simulate(cfg, w),
        Command::FitSv => fit_sv(cfg, w),
        Command::FitCopula | Command::FitConstCopula => fit_copula(cfg, w),
        Command::Forecast => forecast(cfg, w),
        Command::Tails => tails(cfg, w),
        Command::Simstudy => simstudy(cfg, w),
        Command::Diagnose => diagnose(cfg, w),
    }
}

fn load(cfg: &RunConfig, min_series: usize) -> Result<Dataset, CliError> {
    let path = cfg.input.as_ref().expect("validated");
    let d = ingest_csv(path, cfg.input_kind, &cfg.columns, min_series)?;
    if d.dropped > 0 {
        log::info!("{}: dropped {} row(s) with missing values", path.display(), d.dropped);
    }
    if d.is_empty() {
        return Err(CliError::Input(format!("{}: no usable rows", path.display())));
    }
    Ok(d)
}

#[derive(Serialize)]
struct FitSummary<'a> {
    label: &'a str,
    model: String,
    series: Vec<String>,
    n_obs: usize,
    dropped_rows: usize,
    sampler: String,
    n_iter: usize,
    burn_in: usize,
    params: BTreeMap<String, ParamSummary>,
    accept: BTreeMap<String, f64>,
}

fn param_summaries(d: &DrawsStore) -> Result<BTreeMap<String, ParamSummary>, CliError> {
    d.columns().map(|(n, c)| Ok((n.to_string(), summarize(c)?))).collect()
}

fn write_draws(w: &mut OutputWriter, name: &str, d: &DrawsStore) -> Result<(), CliError> {
    let header: Vec<&str> = d.names().iter().map(String::as_str).collect();
    let cols: Vec<&[f64]> = d.columns().map(|(_, c)| c).collect();
    let rows = (0..d.n_draws()).map(|i| cols.iter().map(|c| num(c[i])).collect());
    w.write_csv(name, &header, rows)
}

fn band_cells(b: &Band) -> [String; 3] {
    [num(b.mode), num(b.q05), num(b.q95)]
}

fn state_bands(d: &DrawsStore) -> Result<Vec<Band>, CliError> {
    (0..d.state_len())
        .map(|t| {
            let s = summarize(&d.state_column(t))?;
            Ok(Band {
                mode: s.mode,
                q05: s.q05,
                q95: s.q95,
            })
        })
        .collect()
}

/// `t, index, mode, q05, q95` for `s_0..s_T`; `index` is empty at `t = 0`.
fn write_states(w: &mut OutputWriter, name: &str, index: &[String], bands: &[(&str, &[Band])]) -> Result<(), CliError> {
    let mut header = vec!["t".to_string(), "index".to_string()];
    for (p, _) in bands {
        header.extend(["mode", "q05", "q95"].iter().map(|s| format!("{p}_{s}")));
    }
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let n = bands[0].1.len();
    let rows = (0..n).map(|t| {
        let mut r = vec![t.to_string(), if t == 0 { String::new() } else { index[t - 1].clone() }];
        for (_, b) in bands {
            r.extend(band_cells(&b[t]));
        }
        r
    });
    w.write_csv(name, &h, rows)
}

fn thin(cfg: &RunConfig) -> usize {
    let (n, b) = cfg.iterations();
    (n - b).div_ceil(cfg.max_state_draws).max(1)
}

fn chain_config(cfg: &RunConfig, purpose: &str) -> Result<ChainConfig, CliError> {
    let (n, b) = cfg.iterations();
    let mut c = ChainConfig::new(cfg.spec()?, n, b, cfg.seed);
    c.priors = cfg.priors();
    c.stream = rng::stream_id(purpose, 0);
    c.store_states = true;
    c.state_thin = thin(cfg);
    Ok(c)
}

fn timing(w: &mut OutputWriter, secs: f64) -> Result<(), CliError> {
    w.write_json("timing.json", &BTreeMap::from([("runtime_secs", secs)]), false)
}

fn accept(d: &DrawsStore) -> BTreeMap<String, f64> {
    d.info
        .iter()
        .filter(|(k, _)| k.starts_with("accept"))
        .map(|(k, v)| (k.clone(), *v))
        .collect()
}

fn fit_sv(cfg: &RunConfig, w: &mut OutputWriter) -> Result<(), CliError> {
    let data = load(cfg, 1)?;
    let mut model = SkewTSvModel::new(data.columns[0].clone(), 0.0, 10.0)?;
    let run = run_chain_full(&mut model, &chain_config(cfg, "fit-sv")?)?;
    let (n, b) = cfg.iterations();
    w.write_json(
        "summary.json",
        &FitSummary {
            label: FULL_SAMPLE,
            model: "skew_t_sv".into(),
            series: vec![data.names[0].clone()],
            n_obs: data.len(),
            dropped_rows: data.dropped,
            sampler: cfg.spec()?.label(),
            n_iter: n,
            burn_in: b,
            params: param_summaries(&run.draws)?,
            accept: accept(&run.draws),
        },
        true,
    )?;
    write_draws(w, "draws.csv", &run.draws)?;
    let bands = state_bands(&run.draws)?;
    write_states(w, "states.csv", &data.index, &[("s", &bands)])?;
    timing(w, run.draws.runtime_secs)
}

#[derive(Serialize)]
struct TwoStepSummary<'a> {
    label: &'a str,
    model: &'a str,
    series: Vec<String>,
    n_obs: usize,
    dropped_rows: usize,
    sampler: String,
    n_iter: usize,
    burn_in: usize,
    margins: BTreeMap<String, BTreeMap<String, ParamSummary>>,
    copula: BTreeMap<String, ParamSummary>,
}

fn two_step_summary<'a>(
    cfg: &RunConfig,
    label: &'a str,
    data: &Dataset,
    fit: &'a TwoStepFit,
) -> Result<TwoStepSummary<'a>, CliError> {
    let (n, b) = cfg.iterations();
    Ok(TwoStepSummary {
        label,
        model: fit.entry.id(),
        series: data.names.clone(),
        n_obs: data.len(),
        dropped_rows: data.dropped,
        sampler: cfg.spec()?.label(),
        n_iter: n,
        burn_in: b,
        margins: data
            .names
            .iter()
            .zip(&fit.margins)
            .map(|(n, m)| (n.clone(), m.summaries.clone()))
            .collect(),
        copula: fit.copula.summaries().clone(),
    })
}

fn write_two_step(cfg: &RunConfig, w: &mut OutputWriter, data: &Dataset, fit: &TwoStepFit) -> Result<(), CliError> {
    w.write_json("summary.json", &two_step_summary(cfg, FULL_SAMPLE, data, fit)?, true)?;
    let rows = fit
        .u_hat
        .iter()
        .zip(&data.index)
        .map(|(u, i)| vec![i.clone(), num(u.0), num(u.1)]);
    w.write_csv("pseudo.csv", &["index", &data.names[0], &data.names[1]], rows)?;
    let (m0, m1) = (&fit.margins[0].path, &fit.margins[1].path);
    let n0 = format!("s_{}", data.names[0]);
    let n1 = format!("s_{}", data.names[1]);
    match &fit.copula {
        CopulaFit::Dynamic { path, draws, .. } => {
            write_states(w, "states.csv", &data.index, &[(&n0, m0), (&n1, m1), ("s_cop", path)])?;
            if let Some(d) = draws {
                write_draws(w, "copula_draws.csv", d)?;
            }
        }
        CopulaFit::Constant { .. } => write_states(w, "states.csv", &data.index, &[(&n0, m0), (&n1, m1)])?,
    }
    Ok(())
}

fn fit_copula(cfg: &RunConfig, w: &mut OutputWriter) -> Result<(), CliError> {
    let data = load(cfg, 2)?;
    if cfg.input_kind != InputKind::Uniform {
        let entry = cfg.entry()?;
        let fit = fit_two_step(&data.pairs(), entry, &cfg.pipeline())?;
        return write_two_step(cfg, w, &data, &fit);
    }
    let family = cfg.family()?;
    let (n, b) = cfg.iterations();
    let draws = if cfg.command == Command::FitCopula {
        let mut model = DynCopulaModel::new(family, &data.pairs(), 8.0, 0.5)?;
        run_chain_full(&mut model, &chain_config(cfg, "fit-copula")?)?.draws
    } else {
        ConstCopulaModel::new(family, &data.pairs())?.fit(&ConstFitConfig {
            n_iter: n,
            burn_in: b,
            seed: cfg.seed,
            stream: rng::stream_id("fit-const-copula", 0),
        })?
    };
    let kind = if cfg.command == Command::FitCopula {
        "dynamic"
    } else {
        "constant"
    };
    w.write_json(
        "summary.json",
        &FitSummary {
            label: FULL_SAMPLE,
            model: format!("{kind}_{}", family.name()),
            series: data.names.clone(),
            n_obs: data.len(),
            dropped_rows: data.dropped,
            sampler: if cfg.command == Command::FitCopula {
                cfg.spec()?.label()
            } else {
                "rwmh".into()
            },
            n_iter: n,
            burn_in: b,
            params: param_summaries(&draws)?,
            accept: accept(&draws),
        },
        true,
    )?;
    write_draws(w, "draws.csv", &draws)?;
    if draws.has_states() {
        let s = state_bands(&draws)?;
        let tau: Vec<Band> = (0..draws.state_len())
            .map(|t| {
                let col: Vec<f64> = draws.state_column(t).iter().map(|v| v.tanh()).collect();
                let x = summarize(&col)?;
                Ok(Band {
                    mode: x.mode,
                    q05: x.q05,
                    q95: x.q95,
                })
            })
            .collect::<Result<_, CliError>>()?;
        write_states(w, "states.csv", &data.index, &[("s", &s), ("tau", &tau)])?;
    }
    timing(w, draws.runtime_secs)
}

fn tails(cfg: &RunConfig, w: &mut OutputWriter) -> Result<(), CliError> {
    if cfg.input_kind == InputKind::Uniform {
        return Err(CliError::Config(
            "tails fits the margins; give returns or prices".into(),
        ));
    }
    let data = load(cfg, 2)?;
    let fit = fit_two_step(&data.pairs(), cfg.entry()?, &cfg.pipeline())?;
    write_two_step(cfg, w, &data, &fit)?;
    let traj = tail_trajectories(&fit)?;
    let mut header = vec!["t".to_string(), "index".to_string()];
    for p in ["tau", "lambda_l", "lambda_u", "lambda_ul", "lambda_lr"] {
        header.extend(["mode", "q05", "q95"].iter().map(|s| format!("{p}_{s}")));
    }
    header.push("rolling_tau".into());
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = traj.iter().map(|p| {
        let mut r = vec![p.t.to_string(), data.index[p.t - 1].clone()];
        for b in [&p.tau, &p.lower, &p.upper, &p.upper_left, &p.lower_right] {
            r.extend(band_cells(b));
        }
        r.push(num(p.rolling_tau));
        r
    });
    w.write_csv("tails.csv", &h, rows)
}

#[derive(Serialize)]
struct TrainingSummary<'a> {
    label: &'a str,
    train_len: usize,
    test_len: usize,
    series: Vec<String>,
    margins: BTreeMap<String, BTreeMap<String, ParamSummary>>,
    copulas: BTreeMap<String, BTreeMap<String, ParamSummary>>,
}

fn forecast(cfg: &RunConfig, w: &mut OutputWriter) -> Result<(), CliError> {
    let data = load(cfg, 2)?;
    let t_train = cfg.train_len.expect("validated");
    if t_train > data.len() {
        return Err(CliError::Config(format!(
            "train_len {t_train} exceeds the {} usable rows",
            data.len()
        )));
    }
    let (fits, results) = rolling_forecast_menu(&data.pairs(), t_train, &cfg.menu()?, &cfg.pipeline())?;
    w.write_json(
        "training.json",
        &TrainingSummary {
            label: TRAINING,
            train_len: t_train,
            test_len: data.len() - t_train,
            series: data.names.clone(),
            margins: data
                .names
                .iter()
                .zip(&fits.margins)
                .map(|(n, m)| (n.clone(), m.summaries.clone()))
                .collect(),
            copulas: fits
                .copulas
                .iter()
                .map(|(e, c)| (e.id().to_string(), c.summaries().clone()))
                .collect(),
        },
        true,
    )?;
    let rows = results
        .iter()
        .map(|r| vec![r.entry.id().to_string(), num(r.lp), num(r.lp_copula), num(r.lp_margins)]);
    w.write_csv("lp.csv", &["model", "lp", "lp_copula", "lp_margins"], rows)?;
    let rows = results.iter().flat_map(|r| {
        r.steps.iter().map(|s| {
            vec![
                r.entry.id().to_string(),
                s.k.to_string(),
                data.index[t_train + s.k - 1].clone(),
                num(s.s_hat[0]),
                num(s.s_hat[1]),
                s.s_cop.map_or(String::new(), num),
                num(s.tau),
                num(s.log_c),
                num(s.log_g),
            ]
        })
    });
    w.write_csv(
        "steps.csv",
        &[
            "model", "k", "index", "s_hat_1", "s_hat_2", "s_cop", "tau", "log_c", "log_g",
        ],
        rows,
    )
}

fn ar1_from(cfg: &RunConfig, d: (f64, f64, f64)) -> Result<Ar1Params, CliError> {
    Ok(Ar1Params::new(
        cfg.mu.unwrap_or(d.0),
        cfg.phi.unwrap_or(d.1),
        cfg.sigma.unwrap_or(d.2),
    )?)
}

fn simulate(cfg: &RunConfig, w: &mut OutputWriter) -> Result<(), CliError> {
    let n = cfg.t_len;
    let t_col = |t: usize| t.to_string();
    match cfg.sim_model {
        SimModel::Copula => {
            let family = cfg.family()?;
            let ar1 = ar1_from(cfg, (0.0, 0.9, 0.1))?;
            let params = |tau: f64| CopulaParams {
                tau,
                nu: cfg.nu.unwrap_or(8.0),
                p: cfg.p.unwrap_or(0.5),
            };
            let mut r = rng::stream(cfg.seed, rng::stream_id("simulate/copula", 0));
            let s = simulate_path(&ar1, n, &mut r);
            let mut u = Vec::with_capacity(n);
            for st in &s[1..] {
                u.push(sample_one_tagged(family, &params(st.tanh()), &mut r)?.0);
            }
            w.write_csv(
                "data.csv",
                &["t", "u1", "u2"],
                u.iter()
                    .enumerate()
                    .map(|(i, p)| vec![t_col(i + 1), num(p.0), num(p.1)]),
            )?;
            w.write_csv(
                "states.csv",
                &["t", "s"],
                s.iter().enumerate().map(|(t, v)| vec![t.to_string(), num(*v)]),
            )
        }
        SimModel::Sv => {
            let truth = MarginTruth {
                ar1: ar1_from(cfg, (-9.32, 0.99, 0.15))?,
                alpha: cfg.alpha.unwrap_or(-0.51),
                df: cfg.df.unwrap_or(6.84),
            };
            let (y, s) = simulate_sv(&truth, n, cfg.seed)?;
            w.write_csv(
                "data.csv",
                &["t", "y"],
                y.iter().enumerate().map(|(i, v)| vec![t_col(i + 1), num(*v)]),
            )?;
            w.write_csv(
                "states.csv",
                &["t", "s"],
                s.iter().enumerate().map(|(t, v)| vec![t.to_string(), num(*v)]),
            )
        }
        SimModel::Full => {
            let mut truth = FullModelTruth::typical();
            truth.copula = ar1_from(cfg, (truth.copula.mu, truth.copula.phi, truth.copula.sigma))?;
            truth.nu = cfg.nu.unwrap_or(truth.nu);
            truth.p = cfg.p.unwrap_or(truth.p);
            let sim = simulate_full_model(&truth, n, cfg.seed)?;
            let rows = sim
                .y
                .iter()
                .enumerate()
                .map(|(i, p)| vec![t_col(i + 1), num(p.0), num(p.1)]);
            w.write_csv("data.csv", &["t", "y1", "y2"], rows)?;
            let rows = (0..=n).map(|t| {
                let (u1, u2) = if t == 0 {
                    (String::new(), String::new())
                } else {
                    (num(sim.u[t - 1].0), num(sim.u[t - 1].1))
                };
                vec![
                    t.to_string(),
                    num(sim.s_margins[0][t]),
                    num(sim.s_margins[1][t]),
                    num(sim.s_copula[t]),
                    u1,
                    u2,
                ]
            });
            w.write_csv("states.csv", &["t", "s1", "s2", "s_cop", "u1", "u2"], rows)
        }
    }
}

fn simstudy(cfg: &RunConfig, w: &mut OutputWriter) -> Result<(), CliError> {
    let mut grid = match cfg.grid {
        GridKind::Desk => GridConfig::desk(cfg.seed),
        GridKind::Full => GridConfig::full(cfg.seed),
    };
    if let Some(n) = cfg.n_iter {
        grid.n_iter = n;
    }
    if let Some(b) = cfg.burn_in {
        grid.burn_in = b;
    }
    if let Some(r) = cfg.replicates {
        grid.replicates = r;
    }
    grid.workers = cfg.workers;
    grid.priors = cfg.priors();
    grid.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let res = run_grid(&grid)?;
    w.write_bytes("maesr.csv", res.table_csv().as_bytes(), false)?;
    w.write_bytes("aesr.csv", res.tables.aesr_csv().as_bytes(), false)?;
    w.write_bytes("runs.csv", res.runs_csv().as_bytes(), false)?;
    let mut header = vec!["dgp", "spec", "replicate", "data_seed", "n_draws"];
    let ess_names: Vec<String> = TABLE_PARAMS.iter().map(|p| format!("ess_{p}")).collect();
    header.extend(ess_names.iter().map(String::as_str));
    let rows = res.runs.iter().map(|r| {
        let mut row = vec![
            r.record.dgp.clone(),
            r.record.spec.clone(),
            r.record.replicate.to_string(),
            r.dgp.seed.to_string(),
            r.n_draws.to_string(),
        ];
        for p in TABLE_PARAMS {
            row.push(
                r.record
                    .summary
                    .as_ref()
                    .and_then(|s| s.ess_of(p))
                    .map_or(String::new(), num),
            );
        }
        row
    });
    w.write_csv("ess.csv", &header, rows)?;
    if res.failures() > 0 {
        log::warn!("{} run(s) failed; see runs.csv", res.failures());
    }
    Ok(())
}

#[derive(Serialize)]
struct ColumnDiagnostics {
    summary: ParamSummary,
    ar_order: usize,
    spectrum0: f64,
}

fn diagnose(cfg: &RunConfig, w: &mut OutputWriter) -> Result<(), CliError> {
    let path = cfg.input.as_ref().expect("validated");
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Input(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("line {}: {e}", i + 2)))?;
        for (c, cell) in cols.iter_mut().zip(rec.iter()) {
            let v: f64 = cell
                .parse()
                .map_err(|_| CliError::Input(format!("line {}: '{cell}' is not a number", i + 2)))?;
            c.push(v);
        }
    }
    let selected: Vec<usize> = if cfg.columns.is_empty() {
        (0..header.len()).collect()
    } else {
        cfg.columns
            .iter()
            .map(|n| {
                header
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| CliError::Input(format!("no column named '{n}'")))
            })
            .collect::<Result<_, _>>()?
    };
    let mut out = BTreeMap::new();
    for j in selected {
        let sp = spectrum0_ar(&cols[j])?;
        out.insert(
            header[j].clone(),
            ColumnDiagnostics {
                summary: summarize(&cols[j])?,
                ar_order: sp.order,
                spectrum0: sp.spec,
            },
        );
    }
    w.write_json("diagnostics.json", &out, true)
}
