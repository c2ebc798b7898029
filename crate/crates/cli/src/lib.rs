//! Command line front end: configuration, CSV ingestion, orchestration and
//! output packaging for the sampler in `interweave-core`.

pub mod commands;
pub mod config;
pub mod ingest;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Command, RunConfig};
use output::{file_sha256, load_manifest, OutputWriter};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("{} exists; pass --force to overwrite", .0.display())]
    Exists(PathBuf),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Core(#[from] interweave_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration and input problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) | CliError::Exists(_) => 2,
            CliError::Numeric(_) | CliError::Core(interweave_core::Error::Numeric(_)) => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "interweave",
    version,
    about = "Interweaving ESS sampler for latent AR(1) state space models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    /// Log level (error, warn, info, debug).
    #[arg(long, global = true, default_value = "info")]
    pub log: String,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file with run settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output root; results go to <output>/<command>-<hash>.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sampler spec such as (5,I) or (T,NI).
    #[arg(long)]
    pub sampler: Option<String>,
    #[arg(long)]
    pub n_iter: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Any other setting, as key=value (TOML value syntax).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Replace an existing run directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Simulate copula, SV or full bivariate data.
    Simulate(Common),
    /// Fit a skew-t stochastic volatility model to one series.
    FitSv(Common),
    /// Fit a dynamic copula (uniform data) or a two-step model (returns).
    FitCopula(Common),
    /// Fit a constant copula (uniform data) or a two-step model (returns).
    FitConstCopula(Common),
    /// Rolling one-step-ahead forecast with pseudo log predictive scores.
    Forecast(Common),
    /// Tail dependence trajectories of a dynamic two-step fit.
    Tails(Common),
    /// Sampler efficiency study over a grid of data-generating processes.
    Simstudy(Common),
    /// ESS, mode and quantiles of every column of a draws CSV.
    Diagnose(Common),
    /// Re-run a previous run from its manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

fn overrides(c: &Common) -> Vec<(String, toml::Value)> {
    let mut v = Vec::new();
    let s = |x: &PathBuf| toml::Value::String(x.to_string_lossy().into_owned());
    if let Some(x) = &c.input {
        v.push(("input".into(), s(x)));
    }
    if let Some(x) = &c.output {
        v.push(("output".into(), s(x)));
    }
    if let Some(x) = c.seed {
        v.push(("seed".into(), toml::Value::Integer(x as i64)));
    }
    if let Some(x) = &c.sampler {
        v.push(("sampler".into(), toml::Value::String(x.clone())));
    }
    for (k, x) in [("n_iter", c.n_iter), ("burn_in", c.burn_in), ("workers", c.workers)] {
        if let Some(x) = x {
            v.push((k.into(), toml::Value::Integer(x as i64)));
        }
    }
    v
}

/// Resolve the configuration of a parsed command line.
pub fn resolve(sub: &Sub) -> Result<(RunConfig, bool), CliError> {
    let (cmd, common) = match sub {
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::FitSv(c) => (Command::FitSv, c),
        Sub::FitCopula(c) => (Command::FitCopula, c),
        Sub::FitConstCopula(c) => (Command::FitConstCopula, c),
        Sub::Forecast(c) => (Command::Forecast, c),
        Sub::Tails(c) => (Command::Tails, c),
        Sub::Simstudy(c) => (Command::Simstudy, c),
        Sub::Diagnose(c) => (Command::Diagnose, c),
        Sub::Rerun {
            manifest,
            output,
            force,
        } => {
            let mut cfg = load_manifest(manifest)?.config;
            if let Some(o) = output {
                cfg.output = o.clone();
            }
            return Ok((cfg, *force));
        }
    };
    let cfg = RunConfig::resolve(cmd, common.config.as_deref(), overrides(common), &common.sets)?;
    Ok((cfg, common.force))
}

/// Run one resolved configuration; returns the run directory.
pub fn run(cfg: &RunConfig, force: bool) -> Result<PathBuf, CliError> {
    let input_sha = match &cfg.input {
        Some(p) => Some(file_sha256(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let mut w = OutputWriter::create(cfg, force)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let res = pool.install(|| commands::execute(cfg, &mut w));
    if let Err(e) = res {
        let dir = w.dir().to_path_buf();
        let _ = std::fs::remove_dir_all(&dir);
        return Err(e);
    }
    w.finish(cfg, input_sha)
}
