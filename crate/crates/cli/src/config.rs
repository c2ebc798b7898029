//! Run configuration: a flat TOML table validated against [`RunConfig`].
//! Command line flags and `--set key=value` pairs are merged into the table
//! before deserialization, so every run is described by one resolved value
//! that is written to the manifest.

use std::path::{Path, PathBuf};

use interweave_core::pipeline::{MenuEntry, PipelineConfig};
use interweave_core::{CopulaFamily, PriorHyper, SamplerSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    FitSv,
    FitCopula,
    FitConstCopula,
    Forecast,
    Tails,
    Simstudy,
    Diagnose,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::FitSv => "fit-sv",
            Command::FitCopula => "fit-copula",
            Command::FitConstCopula => "fit-const-copula",
            Command::Forecast => "forecast",
            Command::Tails => "tails",
            Command::Simstudy => "simstudy",
            Command::Diagnose => "diagnose",
        }
    }

    fn needs_input(&self) -> bool {
        !matches!(self, Command::Simulate | Command::Simstudy)
    }
}

/// How the numeric columns of the input CSV are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// Price levels, converted to log returns.
    Prices,
    Returns,
    /// Copula data on the unit square.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    /// Dynamic copula data (`family`, `mu`, `phi`, `sigma`).
    Copula,
    /// Skew-t stochastic volatility returns.
    Sv,
    /// Two SV margins joined by a dynamic copula.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub input_kind: InputKind,
    /// Series to use, by header name; empty selects all (or the first for
    /// univariate models).
    pub columns: Vec<String>,
    /// Root directory; results go to `<output>/<command>-<hash>`.
    pub output: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub sampler: String,
    pub n_iter: Option<usize>,
    pub burn_in: Option<usize>,
    pub prior_sigma_mu: f64,
    pub prior_a_phi: f64,
    pub prior_b_phi: f64,
    pub prior_b_sigma: f64,
    /// Copula family for `fit-copula`/`fit-const-copula` on uniform data and
    /// for `simulate` with `sim_model = "copula"`.
    pub family: String,
    /// Menu entry for two-step fits on returns.
    pub model: String,
    /// Menu entries scored by `forecast`.
    pub models: Vec<String>,
    pub max_state_draws: usize,
    pub sim_model: SimModel,
    pub t_len: usize,
    pub mu: Option<f64>,
    pub phi: Option<f64>,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    pub df: Option<f64>,
    pub nu: Option<f64>,
    pub p: Option<f64>,
    pub train_len: Option<usize>,
    pub window: usize,
    pub test_iter: usize,
    pub test_burn: usize,
    pub grid: GridKind,
    pub replicates: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::FitSv,
            input: None,
            input_kind: InputKind::Returns,
            columns: Vec::new(),
            output: PathBuf::from("out"),
            seed: 1,
            workers: 0,
            sampler: "(5,I)".into(),
            n_iter: None,
            burn_in: None,
            prior_sigma_mu: 100.0,
            prior_a_phi: 5.0,
            prior_b_phi: 1.5,
            prior_b_sigma: 1.0,
            family: "mixture".into(),
            model: "dyn_mix".into(),
            models: MenuEntry::ALL.iter().map(|e| e.id().to_string()).collect(),
            max_state_draws: 5_000,
            sim_model: SimModel::Copula,
            t_len: 1_000,
            mu: None,
            phi: None,
            sigma: None,
            alpha: None,
            df: None,
            nu: None,
            p: None,
            train_len: None,
            window: 100,
            test_iter: 11_000,
            test_burn: 1_000,
            grid: GridKind::Desk,
            replicates: None,
        }
    }
}

pub const DEFAULT_ITER: usize = 31_000;
pub const DEFAULT_BURN: usize = 1_000;

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parse a `--set` value as a TOML scalar or array, falling back to a bare
/// string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl RunConfig {
    /// Merge a TOML file (optional), explicit overrides and `key=value`
    /// pairs, then validate.
    pub fn resolve(
        command: Command,
        file: Option<&Path>,
        overrides: Vec<(String, toml::Value)>,
        sets: &[String],
    ) -> Result<Self, CliError> {
        let mut table = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| cfg_err(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            table.insert(k, v);
        }
        for s in sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("--set expects key=value, got '{s}'")))?;
            table.insert(k.trim().to_string(), parse_value(v.trim()));
        }
        if let Some(c) = table.get("command") {
            if c.as_str() != Some(command.name()) {
                return Err(cfg_err(format!("config is for '{c}', not '{}'", command.name())));
            }
        }
        table.insert("command".into(), toml::Value::String(command.name().into()));
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.command.needs_input() && self.input.is_none() {
            return Err(cfg_err(format!("{} needs an input file", self.command.name())));
        }
        self.spec()?;
        self.priors().validate().map_err(|e| cfg_err(e.to_string()))?;
        let (n, b) = self.iterations();
        if n < b + 100 {
            return Err(cfg_err(format!(
                "n_iter ({n}) must exceed burn_in ({b}) by at least 100"
            )));
        }
        if self.max_state_draws < 100 {
            return Err(cfg_err("max_state_draws must be at least 100"));
        }
        match self.command {
            Command::FitCopula | Command::FitConstCopula | Command::Simulate => {
                self.family()?;
            }
            _ => {}
        }
        match self.command {
            Command::FitCopula | Command::FitConstCopula | Command::Tails => {
                self.entry()?;
            }
            Command::Forecast => {
                if self.train_len.is_none() {
                    return Err(cfg_err("forecast needs train_len"));
                }
                if self.menu()?.is_empty() {
                    return Err(cfg_err("forecast needs at least one model"));
                }
                self.pipeline().validate().map_err(|e| cfg_err(e.to_string()))?;
            }
            Command::Simulate if self.t_len == 0 => return Err(cfg_err("t_len must be positive")),
            _ => {}
        }
        if self.command == Command::Tails && !self.entry()?.is_dynamic() {
            return Err(cfg_err("tails needs a dynamic model (dyn_mix or dyn_t)"));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<SamplerSpec, CliError> {
        SamplerSpec::parse(&self.sampler).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn priors(&self) -> PriorHyper {
        PriorHyper {
            sigma_mu: self.prior_sigma_mu,
            a_phi: self.prior_a_phi,
            b_phi: self.prior_b_phi,
            b_sigma: self.prior_b_sigma,
        }
    }

    pub fn iterations(&self) -> (usize, usize) {
        (
            self.n_iter.unwrap_or(DEFAULT_ITER),
            self.burn_in.unwrap_or(DEFAULT_BURN),
        )
    }

    pub fn family(&self) -> Result<CopulaFamily, CliError> {
        CopulaFamily::parse(&self.family).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn entry(&self) -> Result<MenuEntry, CliError> {
        let e = MenuEntry::parse(&self.model).map_err(|e| cfg_err(e.to_string()))?;
        let dynamic_cmd = matches!(self.command, Command::FitCopula | Command::Tails);
        if self.command == Command::FitConstCopula && e.is_dynamic() || dynamic_cmd && !e.is_dynamic() {
            return Err(cfg_err(format!(
                "model {} does not match {}",
                e.id(),
                self.command.name()
            )));
        }
        Ok(e)
    }

    pub fn menu(&self) -> Result<Vec<MenuEntry>, CliError> {
        self.models
            .iter()
            .map(|m| MenuEntry::parse(m).map_err(|e| cfg_err(e.to_string())))
            .collect()
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let (n, b) = self.iterations();
        PipelineConfig {
            spec: self.spec().unwrap_or_else(|_| PipelineConfig::default().spec),
            priors: self.priors(),
            train_iter: n,
            train_burn: b,
            test_iter: self.test_iter,
            test_burn: self.test_burn,
            window: self.window,
            max_state_draws: self.max_state_draws,
            seed: self.seed,
        }
    }

    /// Canonical JSON of everything that affects results (the output root
    /// is excluded).
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        serde_json::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.canonical_json().as_bytes());
        d.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output.join(format!("{}-{}", self.command.name(), self.hash()))
    }
}
