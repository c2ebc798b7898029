//! Output directory handling. Every file of a run goes through one
//! [`OutputWriter`], which records a checksum per file for the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
    /// False for files holding wall-clock timings.
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub input_sha256: Option<String>,
    pub outputs: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(&fs::read(path)?))
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    m.config.validate()?;
    Ok(m)
}

pub struct OutputWriter {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputWriter {
    /// Claim the run directory of `cfg`. An existing directory is an error
    /// unless `force` is set, in which case it is replaced.
    pub fn create(cfg: &RunConfig, force: bool) -> Result<Self, CliError> {
        let dir = cfg.run_dir();
        if dir.exists() {
            if !force {
                return Err(CliError::Exists(dir));
            }
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(OutputWriter { dir, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8], deterministic: bool) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(OutputFile {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            deterministic,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T, deterministic: bool) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes(), deterministic)
    }

    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(|e| CliError::Numeric(e.to_string()))?;
        for r in rows {
            w.write_record(&r).map_err(|e| CliError::Numeric(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Numeric(e.to_string()))?;
        self.write_bytes(name, &bytes, true)
    }

    pub fn finish(self, cfg: &RunConfig, input_sha256: Option<String>) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            config: cfg.clone(),
            input_sha256,
            outputs: self.files,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numeric(e.to_string()))? + "\n";
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(self.dir)
    }
}

/// Shortest round-trip representation, so equal values print identically.
pub fn num(v: f64) -> String {
    format!("{v}")
}
