//! Configuration loading, thread setup and run manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use accreta_core::config::{Problem, RunConfig, Severity};
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

/// Input rejected before any solver ran; maps to exit code 1.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    /// Directory that relative paths in the configuration resolve against.
    pub config_dir: PathBuf,
    pub config: RunConfig,
    pub threads: usize,
    pub inputs: BTreeMap<String, String>,
    /// Wall-clock seconds per phase; the only nondeterministic content.
    pub timings: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
}

/// A configuration ready to run, with where it came from.
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
    pub problem: Problem,
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Reads a run configuration or the configuration embedded in a manifest.
pub fn read_config(path: &Path) -> Result<(RunConfig, PathBuf)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: not valid JSON: {e}", path.display())))?;
    if value.get("manifest_version").is_some() {
        let m: Manifest = serde_json::from_value(value).map_err(|e| invalid(format!("{}: bad manifest: {e}", path.display())))?;
        if m.manifest_version != MANIFEST_VERSION {
            return Err(invalid(format!("manifest version {} is not {MANIFEST_VERSION}", m.manifest_version)));
        }
        return Ok((m.config, m.config_dir));
    }
    let config: RunConfig = serde_json::from_value(value).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let base = absolute(path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")));
    Ok((config, base))
}

/// Loads, validates and builds; warnings are logged, errors are fatal.
pub fn load(path: &Path) -> Result<Loaded> {
    let (config, base) = read_config(path)?;
    let issues = config.validate(&base);
    let mut errors = Vec::new();
    for issue in &issues {
        match issue.severity {
            Severity::Warning => log::warn!("{issue}"),
            Severity::Error => errors.push(issue.to_string()),
        }
    }
    if !errors.is_empty() {
        return Err(invalid(format!("invalid configuration:\n  {}", errors.join("\n  "))));
    }
    init_threads(&config);
    let problem = config.build(&base).map_err(|e| invalid(e.to_string()))?;
    Ok(Loaded { config, base, problem })
}

/// `ACCRETA_THREADS` takes precedence over the `threads` field.
fn init_threads(config: &RunConfig) {
    let from_env = std::env::var("ACCRETA_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok());
    if let Some(n) = from_env.or(config.threads).filter(|&n| n > 0) {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("thread pool already initialized");
        }
    }
}

pub fn config_hash(config: &RunConfig) -> Result<String> {
    let canonical = serde_json::to_string(config)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

impl Manifest {
    pub fn new(command: &str, loaded: &Loaded) -> Result<Self> {
        Ok(Manifest {
            manifest_version: MANIFEST_VERSION,
            tool: "accreta".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: config_hash(&loaded.config)?,
            config_dir: loaded.base.clone(),
            config: loaded.config.clone(),
            threads: rayon::current_num_threads(),
            inputs: BTreeMap::new(),
            timings: BTreeMap::new(),
            outcome: None,
        })
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.into(), absolute(path).display().to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}
