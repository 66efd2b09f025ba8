//! Option resolution: command-line flags take precedence over an optional
//! key=value config file, which takes precedence over the environment
//! (`GPTRUST_SEED`, seed only), which takes precedence over built-in
//! defaults. The resolved result, recorded key by key, is exactly what the
//! run manifest stores, so re-running with a manifest as the config file
//! reproduces the run.

use crate::error::CliError;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Option values straight from the command line, all optional. The binary
/// fills this from clap; tests can build it directly.
#[derive(Debug, Default, Clone)]
pub struct RawArgs {
    pub config: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub kernel: Option<String>,
    pub rho: Option<f64>,
    pub multiplier: Option<f64>,
    pub seed: Option<u64>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub step: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

const KNOWN_KEYS: &[&str] = &[
    "data",
    "model",
    "kernel",
    "rho",
    "multiplier",
    "seed",
    "from",
    "to",
    "step",
    "out-dir",
];

/// Merges flags, config file, environment, and defaults. Each getter
/// consumes its flag and records the resolved value; config-file keys a
/// command does not use are ignored, so one file can serve several commands.
pub struct Resolver {
    raw: RawArgs,
    file: BTreeMap<String, String>,
    record: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(raw: RawArgs) -> Result<Self, CliError> {
        let file = match &raw.config {
            Some(path) => load_config(path)?,
            None => BTreeMap::new(),
        };
        Ok(Resolver {
            raw,
            file,
            record: BTreeMap::new(),
        })
    }

    fn file_value(&self, key: &str) -> Option<String> {
        self.file.get(key).cloned()
    }

    fn record_f64(&mut self, key: &str, value: f64) -> f64 {
        self.record.insert(key.to_string(), format!("{value}"));
        value
    }

    fn record_text(&mut self, key: &str, value: String) -> String {
        self.record.insert(key.to_string(), value.clone());
        value
    }

    fn f64_opt(&mut self, key: &str, flag: Option<f64>) -> Result<Option<f64>, CliError> {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file_value(key) {
                Some(text) => Some(text.trim().parse().map_err(|_| {
                    CliError::Usage(format!("config key `{key}`: `{text}` is not a number"))
                })?),
                None => None,
            },
        };
        Ok(value.map(|v| self.record_f64(key, v)))
    }

    fn required<T>(value: Option<T>, key: &str) -> Result<T, CliError> {
        value.ok_or_else(|| {
            CliError::Usage(format!("`--{key}` is required (flag or config key `{key}`)"))
        })
    }

    pub fn data_path(&mut self) -> Result<PathBuf, CliError> {
        let v = self
            .raw
            .data
            .take()
            .or_else(|| self.file_value("data").map(PathBuf::from));
        let path = Self::required(v, "data")?;
        Ok(PathBuf::from(
            self.record_text("data", path.display().to_string()),
        ))
    }

    pub fn model_path(&mut self) -> Result<PathBuf, CliError> {
        let v = self
            .raw
            .model
            .take()
            .or_else(|| self.file_value("model").map(PathBuf::from));
        let path = Self::required(v, "model")?;
        Ok(PathBuf::from(
            self.record_text("model", path.display().to_string()),
        ))
    }

    pub fn kernel(&mut self, default: &str) -> Result<String, CliError> {
        let v = self
            .raw
            .kernel
            .take()
            .or_else(|| self.file_value("kernel"))
            .unwrap_or_else(|| default.to_string());
        Ok(self.record_text("kernel", v))
    }

    pub fn rho(&mut self, default: f64) -> Result<f64, CliError> {
        let flag = self.raw.rho.take();
        let v = self.f64_opt("rho", flag)?.unwrap_or(default);
        Ok(self.record_f64("rho", v))
    }

    pub fn multiplier(&mut self, default: f64) -> Result<f64, CliError> {
        let flag = self.raw.multiplier.take();
        let v = self.f64_opt("multiplier", flag)?.unwrap_or(default);
        Ok(self.record_f64("multiplier", v))
    }

    /// Seed precedence: `--seed`, config key, `GPTRUST_SEED`, then 0.
    pub fn seed(&mut self) -> Result<u64, CliError> {
        let v = match self.raw.seed.take() {
            Some(s) => s,
            None => match self.file_value("seed") {
                Some(text) => text.trim().parse().map_err(|_| {
                    CliError::Usage(format!("config key `seed`: `{text}` is not an integer"))
                })?,
                None => match std::env::var("GPTRUST_SEED") {
                    Ok(text) => text.trim().parse().map_err(|_| {
                        CliError::Usage(format!("GPTRUST_SEED: `{text}` is not an integer"))
                    })?,
                    Err(_) => 0,
                },
            },
        };
        self.record.insert("seed".to_string(), format!("{v}"));
        Ok(v)
    }

    pub fn grid(&mut self) -> Result<(f64, f64, f64), CliError> {
        let flag = self.raw.from.take();
        let from = Self::required(self.f64_opt("from", flag)?, "from")?;
        let flag = self.raw.to.take();
        let to = Self::required(self.f64_opt("to", flag)?, "to")?;
        let flag = self.raw.step.take();
        let step = Self::required(self.f64_opt("step", flag)?, "step")?;
        Ok((from, to, step))
    }

    pub fn out_dir(&mut self) -> Result<PathBuf, CliError> {
        let v = self
            .raw
            .out_dir
            .take()
            .or_else(|| self.file_value("out-dir").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(PathBuf::from(
            self.record_text("out-dir", v.display().to_string()),
        ))
    }

    /// Records a value that is part of the command itself (such as an
    /// experiment name) rather than a flag.
    pub fn record_extra(&mut self, key: &str, value: &str) {
        self.record.insert(key.to_string(), value.to_string());
    }

    /// Rejects flags this command never consulted, so a stray `--rho` on
    /// `score` fails loudly instead of silently doing nothing. Getters
    /// consume their flag, so whatever is still present was never used.
    pub fn deny_unused(&self) -> Result<(), CliError> {
        let r = &self.raw;
        let stray = [
            ("data", r.data.is_some()),
            ("model", r.model.is_some()),
            ("kernel", r.kernel.is_some()),
            ("rho", r.rho.is_some()),
            ("multiplier", r.multiplier.is_some()),
            ("seed", r.seed.is_some()),
            ("from", r.from.is_some()),
            ("to", r.to.is_some()),
            ("step", r.step.is_some()),
        ];
        if let Some((name, _)) = stray.iter().find(|(_, present)| *present) {
            return Err(CliError::Usage(format!(
                "`--{name}` does not apply to this command"
            )));
        }
        Ok(())
    }

    /// The fully resolved configuration, as the manifest records it.
    pub fn finish(self) -> BTreeMap<String, String> {
        self.record
    }
}

/// Loads a config file: `key = value` lines (`#` comments and blanks
/// ignored), or a previously written `manifest.json`, whose `config` object
/// is taken as the key/value map.
fn load_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
    let map = if text.trim_start().starts_with('{') {
        manifest_config(&text, path)?
    } else {
        key_value_lines(&text, path)?
    };
    for key in map.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!(
                "config file {}: unknown key `{key}`",
                path.display()
            )));
        }
    }
    Ok(map)
}

fn key_value_lines(text: &str, path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "config file {} line {}: expected key=value",
                path.display(),
                idx + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn manifest_config(text: &str, path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
    let config = value
        .get("config")
        .and_then(|c| c.as_object())
        .ok_or_else(|| {
            CliError::Usage(format!(
                "config file {}: JSON config must be a manifest with a `config` object",
                path.display()
            ))
        })?;
    let mut map = BTreeMap::new();
    for (key, v) in config {
        let rendered = v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
        // The manifest also records the experiment name, which is not a flag.
        if key == "name" {
            continue;
        }
        map.insert(key.clone(), rendered);
    }
    Ok(map)
}
