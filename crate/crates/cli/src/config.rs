//! Flat `key=value` run configs. Lines starting with `#` are comments;
//! unknown keys are rejected so typos fail loudly instead of training with
//! defaults.

use crate::AppError;
use mofill::model::Arch;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

pub const KNOWN_KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "learning_rate",
    "seed",
    "curriculum",
    "fixed_gap",
    "mix_ratio",
    "validation_fraction",
    "checkpoint_every",
    "checkpoint_dir",
    "arch",
    "data",
    "out",
    "stats",
];

#[derive(Debug, Default)]
pub struct RunConfig {
    values: HashMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<RunConfig, AppError> {
        let mut values = HashMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                AppError::usage(format!(
                    "{}:{}: expected key=value, got `{line}`",
                    origin.display(),
                    no + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(AppError::usage(format!(
                    "{}:{}: unknown key `{key}` (known: {})",
                    origin.display(),
                    no + 1,
                    KNOWN_KEYS.join(", ")
                )));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(AppError::usage(format!(
                    "{}:{}: key `{key}` set twice",
                    origin.display(),
                    no + 1
                )));
            }
        }
        Ok(RunConfig { values })
    }

    pub fn load(path: &Path) -> Result<RunConfig, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::data(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, AppError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                AppError::usage(format!("config key `{key}`: cannot parse `{raw}`"))
            }),
        }
    }

    pub fn usize_key(&self, key: &str) -> Result<Option<usize>, AppError> {
        self.get(key)
    }

    pub fn u64_key(&self, key: &str) -> Result<Option<u64>, AppError> {
        self.get(key)
    }

    pub fn f64_key(&self, key: &str) -> Result<Option<f64>, AppError> {
        self.get(key)
    }

    pub fn bool_key(&self, key: &str) -> Result<Option<bool>, AppError> {
        match self.values.get(key).map(String::as_str) {
            None => Ok(None),
            Some("true" | "on" | "1") => Ok(Some(true)),
            Some("false" | "off" | "0") => Ok(Some(false)),
            Some(raw) => Err(AppError::usage(format!(
                "config key `{key}`: expected true/false, got `{raw}`"
            ))),
        }
    }

    pub fn path_key(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(PathBuf::from)
    }

    pub fn arch_key(&self) -> Result<Option<Arch>, AppError> {
        match self.values.get("arch").map(String::as_str) {
            None => Ok(None),
            Some("full") => Ok(Some(Arch::Full)),
            Some("vanilla") => Ok(Some(Arch::Vanilla)),
            Some(raw) => Err(AppError::usage(format!(
                "config key `arch`: expected full or vanilla, got `{raw}`"
            ))),
        }
    }
}
