//! Flat key-value run configuration.
//!
//! A config file holds one `key value` pair per line (`#` comments and blank
//! lines ignored); any `--key value` command-line flag overrides the file.
//! Every command reads exactly the keys it needs, falling back to documented
//! defaults, and echoes the keys it actually used — given or defaulted — to
//! `config_resolved.cfg` in the output directory, so a finished run carries
//! its own reproduction recipe.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Every key any command understands. Commands ignore keys meant for other
/// commands so one config file can drive a whole simulate/train/evaluate/
/// analyze pipeline, but a key outside this list is rejected as a typo.
const KNOWN_KEYS: &[&str] = &[
    // inputs and outputs
    "data_dir",
    "events",
    "meta",
    "out",
    "checkpoint",
    // run-wide
    "seed",
    "threads",
    // load-ratio estimation
    "post_rate_coeff",
    "visit_rate_coeff",
    // model hyperparameters
    "k",
    "lambda_u",
    "lambda_theta",
    "lambda_eta",
    "conf_a",
    "conf_b",
    "conf_c",
    "l_max",
    "tol",
    "max_iters",
    // stream-depth (visibility) parameters
    "surf_mu",
    "surf_lambda",
    // training
    "model",
    "sweep_order",
    "negatives",
    // evaluation
    "models",
    "x_values",
    "folds",
    "bucket_x",
    "buckets",
    // synthesis
    "n_users",
    "n_items",
    "rho_lo",
    "rho_hi",
    "density",
    "cut",
    "noise_precision",
];

#[derive(Debug)]
pub struct Settings {
    values: BTreeMap<String, String>,
    /// Key -> value actually used (given or default), filled by the getters.
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(config: Option<&Path>, overrides: &[(String, String)]) -> Result<Settings> {
        let mut values = BTreeMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            for (no, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line
                    .split_once(char::is_whitespace)
                    .map(|(k, v)| (k, v.trim()))
                    .filter(|(_, v)| !v.is_empty())
                    .ok_or_else(|| {
                        anyhow!("{}:{}: expected `key value`, got {line:?}", path.display(), no + 1)
                    })?;
                if values.insert(key.to_string(), value.to_string()).is_some() {
                    bail!("{}:{}: key {key:?} set twice", path.display(), no + 1);
                }
            }
        }
        let mut seen = BTreeSet::new();
        for (key, value) in overrides {
            if !seen.insert(key.as_str()) {
                bail!("flag --{key} given twice");
            }
            values.insert(key.clone(), value.clone());
        }
        for key in values.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("unknown config key {key:?}");
            }
        }
        Ok(Settings { values, resolved: BTreeMap::new() })
    }

    /// Whether the key was given (file or flag), without consuming it.
    pub fn given(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn take(&mut self, key: &str) -> Option<String> {
        let value = self.values.get(key).cloned();
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.clone());
        }
        value
    }

    fn record_default(&mut self, key: &str, value: String) {
        self.resolved.insert(key.to_string(), value);
    }

    fn parse_one<T>(key: &str, value: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        value
            .parse()
            .map_err(|e| anyhow!("config key {key}: bad value {value:?}: {e}"))
    }

    pub fn opt_str(&mut self, key: &str) -> Option<String> {
        self.take(key)
    }

    pub fn require_str(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .ok_or_else(|| anyhow!("config key {key:?} is required"))
    }

    pub fn str_or(&mut self, key: &str, default: &str) -> String {
        match self.take(key) {
            Some(v) => v,
            None => {
                self.record_default(key, default.to_string());
                default.to_string()
            }
        }
    }

    pub fn require<T>(&mut self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        let value = self.require_str(key)?;
        Self::parse_one(key, &value)
    }

    pub fn parse_opt<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.take(key).map(|v| Self::parse_one(key, &v)).transpose()
    }

    pub fn parse_or<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.take(key) {
            Some(v) => Self::parse_one(key, &v),
            None => {
                self.record_default(key, default.to_string());
                Ok(default)
            }
        }
    }

    /// Comma-separated list; `default` is the canonical default spelling.
    pub fn list_or<T>(&mut self, key: &str, default: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.str_or(key, default)
            .split(',')
            .map(str::trim)
            .filter(|part| !part.is_empty())
            .map(|part| Self::parse_one(key, part))
            .collect()
    }

    /// Writes `config_resolved.cfg`: one sorted `key value` line per key this
    /// command used.
    pub fn write_resolved(&self, dir: &Path, command: &str) -> Result<()> {
        let mut text = format!("# resolved configuration for `vip {command}`\n");
        for (key, value) in &self.resolved {
            text.push_str(key);
            text.push(' ');
            text.push_str(value);
            text.push('\n');
        }
        let path = dir.join("config_resolved.cfg");
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
