//! Layered settings for the command-line tool.
//!
//! A value comes from the first layer that has it: command-line flag, then
//! the `DSREPAIR_<KEY>` environment variable, then the config file.
//!
//! The config file is plain text, one `key = value` per line. Keys are the
//! long flag names (`runner-cmd`, `mock-rules`, ...); `_` and `-` are
//! interchangeable. Blank lines and lines starting with `#` are ignored.
//! Values may be wrapped in double quotes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

pub const ENV_PREFIX: &str = "DSREPAIR_";

/// Every key the tool understands.
pub const KEYS: &[&str] = &[
    "kg",
    "docs-text",
    "mode",
    "richness",
    "scope",
    "repetitions",
    "workers",
    "timeout",
    "runner-cmd",
    "runner-replay",
    "mock-rules",
    "llm-replay",
    "endpoint",
    "model",
    "api-key-env",
    "price-in",
    "price-out",
    "requests-per-minute",
    "retries",
    "out",
    "ledger",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config file line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("config file line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value `{value}` for {key} (from {origin}): {message}")]
    Invalid { key: String, value: String, origin: Source, message: String },
    #[error("{0}")]
    Io(String),
}

/// Where a setting came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Flag,
    Env,
    File,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Flag => "command line",
            Source::Env => "environment",
            Source::File => "config file",
        })
    }
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", normalize(key).to_ascii_uppercase().replace('-', "_"))
}

/// Parses config file text into normalized keys.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: i + 1, message: "expected `key = value`".into() });
        };
        let key = normalize(k);
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { line: i + 1, key });
        }
        let v = v.trim();
        let v = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
        out.insert(key, v.to_string());
    }
    Ok(out)
}

/// The environment and file layers; flags are passed per lookup.
#[derive(Clone, Debug, Default)]
pub struct Layers {
    env: BTreeMap<String, String>,
    file: BTreeMap<String, String>,
}

impl Layers {
    pub fn new(env: BTreeMap<String, String>, file: BTreeMap<String, String>) -> Self {
        Self { env, file }
    }

    /// Captures `DSREPAIR_*` variables and reads the config file, if any.
    pub fn from_process(config_path: Option<&Path>) -> Result<Self, ConfigError> {
        let env = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        let file = match config_path {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| ConfigError::Io(format!("config file {}: {e}", p.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        Ok(Self { env, file })
    }

    /// The winning raw value for `key`.
    pub fn get(&self, key: &str, flag: Option<&str>) -> Option<(String, Source)> {
        if let Some(v) = flag {
            return Some((v.to_string(), Source::Flag));
        }
        if let Some(v) = self.env.get(&env_name(key)).filter(|v| !v.is_empty()) {
            return Some((v.clone(), Source::Env));
        }
        self.file.get(&normalize(key)).map(|v| (v.clone(), Source::File))
    }

    /// Looks up and parses `key`; parse failures name the key and layer.
    pub fn parse<T>(&self, key: &str, flag: Option<&str>) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.get(key, flag) {
            None => Ok(None),
            Some((value, source)) => value.parse::<T>().map(Some).map_err(|e| ConfigError::Invalid {
                key: key.to_string(),
                value,
                origin: source,
                message: e.to_string(),
            }),
        }
    }
}
