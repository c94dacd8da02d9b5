//! Flat `key=value` run configuration. Settings resolve with precedence
//! command-line flag > config file > built-in default. Secrets are out of
//! scope by design: API keys come only from environment variables, so config
//! files stay safe to commit.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

/// Environment variable consulted for API keys unless overridden by the
/// `api_key_env` setting.
pub const DEFAULT_API_KEY_ENV: &str = "SCR_TRIAGE_API_KEY";

/// Keys a config file may set. Anything else is rejected to catch typos.
pub const KNOWN_KEYS: &[&str] = &[
    "corpus",
    "provider",
    "endpoint",
    "model",
    "dimension",
    "batch_size",
    "prompt",
    "concurrency",
    "retry_max",
    "k",
    "train_fraction",
    "perplexity",
    "iterations",
    "threshold",
    "floor",
    "objective",
    "bin_width",
    "out_dir",
    "seed",
    "format",
    "api_key_env",
];

/// Key names that look like secret material; refused outright with a pointer
/// to the environment-variable mechanism.
const SECRET_KEYS: &[&str] = &["api_key", "apikey", "token", "secret", "password"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line} is not `key=value`: {content:?}")]
    MalformedLine { line: usize, content: String },
    #[error("config key {key:?} set twice (lines {first} and {second})")]
    DuplicateKey {
        key: String,
        first: usize,
        second: usize,
    },
    #[error("unknown config key {key:?} on line {line}")]
    UnknownKey { key: String, line: usize },
    #[error(
        "config key {key:?} looks like a secret; API keys must come from an \
         environment variable (default {DEFAULT_API_KEY_ENV}), never from config files"
    )]
    SecretKey { key: String },
    #[error("config value for {key:?} is invalid: {value:?} ({reason})")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
}

/// Parsed config file: a flat string map with typed accessors.
#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    /// Parses `key=value` lines. Blank lines and `#` comments are ignored;
    /// whitespace around keys and values is trimmed; keys must be known,
    /// unique, and non-secret.
    pub fn parse(text: &str) -> Result<FileConfig, ConfigError> {
        let mut values = BTreeMap::new();
        let mut first_lines: BTreeMap<String, usize> = BTreeMap::new();
        for (index, raw_line) in text.lines().enumerate() {
            let line_no = index + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::MalformedLine {
                    line: line_no,
                    content: raw_line.to_string(),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if SECRET_KEYS.contains(&key.to_ascii_lowercase().as_str()) {
                return Err(ConfigError::SecretKey { key });
            }
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { key, line: line_no });
            }
            if let Some(&first) = first_lines.get(&key) {
                return Err(ConfigError::DuplicateKey {
                    key,
                    first,
                    second: line_no,
                });
            }
            first_lines.insert(key.clone(), line_no);
            values.insert(key, value);
        }
        Ok(FileConfig { values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FileConfig, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        FileConfig::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn get_parsed<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(value) => value
                .parse::<T>()
                .map(Some)
                .map_err(|e| ConfigError::BadValue {
                    key: key.to_string(),
                    value: value.clone(),
                    reason: e.to_string(),
                }),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.get_parsed(key)
    }

    pub fn get_u32(&self, key: &str) -> Result<Option<u32>, ConfigError> {
        self.get_parsed(key)
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get_parsed(key)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get_parsed(key)
    }
}

/// Three-layer precedence: explicit flag, then config file, then default.
pub fn resolve<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
