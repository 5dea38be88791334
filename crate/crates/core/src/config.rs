//! Runtime configuration loaded from environment variables.
//!
//! Every key has a fixed spelling (see [`keys`]). Optional keys fall back to
//! their defaults; mandatory keys produce [`ConfigError::MissingKey`]. An
//! optional `.env` file in the working directory is merged underneath the
//! real process environment.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod keys {
    pub const OPENAI_API_KEY: &str = "OPENAI_API_KEY";
    pub const OPENAI_MODEL: &str = "OPENAI_MODEL";
    pub const DATABASE_URL: &str = "DATABASE_URL";
    pub const LANGSMITH: &str = "LANGSMITH";
    pub const LANGSMITH_API_KEY: &str = "LANGSMITH_API_KEY";
    pub const LANGSMITH_PROJECT: &str = "LANGSMITH_PROJECT";
    pub const FEW_SHOT: &str = "FEW_SHOT";
    pub const GATEWAY_MODE: &str = "GATEWAY_MODE";
}

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo-0125";
pub const DEFAULT_DATABASE_URL: &str = "./data/games.db";
pub const DEFAULT_TRACING_PROJECT: &str = "SoccerRag";
pub const DEFAULT_FEW_SHOT: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("missing mandatory configuration key {0}")]
    MissingKey(&'static str),
    #[error("invalid value {value:?} for {key}: {reason}")]
    InvalidValue {
        key: &'static str,
        value: String,
        reason: String,
    },
    #[error("could not read {path}: {reason}")]
    EnvFile { path: String, reason: String },
}

/// A credential that never shows up in `Debug` output.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

/// How the completion gateway reaches the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    #[default]
    Live,
    Record,
    Replay,
}

impl GatewayMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GatewayMode::Live => "live",
            GatewayMode::Record => "record",
            GatewayMode::Replay => "replay",
        }
    }

    pub fn needs_credentials(self) -> bool {
        !matches!(self, GatewayMode::Replay)
    }
}

impl FromStr for GatewayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(GatewayMode::Live),
            "record" => Ok(GatewayMode::Record),
            "replay" => Ok(GatewayMode::Replay),
            _ => Err("expected one of live, record, replay".to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Absent only in replay mode.
    pub openai_api_key: Option<Secret>,
    pub model_name: String,
    pub database_url: String,
    pub tracing_enabled: bool,
    pub tracing_api_key: Option<Secret>,
    pub tracing_project: String,
    pub few_shot: usize,
    pub gateway_mode: GatewayMode,
}

impl EngineConfig {
    /// Renders the config back into the environment keys it was loaded from.
    /// Defaults are written out explicitly.
    pub fn to_env(&self) -> BTreeMap<String, String> {
        let mut env = BTreeMap::new();
        if let Some(key) = &self.openai_api_key {
            env.insert(keys::OPENAI_API_KEY.to_string(), key.expose().to_string());
        }
        env.insert(keys::OPENAI_MODEL.to_string(), self.model_name.clone());
        env.insert(keys::DATABASE_URL.to_string(), self.database_url.clone());
        env.insert(
            keys::LANGSMITH.to_string(),
            if self.tracing_enabled { "True" } else { "False" }.to_string(),
        );
        if let Some(key) = &self.tracing_api_key {
            env.insert(keys::LANGSMITH_API_KEY.to_string(), key.expose().to_string());
        }
        env.insert(
            keys::LANGSMITH_PROJECT.to_string(),
            self.tracing_project.clone(),
        );
        env.insert(keys::FEW_SHOT.to_string(), self.few_shot.to_string());
        env.insert(
            keys::GATEWAY_MODE.to_string(),
            self.gateway_mode.as_str().to_string(),
        );
        env
    }
}

fn non_empty<'a>(env: &'a HashMap<String, String>, key: &str) -> Option<&'a str> {
    env.get(key).map(|v| v.trim()).filter(|v| !v.is_empty())
}

fn parse_bool(key: &'static str, raw: &str) -> Result<bool, ConfigError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key,
            value: raw.to_string(),
            reason: "expected True or False".to_string(),
        }),
    }
}

/// Builds an [`EngineConfig`] from a string map. Unknown keys are ignored.
pub fn load_config(env: &HashMap<String, String>) -> Result<EngineConfig, ConfigError> {
    let gateway_mode = match non_empty(env, keys::GATEWAY_MODE) {
        Some(raw) => raw.parse().map_err(|reason| ConfigError::InvalidValue {
            key: keys::GATEWAY_MODE,
            value: raw.to_string(),
            reason,
        })?,
        None => GatewayMode::default(),
    };

    let openai_api_key = non_empty(env, keys::OPENAI_API_KEY).map(Secret::new);
    if gateway_mode.needs_credentials() && openai_api_key.is_none() {
        return Err(ConfigError::MissingKey(keys::OPENAI_API_KEY));
    }

    let tracing_enabled = match non_empty(env, keys::LANGSMITH) {
        Some(raw) => parse_bool(keys::LANGSMITH, raw)?,
        None => false,
    };
    let tracing_api_key = non_empty(env, keys::LANGSMITH_API_KEY).map(Secret::new);
    if tracing_enabled && tracing_api_key.is_none() {
        return Err(ConfigError::MissingKey(keys::LANGSMITH_API_KEY));
    }

    let few_shot = match non_empty(env, keys::FEW_SHOT) {
        Some(raw) => match raw.parse::<usize>() {
            Ok(n) if n >= 1 => n,
            Ok(_) => {
                return Err(ConfigError::InvalidValue {
                    key: keys::FEW_SHOT,
                    value: raw.to_string(),
                    reason: "must be at least 1".to_string(),
                })
            }
            Err(e) => {
                return Err(ConfigError::InvalidValue {
                    key: keys::FEW_SHOT,
                    value: raw.to_string(),
                    reason: e.to_string(),
                })
            }
        },
        None => DEFAULT_FEW_SHOT,
    };

    Ok(EngineConfig {
        openai_api_key,
        model_name: non_empty(env, keys::OPENAI_MODEL)
            .unwrap_or(DEFAULT_MODEL)
            .to_string(),
        database_url: non_empty(env, keys::DATABASE_URL)
            .unwrap_or(DEFAULT_DATABASE_URL)
            .to_string(),
        tracing_enabled,
        tracing_api_key,
        tracing_project: non_empty(env, keys::LANGSMITH_PROJECT)
            .unwrap_or(DEFAULT_TRACING_PROJECT)
            .to_string(),
        few_shot,
        gateway_mode,
    })
}

/// Parses `.env` content: `KEY=VALUE` lines, `#` comments, optional
/// `export ` prefix and optional matching quotes around the value.
pub fn parse_env_file(content: &str) -> HashMap<String, String> {
    let mut out = HashMap::new();
    for line in content.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let line = line.strip_prefix("export ").unwrap_or(line);
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let key = key.trim();
        if key.is_empty() {
            continue;
        }
        let mut value = value.trim();
        for quote in ['"', '\''] {
            if value.len() >= 2 && value.starts_with(quote) && value.ends_with(quote) {
                value = &value[1..value.len() - 1];
                break;
            }
        }
        out.insert(key.to_string(), value.to_string());
    }
    out
}

/// Merges `<dir>/.env` (if present) under the given process variables.
pub fn merged_env(
    dir: &Path,
    process: impl IntoIterator<Item = (String, String)>,
) -> Result<HashMap<String, String>, ConfigError> {
    let path = dir.join(".env");
    let mut env = match std::fs::read_to_string(&path) {
        Ok(content) => parse_env_file(&content),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => HashMap::new(),
        Err(e) => {
            return Err(ConfigError::EnvFile {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
        }
    };
    env.extend(process);
    Ok(env)
}

/// Loads configuration from the process environment plus `./.env`.
pub fn load_from_process() -> Result<EngineConfig, ConfigError> {
    let env = merged_env(Path::new("."), std::env::vars())?;
    load_config(&env)
}
