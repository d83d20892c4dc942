//! Runtime settings from `config/general.json`.
//!
//! The file is optional: a missing file means every setting takes its
//! default. A present file is held to the same strictness as the API
//! descriptions: unknown keys and wrong types are errors, not warnings.

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde_json::Value;
use thiserror::Error;

/// Settings that apply across all servers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralConfig {
    /// Token cache location, resolved against the config directory when
    /// relative.
    pub credentials_file: PathBuf,
    /// Consecutive too-many-calls responses tolerated before giving up.
    pub max_probes: u32,
    pub transport_timeout_seconds: u64,
    pub user_agent: String,
    /// Per-server override for the query parameter name a cached token
    /// is replayed under (the default is the token path's last segment).
    pub query_token_params: IndexMap<String, String>,
}

pub const DEFAULT_MAX_PROBES: u32 = 3;
pub const DEFAULT_TIMEOUT_SECONDS: u64 = 30;

fn default_user_agent() -> String {
    format!("blendkit/{}", env!("CARGO_PKG_VERSION"))
}

impl GeneralConfig {
    /// All defaults, with the credentials file placed in `config_dir`.
    pub fn defaults(config_dir: &Path) -> GeneralConfig {
        GeneralConfig {
            credentials_file: config_dir.join("credentials.json"),
            max_probes: DEFAULT_MAX_PROBES,
            transport_timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
            user_agent: default_user_agent(),
            query_token_params: IndexMap::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("general.json: {field}: {message}")]
    Invalid { field: String, message: String },
}

/// Read `general.json` from `config_dir`, falling back to defaults when
/// the file does not exist.
pub fn load_general_config(config_dir: &Path) -> Result<GeneralConfig, ConfigError> {
    let path = config_dir.join("general.json");
    let text = match fs::read_to_string(&path) {
        Ok(text) => text,
        Err(err) if err.kind() == std::io::ErrorKind::NotFound => {
            return Ok(GeneralConfig::defaults(config_dir));
        }
        Err(err) => {
            return Err(ConfigError::Io {
                path,
                message: err.to_string(),
            });
        }
    };
    let document: Value = serde_json::from_str(&text).map_err(|err| ConfigError::Invalid {
        field: "$".to_owned(),
        message: err.to_string(),
    })?;
    let Value::Object(map) = document else {
        return Err(ConfigError::Invalid {
            field: "$".to_owned(),
            message: "expected a JSON object".to_owned(),
        });
    };

    let mut config = GeneralConfig::defaults(config_dir);
    for (key, value) in &map {
        match key.as_str() {
            "credentials_file" => {
                let text = expect_string(key, value)?;
                let supplied = PathBuf::from(text);
                config.credentials_file = if supplied.is_absolute() {
                    supplied
                } else {
                    config_dir.join(supplied)
                };
            }
            "max_probes" => {
                config.max_probes = expect_integer(key, value, 1, u32::MAX as u64)? as u32;
            }
            "transport_timeout_seconds" => {
                config.transport_timeout_seconds = expect_integer(key, value, 1, 86_400)?;
            }
            "user_agent" => {
                config.user_agent = expect_string(key, value)?.to_owned();
            }
            "query_token_params" => {
                let Value::Object(entries) = value else {
                    return Err(ConfigError::Invalid {
                        field: key.clone(),
                        message: "expected an object of server name to parameter name".to_owned(),
                    });
                };
                for (server, param) in entries {
                    let param = expect_string(&format!("{key}.{server}"), param)?;
                    config
                        .query_token_params
                        .insert(server.clone(), param.to_owned());
                }
            }
            other => {
                return Err(ConfigError::Invalid {
                    field: other.to_owned(),
                    message: "unknown key".to_owned(),
                });
            }
        }
    }
    Ok(config)
}

fn expect_string<'v>(field: &str, value: &'v Value) -> Result<&'v str, ConfigError> {
    value.as_str().ok_or_else(|| ConfigError::Invalid {
        field: field.to_owned(),
        message: "expected a string".to_owned(),
    })
}

fn expect_integer(field: &str, value: &Value, min: u64, max: u64) -> Result<u64, ConfigError> {
    let number = value.as_u64().filter(|n| (min..=max).contains(n));
    number.ok_or_else(|| ConfigError::Invalid {
        field: field.to_owned(),
        message: format!("expected an integer in {min}..={max}"),
    })
}
